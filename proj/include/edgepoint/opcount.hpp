#pragma once

#include <cstdint>

namespace edgepoint::opcount {

// Scalar floating-point operation counter. When enabled, the forward-path
// kernels switch to instrumented serial implementations that tally every
// multiply, add/sub, comparison and division they execute. The latency
// planner's closed-form cost model is tested against these tallies for
// exact equality on small instances.

struct Counts {
    std::uint64_t mul = 0;
    std::uint64_t add = 0;   // additions and subtractions
    std::uint64_t cmp = 0;
    std::uint64_t div = 0;
    std::uint64_t other = 0; // sqrt and convention-charged bulk ops

    std::uint64_t total() const { return mul + add + cmp + div + other; }
};

namespace detail {
inline thread_local Counts g_counts;
inline thread_local bool g_enabled = false;
}  // namespace detail

inline bool enabled() { return detail::g_enabled; }
inline Counts current() { return detail::g_counts; }
inline void reset() { detail::g_counts = Counts{}; }

inline void mul(std::uint64_t n) { detail::g_counts.mul += n; }
inline void add(std::uint64_t n) { detail::g_counts.add += n; }
inline void cmp(std::uint64_t n) { detail::g_counts.cmp += n; }
inline void div(std::uint64_t n) { detail::g_counts.div += n; }
inline void other(std::uint64_t n) { detail::g_counts.other += n; }

/// RAII scope that enables counting and restores the previous state on exit.
class Scope {
  public:
    Scope() : previous_(detail::g_enabled) { detail::g_enabled = true; }
    ~Scope() { detail::g_enabled = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

  private:
    bool previous_;
};

}  // namespace edgepoint::opcount
