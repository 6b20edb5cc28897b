#pragma once

#include <cmath>
#include <cstdint>

namespace edgepoint::rng {

// All randomness in the project flows through this generator. xoshiro256++ is
// platform-stable (pure integer state transitions), unlike the std::
// distributions whose output differs between standard library implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a base seed and a tag path.
/// derive(s, a, b) != derive(s, b, a); collisions are splitmix-hard.
inline std::uint64_t derive(std::uint64_t base) { return base; }

template <typename... Rest>
inline std::uint64_t derive(std::uint64_t base, std::uint64_t tag, Rest... rest) {
    std::uint64_t s = base ^ (tag + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
    std::uint64_t mixed = splitmix64(s);
    return derive(mixed, static_cast<std::uint64_t>(rest)...);
}

// Fixed stream tags. Dataset generation and channel noise never share a stream.
inline constexpr std::uint64_t kDataStream = 0x5ede5eedda7aULL;
inline constexpr std::uint64_t kChannelStream = 0xc4a22e1ca11ULL;

class Xoshiro256 {
  public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 bits of randomness.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n). n must be > 0. Uses rejection to avoid modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per pair,
    /// caches the second value, so draws are deterministic per stream.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace edgepoint::rng
