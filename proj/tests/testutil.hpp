#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <vector>

#include "edgepoint/rng.hpp"

namespace testutil {

/// Central finite differences of a scalar function of a flat vector.
template <class F>
std::vector<double> fd_gradient(F f, std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline bool close(double a, double b, double rtol = 1e-4, double atol = 1e-6) {
    return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

template <class A, class B>
bool all_close(const A& a, const B& b, double rtol = 1e-4, double atol = 1e-6) {
    if (static_cast<std::size_t>(a.size()) != static_cast<std::size_t>(b.size())) return false;
    for (std::size_t i = 0; i < static_cast<std::size_t>(a.size()); ++i)
        if (!close(static_cast<double>(a[i]), static_cast<double>(b[i]), rtol, atol)) return false;
    return true;
}

inline std::vector<double> random_vector(std::size_t n, edgepoint::rng::Xoshiro256& gen,
                                         double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = gen.uniform(lo, hi);
    return v;
}

}  // namespace testutil
