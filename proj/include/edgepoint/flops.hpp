#pragma once

#include <cstdint>

namespace edgepoint::flops {

// Closed-form FLOP costs for every forward-path primitive. The counting
// convention, pinned here once for the whole project:
//   - multiply-add pairs cost 2 (one mul + one add, including the first
//     accumulation into a zero register)
//   - comparisons cost 1 (activations and max reductions)
//   - divisions and square roots cost 1 each
//   - kNN distance evaluation is charged at 8 ops per coordinate pair over
//     the full N x N matrix; top-k selection is not charged
//   - data movement (gathers, concatenation) is free; the x_j - x_i
//     subtraction in edge-feature assembly is charged at 1 op per lane
// The instrumented kernels in kernels.hpp / tensor.hpp charge through the
// same conventions, and the two are tested for exact equality.

using u64 = std::uint64_t;

inline constexpr u64 kDistOpsPerCoord = 8;

inline u64 linear(u64 rows, u64 in, u64 out, bool bias) {
    return rows * out * (2 * in + (bias ? 1 : 0));
}

inline u64 leaky_relu(u64 n) { return n; }

inline u64 pairwise_dist(u64 n, u64 f) { return n * n * kDistOpsPerCoord * f; }

/// Per-edge feature assembly: one subtraction per coordinate of x_j - x_i.
inline u64 edge_assembly(u64 n, u64 k, u64 f) { return n * k * f; }

/// Max over k candidates, per group and output lane: k - 1 comparisons.
inline u64 max_group(u64 groups, u64 k, u64 width) { return groups * width * (k - 1); }

/// Column mean over n rows: n - 1 adds plus 1 multiply by 1/n per column.
inline u64 mean_columns(u64 n, u64 f) { return f * n; }

/// Column max over n rows: n - 1 comparisons per column.
inline u64 max_columns(u64 n, u64 f) { return f * (n - 1); }

inline u64 readout(u64 n, u64 f) { return mean_columns(n, f) + max_columns(n, f); }

/// Square-accumulate (2d) + scale by sqrt(d*P)/norm (d muls) + 1 mul,
/// 2 sqrts and 1 div for the factor itself.
inline u64 power_normalize(u64 d) { return 3 * d + 4; }

inline u64 edge_conv(u64 n, u64 k, u64 in, u64 out, bool bias = true) {
    return pairwise_dist(n, in) + edge_assembly(n, k, in) +
           linear(n * k, 2 * in, out, bias) + leaky_relu(n * k * out) +
           max_group(n, k, out);
}

inline u64 pointwise_mlp(u64 n, u64 in, u64 out, bool bias = true) {
    return linear(n, in, out, bias) + leaky_relu(n * out);
}

}  // namespace edgepoint::flops
