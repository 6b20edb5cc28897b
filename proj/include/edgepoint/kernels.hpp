#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "edgepoint/flops.hpp"
#include "edgepoint/opcount.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace edgepoint::kernels {

// Dense compute kernels behind the tensor ops. Each kernel has a serial
// reference implementation and an OpenMP variant; the public entry point
// dispatches on the global execution policy. Parallel loops partition
// output elements so that every element is written by exactly one thread
// with the same inner accumulation order as the serial path -- results are
// bit-identical for any thread count.
//
// When the op counter is enabled the kernels run instrumented serial code
// instead, charging costs per the conventions in flops.hpp.

enum class Exec { serial, parallel };

inline Exec& execution_policy() {
#ifdef _OPENMP
    static Exec policy = omp_get_max_threads() > 1 ? Exec::parallel : Exec::serial;
#else
    static Exec policy = Exec::serial;
#endif
    return policy;
}

namespace detail {

// ---- C(m x n) += A(m x k) * B(k x n) ----

template <class T>
void gemm_nn_serial(int m, int k, int n, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::ptrdiff_t>(i) * k;
        T* crow = c + static_cast<std::ptrdiff_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<std::ptrdiff_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void gemm_nn_parallel(int m, int k, int n, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::ptrdiff_t>(i) * k;
        T* crow = c + static_cast<std::ptrdiff_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = b + static_cast<std::ptrdiff_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void gemm_nn_counted(int m, int k, int n, const T* a, const T* b, T* c) {
    gemm_nn_serial(m, k, n, a, b, c);
    opcount::mul(static_cast<std::uint64_t>(m) * k * n);
    opcount::add(static_cast<std::uint64_t>(m) * k * n);
}

// The transposed-operand products below rewrite into the gemm_nn loop
// shape, which keeps the accumulator row in registers. The scratch copy is
// tiny next to the product itself, and the per-element accumulation order
// (ascending contraction index) matches the naive loops bit for bit.

template <class T>
std::vector<T>& transpose_scratch() {
    thread_local std::vector<T> scratch;
    return scratch;
}

template <class T>
const T* transpose_into_scratch(int rows, int cols, const T* a) {
    auto& at = transpose_scratch<T>();
    at.resize(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int i = 0; i < cols; ++i)
            at[static_cast<std::size_t>(i) * rows + r] =
                a[static_cast<std::ptrdiff_t>(r) * cols + i];
    return at.data();
}

// ---- C(m x n) += A(m x k) * B(n x k)^T ----

template <class T>
void gemm_nt_serial(int m, int k, int n, const T* a, const T* b, T* c) {
    const T* bt = transpose_into_scratch(n, k, b);  // now k x n
    gemm_nn_serial(m, k, n, a, bt, c);
}

template <class T>
void gemm_nt_parallel(int m, int k, int n, const T* a, const T* b, T* c) {
    const T* bt = transpose_into_scratch(n, k, b);
    gemm_nn_parallel(m, k, n, a, bt, c);
}

// ---- C(m x n) += A(rows x m)^T * B(rows x n) ----
// Serial: r outermost, streams both inputs once and keeps C hot in L1.
// Parallel: thread-owned C rows over a transposed copy of A. Both update
// every C element in ascending r order, so results are bit-identical.

template <class T>
void gemm_tn_serial(int rows, int m, int n, const T* a, const T* b, T* c) {
    for (int r = 0; r < rows; ++r) {
        const T* arow = a + static_cast<std::ptrdiff_t>(r) * m;
        const T* brow = b + static_cast<std::ptrdiff_t>(r) * n;
        for (int i = 0; i < m; ++i) {
            const T av = arow[i];
            T* crow = c + static_cast<std::ptrdiff_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <class T>
void gemm_tn_parallel(int rows, int m, int n, const T* a, const T* b, T* c) {
    const T* at = transpose_into_scratch(rows, m, a);  // now m x rows
    gemm_nn_parallel(m, rows, n, at, b, c);
}

// ---- squared Euclidean distances, full n x n matrix ----
// Works on a transposed copy so row i sweeps contiguous lanes of j. The
// coordinate accumulation order (ascending c) matches the naive per-pair
// loop, so results are bit-identical with a brute-force oracle.

template <class T>
std::vector<T>& dist_scratch() {
    thread_local std::vector<T> scratch;
    return scratch;
}

template <class T>
const T* dist_transpose(int n, int f, const T* x) {
    auto& xt = dist_scratch<T>();
    xt.resize(static_cast<std::size_t>(n) * f);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < f; ++c)
            xt[static_cast<std::size_t>(c) * n + i] = x[static_cast<std::ptrdiff_t>(i) * f + c];
    return xt.data();
}

template <class T>
void pairwise_sqdist_row(int n, int f, const T* xt, const T* xi, T* drow) {
    // Tiled over j so the accumulators stay in registers across the c loop.
    constexpr int kTile = 64;
    for (int j0 = 0; j0 < n; j0 += kTile) {
        const int jn = std::min(kTile, n - j0);
        T acc[kTile] = {};
        for (int c = 0; c < f; ++c) {
            const T xc = xi[c];
            const T* col = xt + static_cast<std::ptrdiff_t>(c) * n + j0;
            for (int j = 0; j < jn; ++j) {
                const T diff = xc - col[j];
                acc[j] += diff * diff;
            }
        }
        for (int j = 0; j < jn; ++j) drow[j0 + j] = acc[j];
    }
}

template <class T>
void pairwise_sqdist_serial(int n, int f, const T* x, T* d) {
    const T* xt = dist_transpose(n, f, x);
    for (int i = 0; i < n; ++i)
        pairwise_sqdist_row(n, f, xt, x + static_cast<std::ptrdiff_t>(i) * f,
                            d + static_cast<std::ptrdiff_t>(i) * n);
}

template <class T>
void pairwise_sqdist_parallel(int n, int f, const T* x, T* d) {
    const T* xt = dist_transpose(n, f, x);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        pairwise_sqdist_row(n, f, xt, x + static_cast<std::ptrdiff_t>(i) * f,
                            d + static_cast<std::ptrdiff_t>(i) * n);
}

template <class T>
void pairwise_sqdist_counted(int n, int f, const T* x, T* d) {
    pairwise_sqdist_serial(n, f, x, d);
    // Charged at the pinned convention, 8 ops per coordinate pair.
    opcount::other(flops::pairwise_dist(static_cast<std::uint64_t>(n),
                                        static_cast<std::uint64_t>(f)));
}

// ---- k nearest neighbours per row, self excluded ----
// Order within a row: ascending distance, ties by ascending index. The
// selection is unique because (distance, index) pairs are totally ordered.

template <class T>
void knn_select_row(int n, int k, int i, const T* drow, int* out) {
    thread_local std::vector<std::pair<T, int>> cand;
    cand.clear();
    cand.reserve(static_cast<std::size_t>(n) - 1);
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        cand.emplace_back(drow[j], j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int q = 0; q < k; ++q) out[q] = cand[static_cast<std::size_t>(q)].second;
}

template <class T>
void knn_select_serial(int n, int k, const T* dist, int* out_idx) {
    for (int i = 0; i < n; ++i)
        knn_select_row(n, k, i, dist + static_cast<std::ptrdiff_t>(i) * n,
                       out_idx + static_cast<std::ptrdiff_t>(i) * k);
}

template <class T>
void knn_select_parallel(int n, int k, const T* dist, int* out_idx) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        knn_select_row(n, k, i, dist + static_cast<std::ptrdiff_t>(i) * n,
                       out_idx + static_cast<std::ptrdiff_t>(i) * k);
}

// ---- edge feature assembly: row (i,q) of E is [x_i || x_nbr - x_i] ----

template <class T>
void gather_edges_serial(int n, int k, int f, const T* x, const int* nbr, T* e) {
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<std::ptrdiff_t>(i) * f;
        for (int q = 0; q < k; ++q) {
            const int j = nbr[static_cast<std::ptrdiff_t>(i) * k + q];
            const T* xj = x + static_cast<std::ptrdiff_t>(j) * f;
            T* erow = e + (static_cast<std::ptrdiff_t>(i) * k + q) * (2 * f);
            for (int c = 0; c < f; ++c) erow[c] = xi[c];
            for (int c = 0; c < f; ++c) erow[f + c] = xj[c] - xi[c];
        }
    }
}

template <class T>
void gather_edges_parallel(int n, int k, int f, const T* x, const int* nbr, T* e) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<std::ptrdiff_t>(i) * f;
        for (int q = 0; q < k; ++q) {
            const int j = nbr[static_cast<std::ptrdiff_t>(i) * k + q];
            const T* xj = x + static_cast<std::ptrdiff_t>(j) * f;
            T* erow = e + (static_cast<std::ptrdiff_t>(i) * k + q) * (2 * f);
            for (int c = 0; c < f; ++c) erow[c] = xi[c];
            for (int c = 0; c < f; ++c) erow[f + c] = xj[c] - xi[c];
        }
    }
}

template <class T>
void gather_edges_counted(int n, int k, int f, const T* x, const int* nbr, T* e) {
    gather_edges_serial(n, k, f, x, nbr, e);
    opcount::add(flops::edge_assembly(static_cast<std::uint64_t>(n),
                                      static_cast<std::uint64_t>(k),
                                      static_cast<std::uint64_t>(f)));
}

// Gradient of gather_edges. The x_j scatter makes this inherently a
// reduction into shared rows, so it stays serial in both policies.
template <class T>
void scatter_edges(int n, int k, int f, const T* de, const int* nbr, T* dx) {
    for (int i = 0; i < n; ++i) {
        T* dxi = dx + static_cast<std::ptrdiff_t>(i) * f;
        for (int q = 0; q < k; ++q) {
            const int j = nbr[static_cast<std::ptrdiff_t>(i) * k + q];
            T* dxj = dx + static_cast<std::ptrdiff_t>(j) * f;
            const T* derow = de + (static_cast<std::ptrdiff_t>(i) * k + q) * (2 * f);
            for (int c = 0; c < f; ++c) {
                dxi[c] += derow[c] - derow[f + c];
                dxj[c] += derow[f + c];
            }
        }
    }
}

// ---- max over groups of k consecutive rows ----
// out (groups x f) = columnwise max over each k-row block of x; argmax
// records the winning row offset (first occurrence on ties) for backward.

template <class T>
void group_max_serial(int groups, int k, int f, const T* x, T* out, int* argmax) {
    for (int g = 0; g < groups; ++g) {
        const T* block = x + static_cast<std::ptrdiff_t>(g) * k * f;
        T* orow = out + static_cast<std::ptrdiff_t>(g) * f;
        int* arow = argmax + static_cast<std::ptrdiff_t>(g) * f;
        for (int j = 0; j < f; ++j) {
            orow[j] = block[j];
            arow[j] = 0;
        }
        for (int m = 1; m < k; ++m) {
            const T* row = block + static_cast<std::ptrdiff_t>(m) * f;
            for (int j = 0; j < f; ++j) {
                if (row[j] > orow[j]) {
                    orow[j] = row[j];
                    arow[j] = m;
                }
            }
        }
    }
}

template <class T>
void group_max_parallel(int groups, int k, int f, const T* x, T* out, int* argmax) {
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        const T* block = x + static_cast<std::ptrdiff_t>(g) * k * f;
        T* orow = out + static_cast<std::ptrdiff_t>(g) * f;
        int* arow = argmax + static_cast<std::ptrdiff_t>(g) * f;
        for (int j = 0; j < f; ++j) {
            orow[j] = block[j];
            arow[j] = 0;
        }
        for (int m = 1; m < k; ++m) {
            const T* row = block + static_cast<std::ptrdiff_t>(m) * f;
            for (int j = 0; j < f; ++j) {
                if (row[j] > orow[j]) {
                    orow[j] = row[j];
                    arow[j] = m;
                }
            }
        }
    }
}

template <class T>
void group_max_counted(int groups, int k, int f, const T* x, T* out, int* argmax) {
    group_max_serial(groups, k, f, x, out, argmax);
    opcount::cmp(flops::max_group(static_cast<std::uint64_t>(groups),
                                  static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(f)));
}

// ---- leaky ReLU ----

template <class T>
void leaky_relu_serial(std::size_t n, T slope, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_parallel(std::size_t n, T slope, const T* x, T* y) {
    const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < sn; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_relu_counted(std::size_t n, T slope, const T* x, T* y) {
    leaky_relu_serial(n, slope, x, y);
    opcount::cmp(n);
}

}  // namespace detail

template <class T>
void gemm_nn(int m, int k, int n, const T* a, const T* b, T* c) {
    if (opcount::enabled()) return detail::gemm_nn_counted(m, k, n, a, b, c);
    if (execution_policy() == Exec::parallel) return detail::gemm_nn_parallel(m, k, n, a, b, c);
    detail::gemm_nn_serial(m, k, n, a, b, c);
}

template <class T>
void gemm_nt(int m, int k, int n, const T* a, const T* b, T* c) {
    if (execution_policy() == Exec::parallel && !opcount::enabled())
        return detail::gemm_nt_parallel(m, k, n, a, b, c);
    detail::gemm_nt_serial(m, k, n, a, b, c);
}

template <class T>
void gemm_tn(int rows, int m, int n, const T* a, const T* b, T* c) {
    if (execution_policy() == Exec::parallel && !opcount::enabled())
        return detail::gemm_tn_parallel(rows, m, n, a, b, c);
    detail::gemm_tn_serial(rows, m, n, a, b, c);
}

template <class T>
void pairwise_sqdist(int n, int f, const T* x, T* d) {
    if (opcount::enabled()) return detail::pairwise_sqdist_counted(n, f, x, d);
    if (execution_policy() == Exec::parallel) return detail::pairwise_sqdist_parallel(n, f, x, d);
    detail::pairwise_sqdist_serial(n, f, x, d);
}

/// Top-k selection is never charged to the op counter (pinned convention).
template <class T>
void knn_select(int n, int k, const T* dist, int* out_idx) {
    if (execution_policy() == Exec::parallel && !opcount::enabled())
        return detail::knn_select_parallel(n, k, dist, out_idx);
    detail::knn_select_serial(n, k, dist, out_idx);
}

template <class T>
void gather_edges(int n, int k, int f, const T* x, const int* nbr, T* e) {
    if (opcount::enabled()) return detail::gather_edges_counted(n, k, f, x, nbr, e);
    if (execution_policy() == Exec::parallel) return detail::gather_edges_parallel(n, k, f, x, nbr, e);
    detail::gather_edges_serial(n, k, f, x, nbr, e);
}

template <class T>
void scatter_edges(int n, int k, int f, const T* de, const int* nbr, T* dx) {
    detail::scatter_edges(n, k, f, de, nbr, dx);
}

template <class T>
void group_max(int groups, int k, int f, const T* x, T* out, int* argmax) {
    if (opcount::enabled()) return detail::group_max_counted(groups, k, f, x, out, argmax);
    if (execution_policy() == Exec::parallel)
        return detail::group_max_parallel(groups, k, f, x, out, argmax);
    detail::group_max_serial(groups, k, f, x, out, argmax);
}

template <class T>
void leaky_relu(std::size_t n, T slope, const T* x, T* y) {
    if (opcount::enabled()) return detail::leaky_relu_counted(n, slope, x, y);
    if (execution_policy() == Exec::parallel) return detail::leaky_relu_parallel(n, slope, x, y);
    detail::leaky_relu_serial(n, slope, x, y);
}

}  // namespace edgepoint::kernels
