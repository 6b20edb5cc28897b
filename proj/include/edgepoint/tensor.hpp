#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgepoint/errors.hpp"
#include "edgepoint/kernels.hpp"
#include "edgepoint/opcount.hpp"
#include "edgepoint/rng.hpp"

namespace edgepoint::ad {

// Reverse-mode autodiff over dense row-major tensors. Small by design: the
// networks here need matmul, concatenation, one-axis reductions, pointwise
// activations, the classification losses and a couple of custom ops
// (edge gathering, power normalisation). float for training, double for
// gradient-check tests.

template <class T>
struct Node {
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;  // sized on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backprop;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

namespace detail {
inline thread_local int g_no_grad_depth = 0;
}

/// Suppresses tape construction inside its scope; forward values unchanged.
class NoGradGuard {
  public:
    NoGradGuard() { ++detail::g_no_grad_depth; }
    ~NoGradGuard() { --detail::g_no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::g_no_grad_depth == 0; }

inline std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e < 0) throw DimensionError("negative extent in shape");
        n *= e;
    }
    return n;
}

template <class T>
class Tensor {
  public:
    Tensor() = default;

    static Tensor from(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw DimensionError("data length does not match shape");
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)), T(0));
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor full(std::vector<int> shape, T v, bool requires_grad = false) {
        std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)), v);
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor scalar(T v) { return from({}, {v}); }

    static Tensor uniform(std::vector<int> shape, T lo, T hi, rng::Xoshiro256& gen,
                          bool requires_grad = false) {
        std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
        for (auto& v : data) v = static_cast<T>(gen.uniform(lo, hi));
        return from(std::move(shape), std::move(data), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t numel() const { return node_->numel(); }
    int extent(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }

    std::span<const T> data() const { return node_->value; }
    std::span<T> mutable_data() { return node_->value; }
    std::span<const T> grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool on) {
        if (!node_->parents.empty())
            throw DomainError("requires_grad can only be toggled on leaf tensors");
        node_->requires_grad = on;
        if (!on) node_->grad.clear();
    }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw DimensionError("item() requires a single-element tensor");
        return node_->value[0];
    }

    /// Element access for tests; row-major index arithmetic.
    T at(std::initializer_list<int> idx) const {
        std::int64_t flat = 0;
        std::size_t d = 0;
        for (int i : idx) {
            flat = flat * node_->shape[d] + i;
            ++d;
        }
        return node_->value[static_cast<std::size_t>(flat)];
    }

    /// Accumulates gradients into every reachable requires_grad leaf.
    /// Repeated calls keep accumulating into leaves until grads are
    /// cleared; interior node grads are reset per pass.
    void backward() const {
        if (numel() != 1) throw DimensionError("backward() requires a scalar loss");
        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        topo_visit(node_.get(), seen, order);
        for (Node<T>* n : order)
            if (!n->parents.empty()) n->grad.assign(n->value.size(), T(0));
        node_->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backprop && !n->grad.empty()) n->backprop(*n);
        }
    }

    std::shared_ptr<Node<T>> node() const { return node_; }
    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  private:
    static void topo_visit(Node<T>* root, std::unordered_set<Node<T>*>& seen,
                           std::vector<Node<T>*>& order) {
        // Iterative post-order; graphs are shallow but samples are many.
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
        seen.insert(root);
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node<T>* p = n->parents[next++].get();
                if (seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node<T>> node_;
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

namespace detail {

template <class T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool needs = false;
    if (grad_enabled())
        for (const auto& p : parents) needs |= p.node()->requires_grad;
    if (needs) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->backprop = std::move(backprop);
    }
    return Tensor<T>(std::move(n));
}

template <class T>
void accumulate(const NodePtr<T>& parent, const T* g, std::size_t n) {
    if (!parent->requires_grad) return;
    parent->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) parent->grad[i] += g[i];
}

struct AxisSplit {
    std::int64_t outer, mid, inner;
};

inline AxisSplit split_axis(const std::vector<int>& shape, int axis) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw DimensionError("axis out of range");
    AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int d = 0; d < axis; ++d) s.outer *= shape[static_cast<std::size_t>(d)];
    for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < shape.size(); ++d)
        s.inner *= shape[d];
    return s;
}

}  // namespace detail

// ---------- elementwise ----------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw DimensionError("add: shape mismatch");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b}, [pa, pb](Node<T>& n) {
            detail::accumulate(pa, n.grad.data(), n.grad.size());
            detail::accumulate(pb, n.grad.data(), n.grad.size());
        });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw DimensionError("sub: shape mismatch");
    std::vector<T> out(a.data().begin(), a.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b}, [pa, pb](Node<T>& n) {
            detail::accumulate(pa, n.grad.data(), n.grad.size());
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
            }
        });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) throw DimensionError("mul: shape mismatch");
    std::vector<T> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto pa = a.node(), pb = b.node();
    return detail::make_op<T>(
        a.shape(), std::move(out), {a, b}, [pa, pb](Node<T>& n) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    pa->grad[i] += n.grad[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    pb->grad[i] += n.grad[i] * pa->value[i];
            }
        });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    std::vector<T> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= c;
    auto pa = a.node();
    return detail::make_op<T>(a.shape(), std::move(out), {a}, [pa, c](Node<T>& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += c * n.grad[i];
    });
}

/// y = x + c where c carries no gradient (the AWGN noise layer).
template <class T>
Tensor<T> add_constant(const Tensor<T>& x, const std::vector<T>& c) {
    if (static_cast<std::int64_t>(c.size()) != x.numel())
        throw DimensionError("add_constant: length mismatch");
    std::vector<T> out(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
    auto px = x.node();
    return detail::make_op<T>(x.shape(), std::move(out), {x}, [px](Node<T>& n) {
        detail::accumulate(px, n.grad.data(), n.grad.size());
    });
}

// ---------- matmul / linear ----------

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: operands must be rank 2");
    const int m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2) throw DimensionError("matmul: inner extents differ");
    std::vector<T> out(static_cast<std::size_t>(m) * n, T(0));
    kernels::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
    auto pa = a.node(), pb = b.node();
    return detail::make_op<T>(
        {m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node<T>& nd) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                kernels::gemm_nt(m, n, k, nd.grad.data(), pb->value.data(), pa->grad.data());
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                kernels::gemm_tn(m, k, n, pa->value.data(), nd.grad.data(), pb->grad.data());
            }
        });
}

/// Fused x @ w + bias over rows; one tape node instead of two.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
        throw DimensionError("linear: expected matrix, matrix, vector");
    const int rows = x.extent(0), in = x.extent(1), out = w.extent(1);
    if (w.extent(0) != in || b.extent(0) != out) throw DimensionError("linear: width mismatch");
    std::vector<T> val(static_cast<std::size_t>(rows) * out);
    for (int r = 0; r < rows; ++r)
        std::copy(b.data().begin(), b.data().end(), val.begin() + static_cast<std::ptrdiff_t>(r) * out);
    kernels::gemm_nn(rows, in, out, x.data().data(), w.data().data(), val.data());
    if (opcount::enabled()) opcount::add(static_cast<std::uint64_t>(rows) * out);
    auto px = x.node(), pw = w.node(), pb = b.node();
    return detail::make_op<T>(
        {rows, out}, std::move(val), {x, w, b}, [px, pw, pb, rows, in, out](Node<T>& n) {
            if (px->requires_grad) {
                px->ensure_grad();
                kernels::gemm_nt(rows, out, in, n.grad.data(), pw->value.data(), px->grad.data());
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                kernels::gemm_tn(rows, in, out, px->value.data(), n.grad.data(), pw->grad.data());
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < out; ++j)
                        pb->grad[static_cast<std::size_t>(j)] +=
                            n.grad[static_cast<std::size_t>(r) * out + j];
            }
        });
}

/// Columnwise max over blocks of k consecutive rows; backward routes each
/// output lane's gradient to the first-occurrence argmax row.
template <class T>
Tensor<T> group_max(const Tensor<T>& x, int k) {
    if (x.rank() != 2) throw DimensionError("group_max: expected rank 2");
    const int total = x.extent(0), f = x.extent(1);
    if (k < 1 || total % k != 0) throw DimensionError("group_max: rows not divisible by k");
    const int groups = total / k;
    std::vector<T> out(static_cast<std::size_t>(groups) * f);
    std::vector<int> argmax(out.size());
    kernels::group_max(groups, k, f, x.data().data(), out.data(), argmax.data());
    auto px = x.node();
    return detail::make_op<T>(
        {groups, f}, std::move(out), {x},
        [px, groups, k, f, argmax = std::move(argmax)](Node<T>& n) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            for (int g = 0; g < groups; ++g)
                for (int j = 0; j < f; ++j) {
                    const int m = argmax[static_cast<std::size_t>(g) * f + j];
                    px->grad[(static_cast<std::size_t>(g) * k + m) * f + j] +=
                        n.grad[static_cast<std::size_t>(g) * f + j];
                }
        });
}

/// Broadcast-add a length-C vector to every row of an R x C matrix.
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& m, const Tensor<T>& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.extent(1) != v.extent(0))
        throw DimensionError("add_rowvec: shape mismatch");
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<T> out(m.data().begin(), m.data().end());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(r) * cols + c] += v.data()[c];
    if (opcount::enabled()) opcount::add(static_cast<std::uint64_t>(rows) * cols);
    auto pm = m.node(), pv = v.node();
    return detail::make_op<T>(
        m.shape(), std::move(out), {m, v}, [pm, pv, rows, cols](Node<T>& n) {
            detail::accumulate(pm, n.grad.data(), n.grad.size());
            if (pv->requires_grad) {
                pv->ensure_grad();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c)
                        pv->grad[static_cast<std::size_t>(c)] +=
                            n.grad[static_cast<std::size_t>(r) * cols + c];
            }
        });
}

// ---------- shape ops ----------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != x.numel()) throw DimensionError("reshape: element count differs");
    std::vector<T> out(x.data().begin(), x.data().end());
    auto px = x.node();
    return detail::make_op<T>(std::move(new_shape), std::move(out), {x}, [px](Node<T>& n) {
        detail::accumulate(px, n.grad.data(), n.grad.size());
    });
}

/// New leaf sharing the values, cut off from the tape.
template <class T>
Tensor<T> detach(const Tensor<T>& x) {
    return Tensor<T>::from(x.shape(), std::vector<T>(x.data().begin(), x.data().end()));
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
    if (xs.empty()) throw DimensionError("concat: no inputs");
    const auto& s0 = xs.front().shape();
    for (const auto& x : xs) {
        if (x.rank() != static_cast<int>(s0.size())) throw DimensionError("concat: rank mismatch");
        for (int d = 0; d < x.rank(); ++d)
            if (d != axis && x.shape()[static_cast<std::size_t>(d)] != s0[static_cast<std::size_t>(d)])
                throw DimensionError("concat: extents differ off the concat axis");
    }
    auto split0 = detail::split_axis(s0, axis);
    std::int64_t total_mid = 0;
    for (const auto& x : xs) total_mid += x.extent(axis);
    std::vector<int> out_shape = s0;
    out_shape[static_cast<std::size_t>(axis)] = static_cast<int>(total_mid);

    std::vector<T> out(static_cast<std::size_t>(split0.outer * total_mid * split0.inner));
    std::int64_t offset_mid = 0;
    for (const auto& x : xs) {
        const std::int64_t mid = x.extent(axis);
        const T* src = x.data().data();
        for (std::int64_t o = 0; o < split0.outer; ++o) {
            T* dst = out.data() + (o * total_mid + offset_mid) * split0.inner;
            const T* s = src + o * mid * split0.inner;
            std::copy(s, s + mid * split0.inner, dst);
        }
        offset_mid += mid;
    }

    std::vector<NodePtr<T>> pnodes;
    std::vector<std::int64_t> mids;
    for (const auto& x : xs) {
        pnodes.push_back(x.node());
        mids.push_back(x.extent(axis));
    }
    auto outer = split0.outer;
    auto inner = split0.inner;
    return detail::make_op<T>(
        std::move(out_shape), std::move(out), xs,
        [pnodes, mids, outer, inner, total_mid](Node<T>& n) {
            std::int64_t off = 0;
            for (std::size_t t = 0; t < pnodes.size(); ++t) {
                const auto& p = pnodes[t];
                const std::int64_t mid = mids[t];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::int64_t o = 0; o < outer; ++o) {
                        const T* g = n.grad.data() + (o * total_mid + off) * inner;
                        T* dst = p->grad.data() + o * mid * inner;
                        for (std::int64_t i = 0; i < mid * inner; ++i) dst[i] += g[i];
                    }
                }
                off += mid;
            }
        });
}

// ---------- reductions ----------

enum class Reduce { mean, max, sum };

template <class T>
Tensor<T> reduce(const Tensor<T>& x, int axis, Reduce kind) {
    auto sp = detail::split_axis(x.shape(), axis);
    if (sp.mid == 0) throw DomainError("reduce: empty axis extent");
    std::vector<int> out_shape;
    for (int d = 0; d < x.rank(); ++d)
        if (d != axis) out_shape.push_back(x.shape()[static_cast<std::size_t>(d)]);

    const std::size_t out_n = static_cast<std::size_t>(sp.outer * sp.inner);
    std::vector<T> out(out_n, T(0));
    std::vector<std::int64_t> argmax;
    const T* src = x.data().data();

    if (kind == Reduce::max) {
        argmax.resize(out_n);
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                T best = src[(o * sp.mid) * sp.inner + i];
                std::int64_t best_m = 0;
                for (std::int64_t m = 1; m < sp.mid; ++m) {
                    const T v = src[(o * sp.mid + m) * sp.inner + i];
                    if (v > best) {  // first occurrence wins on ties
                        best = v;
                        best_m = m;
                    }
                }
                out[static_cast<std::size_t>(o * sp.inner + i)] = best;
                argmax[static_cast<std::size_t>(o * sp.inner + i)] = best_m;
            }
        if (opcount::enabled())
            opcount::cmp(static_cast<std::uint64_t>(out_n) * static_cast<std::uint64_t>(sp.mid - 1));
    } else {
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t i = 0; i < sp.inner; ++i) {
                T acc = 0;
                for (std::int64_t m = 0; m < sp.mid; ++m)
                    acc += src[(o * sp.mid + m) * sp.inner + i];
                out[static_cast<std::size_t>(o * sp.inner + i)] =
                    kind == Reduce::mean ? acc / static_cast<T>(sp.mid) : acc;
            }
        if (opcount::enabled()) {
            opcount::add(static_cast<std::uint64_t>(out_n) * static_cast<std::uint64_t>(sp.mid - 1));
            if (kind == Reduce::mean) opcount::mul(static_cast<std::uint64_t>(out_n));
        }
    }

    auto px = x.node();
    auto mid = sp.mid, outer = sp.outer, inner = sp.inner;
    return detail::make_op<T>(
        std::move(out_shape), std::move(out), {x},
        [px, mid, outer, inner, kind, argmax = std::move(argmax)](Node<T>& n) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t i = 0; i < inner; ++i) {
                    const T g = n.grad[static_cast<std::size_t>(o * inner + i)];
                    if (kind == Reduce::max) {
                        const std::int64_t m = argmax[static_cast<std::size_t>(o * inner + i)];
                        px->grad[static_cast<std::size_t>((o * mid + m) * inner + i)] += g;
                    } else if (kind == Reduce::mean) {
                        const T gm = g / static_cast<T>(mid);
                        for (std::int64_t m = 0; m < mid; ++m)
                            px->grad[static_cast<std::size_t>((o * mid + m) * inner + i)] += gm;
                    } else {
                        for (std::int64_t m = 0; m < mid; ++m)
                            px->grad[static_cast<std::size_t>((o * mid + m) * inner + i)] += g;
                    }
                }
        });
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += v;
    auto px = x.node();
    return detail::make_op<T>({}, {acc}, {x}, [px](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const T g = n.grad[0];
        for (auto& gv : px->grad) gv += g;
    });
}

// ---------- activations ----------

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    std::vector<T> out(x.data().size());
    kernels::leaky_relu(out.size(), slope, x.data().data(), out.data());
    auto px = x.node();
    return detail::make_op<T>(x.shape(), std::move(out), {x}, [px, slope](Node<T>& n) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            px->grad[i] += n.grad[i] * (px->value[i] > T(0) ? T(1) : slope);
    });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    return leaky_relu(x, T(0));
}

namespace detail {

/// Row-wise stable softmax of a (rows x cols) buffer.
template <class T>
void softmax_rows(int rows, int cols, const T* x, T* y) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<std::ptrdiff_t>(r) * cols;
        T* yr = y + static_cast<std::ptrdiff_t>(r) * cols;
        T m = xr[0];
        for (int c = 1; c < cols; ++c) m = std::max(m, xr[c]);
        T sum = 0;
        for (int c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - m);
            sum += yr[c];
        }
        for (int c = 0; c < cols; ++c) yr[c] /= sum;
    }
}

inline std::pair<int, int> row_view(const std::vector<int>& shape) {
    if (shape.size() == 1) return {1, shape[0]};
    if (shape.size() == 2) return {shape[0], shape[1]};
    throw DimensionError("expected a rank 1 or rank 2 tensor");
}

}  // namespace detail

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
    auto [rows, cols] = detail::row_view(x.shape());
    std::vector<T> out(x.data().size());
    detail::softmax_rows(rows, cols, x.data().data(), out.data());
    auto px = x.node();
    auto probs = out;  // captured for backward
    return detail::make_op<T>(
        x.shape(), std::move(out), {x}, [px, rows, cols, probs = std::move(probs)](Node<T>& n) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            for (int r = 0; r < rows; ++r) {
                const T* g = n.grad.data() + static_cast<std::ptrdiff_t>(r) * cols;
                const T* p = probs.data() + static_cast<std::ptrdiff_t>(r) * cols;
                T dot = 0;
                for (int c = 0; c < cols; ++c) dot += g[c] * p[c];
                T* dst = px->grad.data() + static_cast<std::ptrdiff_t>(r) * cols;
                for (int c = 0; c < cols; ++c) dst[c] += (g[c] - dot) * p[c];
            }
        });
}

// ---------- losses ----------

/// Mean cross-entropy over the batch, integer labels.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    auto [rows, cols] = detail::row_view(logits.shape());
    if (static_cast<int>(labels.size()) != rows)
        throw DimensionError("cross_entropy: one label per row required");
    for (int lab : labels)
        if (lab < 0 || lab >= cols) throw DomainError("cross_entropy: label out of range");

    std::vector<T> probs(logits.data().size());
    detail::softmax_rows(rows, cols, logits.data().data(), probs.data());
    T loss = 0;
    for (int r = 0; r < rows; ++r) {
        const T p = probs[static_cast<std::size_t>(r) * cols + labels[r]];
        loss -= std::log(std::max(p, std::numeric_limits<T>::min()));
    }
    loss /= static_cast<T>(rows);

    auto px = logits.node();
    std::vector<int> labs(labels.begin(), labels.end());
    return detail::make_op<T>(
        {}, {loss}, {logits},
        [px, rows, cols, probs = std::move(probs), labs = std::move(labs)](Node<T>& n) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            const T g = n.grad[0] / static_cast<T>(rows);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    T v = probs[static_cast<std::size_t>(r) * cols + c];
                    if (c == labs[static_cast<std::size_t>(r)]) v -= T(1);
                    px->grad[static_cast<std::size_t>(r) * cols + c] += g * v;
                }
        });
}

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int label) {
    const int lab[1] = {label};
    return cross_entropy(logits, std::span<const int>(lab, 1));
}

/// Mean KL(targets || softmax(logits)) over the batch. Targets are fixed
/// probability rows (soft labels); rows need not be exactly normalised.
template <class T>
Tensor<T> kl_divergence(const std::vector<T>& targets, const Tensor<T>& logits) {
    auto [rows, cols] = detail::row_view(logits.shape());
    if (targets.size() != logits.data().size())
        throw DimensionError("kl_divergence: target size mismatch");

    std::vector<T> probs(logits.data().size());
    detail::softmax_rows(rows, cols, logits.data().data(), probs.data());
    T loss = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const T p = targets[i];
        if (p > T(0))
            loss += p * (std::log(p) - std::log(std::max(probs[i], std::numeric_limits<T>::min())));
    }
    loss /= static_cast<T>(rows);

    auto px = logits.node();
    return detail::make_op<T>(
        {}, {loss}, {logits},
        [px, rows, cols, probs = std::move(probs), targets](Node<T>& n) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            const T g = n.grad[0] / static_cast<T>(rows);
            for (int r = 0; r < rows; ++r) {
                T psum = 0;
                for (int c = 0; c < cols; ++c)
                    psum += targets[static_cast<std::size_t>(r) * cols + c];
                for (int c = 0; c < cols; ++c) {
                    const std::size_t i = static_cast<std::size_t>(r) * cols + c;
                    px->grad[i] += g * (psum * probs[i] - targets[i]);
                }
            }
        });
}

// ---------- custom ops ----------

/// Scales a vector so its mean square equals P: z * sqrt(d*P) / ||z||.
template <class T>
Tensor<T> power_normalize(const Tensor<T>& z, T power) {
    if (z.rank() != 1) throw DimensionError("power_normalize: expected a vector");
    const int d = z.extent(0);
    T sq = 0;
    for (T v : z.data()) sq += v * v;
    if (sq <= T(0)) throw DomainError("power_normalize: zero vector");
    const T norm = std::sqrt(sq);
    const T factor = std::sqrt(static_cast<T>(d) * power) / norm;
    std::vector<T> out(z.data().begin(), z.data().end());
    for (auto& v : out) v *= factor;
    if (opcount::enabled()) {
        opcount::mul(static_cast<std::uint64_t>(d) * 2 + 1);
        opcount::add(static_cast<std::uint64_t>(d));
        opcount::other(2);  // two square roots
        opcount::div(1);
    }
    auto pz = z.node();
    return detail::make_op<T>(
        z.shape(), std::move(out), {z}, [pz, d, factor, norm](Node<T>& n) {
            if (!pz->requires_grad) return;
            pz->ensure_grad();
            T zdot = 0;
            for (int i = 0; i < d; ++i) zdot += pz->value[static_cast<std::size_t>(i)] * n.grad[static_cast<std::size_t>(i)];
            const T c = zdot / (norm * norm);
            for (int i = 0; i < d; ++i)
                pz->grad[static_cast<std::size_t>(i)] +=
                    factor * (n.grad[static_cast<std::size_t>(i)] - pz->value[static_cast<std::size_t>(i)] * c);
        });
}

/// Rows (i, q) of the output are [x_i || x_j - x_i] for the q-th neighbour j
/// of point i. neighbor_indices is row-major N x k.
template <class T>
Tensor<T> gather_edges(const Tensor<T>& x, const std::vector<int>& neighbor_indices, int k) {
    if (x.rank() != 2) throw DimensionError("gather_edges: features must be rank 2");
    const int n = x.extent(0), f = x.extent(1);
    if (static_cast<int>(neighbor_indices.size()) != n * k)
        throw DimensionError("gather_edges: index count mismatch");
    std::vector<T> out(static_cast<std::size_t>(n) * k * 2 * f);
    kernels::gather_edges(n, k, f, x.data().data(), neighbor_indices.data(), out.data());
    auto px = x.node();
    return detail::make_op<T>(
        {n * k, 2 * f}, std::move(out), {x}, [px, n, k, f, neighbor_indices](Node<T>& nd) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            kernels::scatter_edges(n, k, f, nd.grad.data(), neighbor_indices.data(),
                                   px->grad.data());
        });
}

}  // namespace edgepoint::ad
