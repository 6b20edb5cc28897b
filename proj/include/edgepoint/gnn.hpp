#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "edgepoint/errors.hpp"
#include "edgepoint/kernels.hpp"
#include "edgepoint/pointcloud.hpp"
#include "edgepoint/rng.hpp"
#include "edgepoint/tensor.hpp"

namespace edgepoint::nn {

template <class T>
using ParamList = std::vector<std::pair<std::string, ad::Tensor<T>>>;

// ---------- kNN graph ----------

/// Row i holds the k nearest neighbours of point i (self excluded),
/// ascending by distance, ties by ascending index.
struct KnnGraph {
    std::vector<int> neighbor_indices;  // row-major n x k
    int n = 0;
    int k = 0;
};

/// Exact Euclidean kNN in the feature space of `features` (rank 2, n x f).
template <class T>
KnnGraph knn_graph(const ad::Tensor<T>& features, int k) {
    if (features.rank() != 2) throw DimensionError("knn_graph: features must be rank 2");
    const int n = features.extent(0), f = features.extent(1);
    if (k < 1 || k >= n) throw ConfigError("knn_graph: need 1 <= k < N");
    std::vector<T> dist(static_cast<std::size_t>(n) * n);
    kernels::pairwise_sqdist(n, f, features.data().data(), dist.data());
    KnnGraph g;
    g.n = n;
    g.k = k;
    g.neighbor_indices.resize(static_cast<std::size_t>(n) * k);
    kernels::knn_select(n, k, dist.data(), g.neighbor_indices.data());
    return g;
}

// ---------- layers ----------

inline constexpr double kLeakySlope = 0.2;

template <class T>
struct LinearLayer {
    ad::Tensor<T> weight;  // (in, out)
    ad::Tensor<T> bias;    // (out)

    static LinearLayer glorot(int in, int out, rng::Xoshiro256& gen) {
        const T bound = static_cast<T>(std::sqrt(6.0 / (in + out)));
        LinearLayer layer;
        layer.weight = ad::Tensor<T>::uniform({in, out}, -bound, bound, gen, true);
        layer.bias = ad::Tensor<T>::uniform({out}, -bound, bound, gen, true);
        return layer;
    }

    int in_width() const { return weight.extent(0); }
    int out_width() const { return weight.extent(1); }

    ad::Tensor<T> operator()(const ad::Tensor<T>& x) const {
        if (x.rank() == 1) {
            auto row = ad::reshape(x, {1, x.extent(0)});
            return ad::reshape(ad::linear(row, weight, bias), {out_width()});
        }
        return ad::linear(x, weight, bias);
    }
};

/// e_ij = LeakyReLU(W [x_i || x_j - x_i] + b), aggregated with max over
/// each point's neighbours. The graph is built by the caller so layers can
/// share or recompute it as the architecture dictates.
template <class T>
struct EdgeConvLayer {
    LinearLayer<T> mlp;  // 2*in -> out

    static EdgeConvLayer init(int in, int out, rng::Xoshiro256& gen) {
        return {LinearLayer<T>::glorot(2 * in, out, gen)};
    }

    int in_width() const { return mlp.in_width() / 2; }
    int out_width() const { return mlp.out_width(); }

    ad::Tensor<T> forward(const ad::Tensor<T>& x, const KnnGraph& g) const {
        if (x.extent(0) != g.n) throw DimensionError("edge_conv: graph size mismatch");
        if (x.extent(1) != in_width()) throw DimensionError("edge_conv: feature width mismatch");
        auto edges = ad::gather_edges(x, g.neighbor_indices, g.k);
        auto h = ad::leaky_relu(mlp(edges), static_cast<T>(kLeakySlope));
        return ad::group_max(h, g.k);
    }
};

/// Permutation-invariant pooling: column means concatenated with column
/// maxima, mapping n x f features to a fixed 2f vector.
template <class T>
ad::Tensor<T> readout(const ad::Tensor<T>& features) {
    if (features.rank() != 2) throw DimensionError("readout: features must be rank 2");
    if (features.extent(0) == 0) throw DomainError("readout: empty cloud");
    auto mean = ad::reduce(features, 0, ad::Reduce::mean);
    auto maxv = ad::reduce(features, 0, ad::Reduce::max);
    return ad::concat<T>({mean, maxv}, 0);
}

// ---------- backbone ----------

struct BackboneConfig {
    std::array<int, 4> layer_widths{32, 32, 32, 64};
    int k = 8;
    int head_hidden = 128;
    int num_classes = 8;
};

/// Four edge-conv layers over dynamically rebuilt kNN graphs, all layer
/// outputs concatenated pointwise, pooled by the readout, classified by a
/// two-layer head. Also returns each layer's feature map for branch taps.
template <class T>
struct Backbone {
    BackboneConfig cfg;
    std::vector<EdgeConvLayer<T>> layers;
    LinearLayer<T> head1, head2;

    static Backbone init(const BackboneConfig& cfg, rng::Xoshiro256& gen) {
        Backbone net;
        net.cfg = cfg;
        int in = 3, concat_width = 0;
        for (int w : cfg.layer_widths) {
            net.layers.push_back(EdgeConvLayer<T>::init(in, w, gen));
            concat_width += w;
            in = w;
        }
        net.head1 = LinearLayer<T>::glorot(2 * concat_width, cfg.head_hidden, gen);
        net.head2 = LinearLayer<T>::glorot(cfg.head_hidden, cfg.num_classes, gen);
        return net;
    }

    struct Forward {
        ad::Tensor<T> logits;
        std::vector<ad::Tensor<T>> taps;  // one n x width map per layer
    };

    Forward forward(const ad::Tensor<T>& points) const {
        if (points.rank() != 2 || points.extent(1) != 3)
            throw DimensionError("backbone: input must be n x 3");
        if (points.extent(0) <= cfg.k)
            throw ConfigError("backbone: need more points than neighbours");
        Forward out;
        ad::Tensor<T> x = points;
        for (const auto& layer : layers) {
            // Graph rebuilt from the current feature space before every layer.
            const KnnGraph g = knn_graph(x, cfg.k);
            x = layer.forward(x, g);
            out.taps.push_back(x);
        }
        auto cat = ad::concat(out.taps, 1);
        auto pooled = readout(cat);
        auto hidden = ad::leaky_relu(head1(pooled), static_cast<T>(kLeakySlope));
        out.logits = head2(hidden);
        return out;
    }

    void collect_parameters(const std::string& prefix, ParamList<T>& out) const {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string base = prefix + ".layer" + std::to_string(l + 1);
            out.emplace_back(base + ".weight", layers[l].mlp.weight);
            out.emplace_back(base + ".bias", layers[l].mlp.bias);
        }
        out.emplace_back(prefix + ".head1.weight", head1.weight);
        out.emplace_back(prefix + ".head1.bias", head1.bias);
        out.emplace_back(prefix + ".head2.weight", head2.weight);
        out.emplace_back(prefix + ".head2.bias", head2.bias);
    }
};

/// Leaf input tensor for a cloud; gradients never flow into coordinates.
template <class T>
ad::Tensor<T> cloud_tensor(const data::PointCloud& cloud) {
    std::vector<T> vals(cloud.points.begin(), cloud.points.end());
    return ad::Tensor<T>::from({cloud.num_points, 3}, std::move(vals));
}

}  // namespace edgepoint::nn
