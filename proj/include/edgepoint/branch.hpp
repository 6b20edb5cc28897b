#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "edgepoint/channel.hpp"
#include "edgepoint/gnn.hpp"
#include "edgepoint/tensor.hpp"

namespace edgepoint::nn {

/// Per-exit configuration. symbol_count is the transmitted feature
/// dimension d_b; across the default branch set it strictly decreases as
/// the exit moves deeper.
struct BranchSpec {
    int exit_after_layer = 1;  // 1..4
    int pointwise_width = 64;
    int symbol_count = 384;
    int server_hidden = 128;
};

inline std::vector<BranchSpec> desk_branch_specs() {
    return {{1, 64, 384, 128}, {2, 64, 256, 128}, {3, 64, 128, 128}, {4, 64, 32, 128}};
}

inline std::vector<BranchSpec> paper_branch_specs() {
    return {{1, 256, 1536, 128}, {2, 256, 1024, 128}, {3, 256, 512, 128}, {4, 256, 128, 128}};
}

/// Early-exit branch: pointwise MLP -> mean||max readout -> linear encoder
/// with power normalisation (the device side), then a fully connected
/// decoder/classifier (the server side). No point-cloud reconstruction
/// anywhere; the server consumes the received symbols directly.
template <class T>
struct BranchNet {
    BranchSpec spec;
    LinearLayer<T> pointwise;  // tap_width -> pointwise_width
    LinearLayer<T> encoder;    // 2*pointwise_width -> symbol_count
    LinearLayer<T> dec1;       // symbol_count -> server_hidden
    LinearLayer<T> dec2;       // server_hidden -> num_classes

    // Encoder outputs with zero norm cannot be power-normalised; the
    // trainable encoder bias makes this a measure-zero event. If it does
    // happen we transmit zeros and count the occurrence.
    mutable long zero_symbol_events = 0;

    static BranchNet init(const BranchSpec& spec, int tap_width, int num_classes,
                          rng::Xoshiro256& gen) {
        if (spec.symbol_count <= 0) throw ConfigError("branch: symbol_count must be > 0");
        BranchNet net;
        net.spec = spec;
        net.pointwise = LinearLayer<T>::glorot(tap_width, spec.pointwise_width, gen);
        net.encoder = LinearLayer<T>::glorot(2 * spec.pointwise_width, spec.symbol_count, gen);
        net.dec1 = LinearLayer<T>::glorot(spec.symbol_count, spec.server_hidden, gen);
        net.dec2 = LinearLayer<T>::glorot(spec.server_hidden, num_classes, gen);
        return net;
    }

    /// Device side: tap features to power-normalised channel symbols.
    ad::Tensor<T> encode(const ad::Tensor<T>& tap, T power) const {
        auto features = ad::leaky_relu(pointwise(tap), static_cast<T>(kLeakySlope));
        auto pooled = readout(features);
        auto symbols = encoder(pooled);
        T sq = 0;
        for (T v : symbols.data()) sq += v * v;
        if (!(sq > T(0))) {
            ++zero_symbol_events;
            return symbols;  // all zeros already
        }
        return ad::power_normalize(symbols, power);
    }

    /// Server side: received symbols to class logits.
    ad::Tensor<T> decode(const ad::Tensor<T>& received) const {
        if (received.rank() != 1 || received.extent(0) != spec.symbol_count)
            throw DimensionError("branch decode: symbol count mismatch");
        return dec2(ad::leaky_relu(dec1(received), static_cast<T>(kLeakySlope)));
    }

    /// Full device-channel-server path. sigma == 0 bypasses the noise draw,
    /// making the composition deterministic and equal to decode(encode(.)).
    ad::Tensor<T> forward(const ad::Tensor<T>& tap, T power, double sigma,
                          rng::Xoshiro256* gen) const {
        auto symbols = encode(tap, power);
        if (sigma > 0.0) {
            std::vector<T> noise(static_cast<std::size_t>(spec.symbol_count));
            for (auto& v : noise) v = static_cast<T>(sigma * gen->gaussian());
            symbols = ad::add_constant(symbols, noise);
        }
        return decode(symbols);
    }

    void collect_parameters(const std::string& prefix, ParamList<T>& out) const {
        out.emplace_back(prefix + ".pointwise.weight", pointwise.weight);
        out.emplace_back(prefix + ".pointwise.bias", pointwise.bias);
        out.emplace_back(prefix + ".encoder.weight", encoder.weight);
        out.emplace_back(prefix + ".encoder.bias", encoder.bias);
        out.emplace_back(prefix + ".decoder1.weight", dec1.weight);
        out.emplace_back(prefix + ".decoder1.bias", dec1.bias);
        out.emplace_back(prefix + ".decoder2.weight", dec2.weight);
        out.emplace_back(prefix + ".decoder2.bias", dec2.bias);
    }
};

}  // namespace edgepoint::nn
