#pragma once

#include <map>
#include <string>
#include <vector>

#include "edgepoint/branch.hpp"
#include "edgepoint/checkpoint.hpp"
#include "edgepoint/gnn.hpp"

namespace edgepoint::nn {

/// Backbone plus its early-exit branches, one per GNN layer by default.
template <class T>
struct Model {
    Backbone<T> backbone;
    std::vector<BranchNet<T>> branches;

    static Model init(const BackboneConfig& cfg, const std::vector<BranchSpec>& specs,
                      std::uint64_t init_seed) {
        rng::Xoshiro256 gen(init_seed);
        Model m;
        m.backbone = Backbone<T>::init(cfg, gen);
        for (const auto& spec : specs) {
            if (spec.exit_after_layer < 1 || spec.exit_after_layer > static_cast<int>(cfg.layer_widths.size()))
                throw ConfigError("branch exit_after_layer out of range");
            const int tap_width = cfg.layer_widths[static_cast<std::size_t>(spec.exit_after_layer - 1)];
            m.branches.push_back(BranchNet<T>::init(spec, tap_width, cfg.num_classes, gen));
        }
        return m;
    }

    ParamList<T> parameters() const {
        ParamList<T> out;
        backbone.collect_parameters("backbone", out);
        for (std::size_t b = 0; b < branches.size(); ++b)
            branches[b].collect_parameters("branch" + std::to_string(b + 1), out);
        return out;
    }

    struct AllLogits {
        ad::Tensor<T> main;
        std::vector<ad::Tensor<T>> branch;
    };

    /// One backbone pass feeding every branch. sigma == 0 keeps the whole
    /// composition deterministic.
    AllLogits forward_all(const ad::Tensor<T>& points, T power, double sigma,
                          rng::Xoshiro256* gen) const {
        auto fwd = backbone.forward(points);
        AllLogits out;
        out.main = fwd.logits;
        for (const auto& br : branches) {
            const auto& tap = fwd.taps[static_cast<std::size_t>(br.spec.exit_after_layer - 1)];
            out.branch.push_back(br.forward(tap, power, sigma, gen));
        }
        return out;
    }

    std::vector<ckpt::Entry> to_entries() const {
        std::vector<ckpt::Entry> entries;
        for (const auto& [name, tensor] : parameters()) {
            ckpt::Entry e;
            e.name = name;
            e.shape = tensor.shape();
            e.values.assign(tensor.data().begin(), tensor.data().end());
            entries.push_back(std::move(e));
        }
        return entries;
    }

    void load_entries(const std::vector<ckpt::Entry>& entries) {
        std::map<std::string, const ckpt::Entry*> by_name;
        for (const auto& e : entries) by_name[e.name] = &e;
        for (auto& [name, tensor] : parameters()) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw DomainError("checkpoint missing parameter " + name);
            const ckpt::Entry& e = *it->second;
            if (e.shape != tensor.shape())
                throw DimensionError("checkpoint shape mismatch for " + name);
            auto dst = tensor.mutable_data();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e.values[i]);
        }
    }
};

}  // namespace edgepoint::nn
