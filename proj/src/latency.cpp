#include "edgepoint/latency.hpp"

#include <algorithm>
#include <cmath>

#include "edgepoint/errors.hpp"

namespace edgepoint::latency {

using flops::u64;

std::string to_string(const Strategy& s) {
    switch (s.kind) {
        case StrategyKind::device_only: return "device_only";
        case StrategyKind::edge_only: return "edge_only";
        case StrategyKind::model_split: return "split_after_" + std::to_string(s.index);
        case StrategyKind::branch_exit: return "branch_" + std::to_string(s.index);
    }
    return "unknown";
}

std::uint64_t backbone_prefix_flops(const nn::BackboneConfig& cfg, int depth, int n_points) {
    u64 total = 0;
    int in = 3;
    for (int l = 0; l < depth; ++l) {
        const int out = cfg.layer_widths[static_cast<std::size_t>(l)];
        total += flops::edge_conv(static_cast<u64>(n_points), static_cast<u64>(cfg.k),
                                  static_cast<u64>(in), static_cast<u64>(out));
        in = out;
    }
    return total;
}

std::uint64_t backbone_full_flops(const nn::BackboneConfig& cfg, int n_points) {
    u64 total = backbone_prefix_flops(cfg, static_cast<int>(cfg.layer_widths.size()), n_points);
    u64 concat_width = 0;
    for (int w : cfg.layer_widths) concat_width += static_cast<u64>(w);
    total += flops::readout(static_cast<u64>(n_points), concat_width);
    total += flops::linear(1, 2 * concat_width, static_cast<u64>(cfg.head_hidden), true);
    total += flops::leaky_relu(static_cast<u64>(cfg.head_hidden));
    total += flops::linear(1, static_cast<u64>(cfg.head_hidden),
                           static_cast<u64>(cfg.num_classes), true);
    return total;
}

std::uint64_t branch_device_flops(const nn::BackboneConfig& cfg, const nn::BranchSpec& spec,
                                  int n_points) {
    const int tap_width = cfg.layer_widths[static_cast<std::size_t>(spec.exit_after_layer - 1)];
    u64 total = backbone_prefix_flops(cfg, spec.exit_after_layer, n_points);
    total += flops::pointwise_mlp(static_cast<u64>(n_points), static_cast<u64>(tap_width),
                                  static_cast<u64>(spec.pointwise_width));
    total += flops::readout(static_cast<u64>(n_points), static_cast<u64>(spec.pointwise_width));
    total += flops::linear(1, 2 * static_cast<u64>(spec.pointwise_width),
                           static_cast<u64>(spec.symbol_count), true);
    total += flops::power_normalize(static_cast<u64>(spec.symbol_count));
    return total;
}

std::uint64_t branch_server_flops(const nn::BranchSpec& spec, int num_classes) {
    u64 total = flops::linear(1, static_cast<u64>(spec.symbol_count),
                              static_cast<u64>(spec.server_hidden), true);
    total += flops::leaky_relu(static_cast<u64>(spec.server_hidden));
    total += flops::linear(1, static_cast<u64>(spec.server_hidden),
                           static_cast<u64>(num_classes), true);
    return total;
}

std::uint64_t count_flops(const std::string& kind, const std::vector<long long>& dims) {
    const auto need = [&](std::size_t n) {
        if (dims.size() != n)
            throw ConfigError("count_flops: '" + kind + "' expects " + std::to_string(n) +
                              " dims, got " + std::to_string(dims.size()));
    };
    const auto d = [&](std::size_t i) { return static_cast<u64>(dims[i]); };
    if (kind == "linear") {
        need(4);
        return flops::linear(d(0), d(1), d(2), dims[3] != 0);
    }
    if (kind == "pointwise_mlp") {
        need(3);
        return flops::pointwise_mlp(d(0), d(1), d(2));
    }
    if (kind == "edge_conv") {
        need(4);
        return flops::edge_conv(d(0), d(1), d(2), d(3));
    }
    if (kind == "readout") {
        need(2);
        return flops::readout(d(0), d(1));
    }
    if (kind == "power_normalize") {
        need(1);
        return flops::power_normalize(d(0));
    }
    if (kind == "knn") {
        need(2);
        return flops::pairwise_dist(d(0), d(1));
    }
    throw ConfigError("count_flops: unknown component '" + kind + "'");
}

std::vector<Strategy> all_strategies(int n_layers, int n_branches) {
    std::vector<Strategy> out;
    out.push_back({StrategyKind::device_only, 0});
    out.push_back({StrategyKind::edge_only, 0});
    for (int l = 1; l <= n_layers; ++l) out.push_back({StrategyKind::model_split, l});
    for (int b = 1; b <= n_branches; ++b) out.push_back({StrategyKind::branch_exit, b});
    return out;
}

LatencyReport assess(const Strategy& s, const nn::BackboneConfig& cfg,
                     const std::vector<nn::BranchSpec>& branches, int n_points,
                     const channel::ChannelConfig& ch, const DeviceProfile& profile) {
    if (profile.flops_per_second <= 0) throw ConfigError("device flops_per_second must be > 0");
    LatencyReport r;
    r.strategy = s;
    double server_flops = 0.0;

    switch (s.kind) {
        case StrategyKind::device_only:
            r.on_device_flops = backbone_full_flops(cfg, n_points);
            r.payload_values = 0.0;
            r.payload_description = "none";
            r.comm_latency_s = 0.0;
            break;
        case StrategyKind::edge_only: {
            r.on_device_flops = 0;
            r.payload_values = static_cast<double>(n_points) * 3.0;
            const double bits = r.payload_values * profile.bits_per_raw_value;
            r.payload_description = std::to_string(static_cast<long long>(bits)) + " bits";
            r.comm_latency_s = bits / channel::shannon_capacity(ch);
            server_flops = static_cast<double>(backbone_full_flops(cfg, n_points));
            break;
        }
        case StrategyKind::model_split: {
            if (s.index < 1 || s.index > static_cast<int>(cfg.layer_widths.size()))
                throw ConfigError("model_split: layer index out of range");
            r.on_device_flops = backbone_prefix_flops(cfg, s.index, n_points);
            const int width = cfg.layer_widths[static_cast<std::size_t>(s.index - 1)];
            r.payload_values = static_cast<double>(n_points) * width;
            const double bits = r.payload_values * profile.bits_per_raw_value;
            r.payload_description = std::to_string(static_cast<long long>(bits)) + " bits";
            r.comm_latency_s = bits / channel::shannon_capacity(ch);
            server_flops = static_cast<double>(backbone_full_flops(cfg, n_points) -
                                               backbone_prefix_flops(cfg, s.index, n_points));
            break;
        }
        case StrategyKind::branch_exit: {
            if (s.index < 1 || s.index > static_cast<int>(branches.size()))
                throw ConfigError("branch_exit: branch index out of range");
            const auto& spec = branches[static_cast<std::size_t>(s.index - 1)];
            r.on_device_flops = branch_device_flops(cfg, spec, n_points);
            r.payload_values = static_cast<double>(spec.symbol_count);
            r.payload_description = std::to_string(spec.symbol_count) + " symbols";
            r.comm_latency_s = spec.symbol_count / channel::symbol_rate(ch);
            server_flops = static_cast<double>(branch_server_flops(spec, cfg.num_classes));
            break;
        }
    }

    r.compute_latency_s = static_cast<double>(r.on_device_flops) / profile.flops_per_second;
    if (profile.server_flops_per_second > 0)
        r.compute_latency_s += server_flops / profile.server_flops_per_second;
    r.total_s = r.comm_latency_s + r.compute_latency_s;
    return r;
}

std::vector<LatencyReport> assess_all(const nn::BackboneConfig& cfg,
                                      const std::vector<nn::BranchSpec>& branches, int n_points,
                                      const channel::ChannelConfig& ch,
                                      const DeviceProfile& profile) {
    std::vector<LatencyReport> out;
    for (const auto& s :
         all_strategies(static_cast<int>(cfg.layer_widths.size()), static_cast<int>(branches.size())))
        out.push_back(assess(s, cfg, branches, n_points, ch, profile));
    return out;
}

LatencyReport plan_exit(const nn::BackboneConfig& cfg, const std::vector<nn::BranchSpec>& branches,
                        int n_points, const channel::ChannelConfig& ch,
                        const DeviceProfile& profile,
                        const std::map<std::string, double>& accuracy_table,
                        double accuracy_floor) {
    const LatencyReport* best = nullptr;
    auto reports = assess_all(cfg, branches, n_points, ch, profile);
    for (const auto& r : reports) {
        const auto it = accuracy_table.find(to_string(r.strategy));
        if (it == accuracy_table.end() || !(it->second >= accuracy_floor)) continue;
        if (!best || r.total_s < best->total_s ||
            (r.total_s == best->total_s && r.on_device_flops < best->on_device_flops))
            best = &r;
    }
    if (!best)
        throw PlanningError("no strategy reaches the accuracy floor " +
                            std::to_string(accuracy_floor));
    return *best;
}

std::vector<SweepRow> sweep(const nn::BackboneConfig& cfg,
                            const std::vector<nn::BranchSpec>& branches, int n_points,
                            const channel::ChannelConfig& ch, const DeviceProfile& profile,
                            const std::vector<double>& bandwidth_grid,
                            const std::map<std::string, double>& accuracy_table,
                            double accuracy_floor) {
    std::vector<SweepRow> rows;
    for (double w : bandwidth_grid) {
        channel::ChannelConfig at = ch;
        at.bandwidth_hz = w;
        const LatencyReport chosen =
            plan_exit(cfg, branches, n_points, at, profile, accuracy_table, accuracy_floor);
        for (const auto& r : assess_all(cfg, branches, n_points, at, profile)) {
            SweepRow row;
            row.bandwidth_hz = w;
            row.report = r;
            row.chosen = r.strategy == chosen.strategy;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace edgepoint::latency
