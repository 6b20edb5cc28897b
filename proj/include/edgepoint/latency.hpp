#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgepoint/branch.hpp"
#include "edgepoint/channel.hpp"
#include "edgepoint/flops.hpp"
#include "edgepoint/gnn.hpp"

namespace edgepoint::latency {

struct DeviceProfile {
    double flops_per_second = 1e9;        // Raspberry-Pi-class default
    int bits_per_raw_value = 32;          // payload width for digital baselines
    double server_flops_per_second = 0.0; // 0 = server compute treated as free
};

enum class StrategyKind { device_only, edge_only, model_split, branch_exit };

struct Strategy {
    StrategyKind kind = StrategyKind::device_only;
    int index = 0;  // split layer or branch exit, 1-based

    bool operator==(const Strategy&) const = default;
};

std::string to_string(const Strategy& s);

struct LatencyReport {
    Strategy strategy;
    std::uint64_t on_device_flops = 0;
    double payload_values = 0.0;  // raw float values (digital) or channel symbols
    std::string payload_description;
    double comm_latency_s = 0.0;
    double compute_latency_s = 0.0;
    double total_s = 0.0;  // always comm + compute
};

// ---------- composite FLOP counts ----------
// These mirror the instrumented forward path exactly; see flops.hpp for the
// conventions and tests/ for the equality check against the op counter.

std::uint64_t backbone_prefix_flops(const nn::BackboneConfig& cfg, int depth, int n_points);
std::uint64_t backbone_full_flops(const nn::BackboneConfig& cfg, int n_points);
std::uint64_t branch_device_flops(const nn::BackboneConfig& cfg, const nn::BranchSpec& spec,
                                  int n_points);
std::uint64_t branch_server_flops(const nn::BranchSpec& spec, int num_classes);

/// String-keyed component cost, for configuration-driven queries.
/// kinds: linear{rows,in,out,bias}, pointwise_mlp{n,in,out},
/// edge_conv{n,k,in,out}, readout{n,f}, power_normalize{d}, knn{n,f}.
/// Unknown kind -> ConfigError.
std::uint64_t count_flops(const std::string& kind, const std::vector<long long>& dims);

// ---------- strategies ----------

std::vector<Strategy> all_strategies(int n_layers, int n_branches);

LatencyReport assess(const Strategy& s, const nn::BackboneConfig& cfg,
                     const std::vector<nn::BranchSpec>& branches, int n_points,
                     const channel::ChannelConfig& ch, const DeviceProfile& profile);

std::vector<LatencyReport> assess_all(const nn::BackboneConfig& cfg,
                                      const std::vector<nn::BranchSpec>& branches, int n_points,
                                      const channel::ChannelConfig& ch,
                                      const DeviceProfile& profile);

/// Minimum-latency strategy among those whose accuracy (keyed by
/// to_string(strategy)) is at least accuracy_floor. Ties break toward less
/// on-device computation. Throws PlanningError when nothing is feasible.
LatencyReport plan_exit(const nn::BackboneConfig& cfg, const std::vector<nn::BranchSpec>& branches,
                        int n_points, const channel::ChannelConfig& ch,
                        const DeviceProfile& profile,
                        const std::map<std::string, double>& accuracy_table,
                        double accuracy_floor);

struct SweepRow {
    double bandwidth_hz = 0.0;
    LatencyReport report;
    bool chosen = false;
};

/// Latency-vs-bandwidth curve data: every strategy assessed at every grid
/// bandwidth, with the planner's pick flagged per grid point.
std::vector<SweepRow> sweep(const nn::BackboneConfig& cfg,
                            const std::vector<nn::BranchSpec>& branches, int n_points,
                            const channel::ChannelConfig& ch, const DeviceProfile& profile,
                            const std::vector<double>& bandwidth_grid,
                            const std::map<std::string, double>& accuracy_table,
                            double accuracy_floor);

}  // namespace edgepoint::latency
