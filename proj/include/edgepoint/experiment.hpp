#pragma once

#include <string>
#include <vector>

#include "edgepoint/config.hpp"

namespace edgepoint::exp {

// Orchestration behind the CLI verbs. All outputs are a pure function of
// (config, grids): CSV rows use fixed formatting and deterministic order,
// so identical runs produce byte-identical logs and checkpoints. The run
// manifest (which records wall-clock time) is the one exception.

struct TrainOutcome {
    std::string log_path;
    std::vector<std::string> checkpoint_paths;  // one per stage
    double stage1_seconds = 0.0;
    train::EvalResult final_eval;
};

TrainOutcome cmd_train(const config::ExperimentConfig& cfg, const std::string& out_dir);

/// Evaluates every branch of the final checkpoint at each grid SNR without
/// retraining; writes robustness.csv (branch 0 is the channel-free main exit).
std::string cmd_robustness(const config::ExperimentConfig& cfg, const std::string& out_dir,
                           const std::vector<double>& snr_grid);

struct LatencyOutcome {
    std::string plane_path;
    std::string curve_path;
};

/// Writes the communication-computation plane at the configured channel and
/// the latency-vs-bandwidth curve with the planner's pick per grid point.
/// With untrained=true no checkpoint is needed (structure-only accuracies).
LatencyOutcome cmd_latency(const config::ExperimentConfig& cfg, const std::string& out_dir,
                           const std::vector<double>& bandwidth_grid, bool untrained);

void cmd_dataset_build(const config::ExperimentConfig& cfg, const std::string& out_dir);
std::string dataset_inspect_text(const std::string& cache_path);

// Shared paths and helpers.
std::string checkpoint_path(const std::string& out_dir, int stage);
void write_manifest(const config::ExperimentConfig& cfg, const std::string& out_dir,
                    const std::string& command, double wall_seconds);
std::vector<double> default_snr_grid();
std::vector<double> default_bandwidth_grid();

}  // namespace edgepoint::exp
