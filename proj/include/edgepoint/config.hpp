#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgepoint/branch.hpp"
#include "edgepoint/channel.hpp"
#include "edgepoint/gnn.hpp"
#include "edgepoint/latency.hpp"
#include "edgepoint/pointcloud.hpp"
#include "edgepoint/training.hpp"

namespace edgepoint::config {

/// Everything a run depends on. A run is a pure function of this record:
/// the two RNG streams (data, channel) are derived from the single seed.
struct ExperimentConfig {
    std::uint64_t seed = 7;
    data::DatasetSpec dataset;
    nn::BackboneConfig backbone;
    std::vector<nn::BranchSpec> branches;
    channel::ChannelConfig channel;
    train::TrainingPlan training;
    latency::DeviceProfile device;
    double accuracy_floor = 0.0;
    int eval_repeats = 3;

    std::uint64_t data_seed() const { return rng::derive(seed, rng::kDataStream); }
    std::uint64_t channel_seed() const { return rng::derive(seed, rng::kChannelStream); }
    std::uint64_t init_seed() const { return rng::derive(data_seed(), train::kInit); }
};

/// 8 classes, 256 points, trains on a laptop CPU in minutes.
ExperimentConfig desk_preset();

/// 40 classes (8 families x 5 variants), 1024 points, wide layers, the
/// 1536/1024/512/128 symbol ladder.
ExperimentConfig paper_preset();

/// Strict parse: unknown or missing required keys raise ConfigError naming
/// the full field path. `seed` and `dataset.classes` are required, the rest
/// default from desk_preset-independent struct defaults.
ExperimentConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

ExperimentConfig load_file(const std::string& path);

/// FNV-1a over the canonical serialisation.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace edgepoint::config
