#include "edgepoint/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "edgepoint/errors.hpp"

namespace edgepoint::config {

using nlohmann::json;

namespace {

/// Wraps a JSON object and refuses keys outside the declared set.
class StrictObject {
  public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
    }

    ~StrictObject() = default;

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key))
                throw ConfigError("config: unknown key '" + join(key) + "'");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key))
            throw ConfigError("config: missing required field '" + join(key) + "'");
        return j_.at(key);
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config: bad value for '" + join(key) + "': " + e.what());
        }
    }

    const json* sub(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_dataset(const json& j, data::DatasetSpec& spec) {
    StrictObject o(j, "dataset");
    spec.classes = o.require("classes").get<std::vector<std::string>>();
    o.get("samples_per_class", spec.samples_per_class);
    o.get("test_per_class", spec.test_per_class);
    o.get("points_per_cloud", spec.points_per_cloud);
    o.get("noise_sigma", spec.noise_sigma);
    o.finish();
}

void parse_backbone(const json& j, nn::BackboneConfig& cfg) {
    StrictObject o(j, "backbone");
    if (o.has("layer_widths")) {
        auto widths = o.require("layer_widths").get<std::vector<int>>();
        if (widths.size() != cfg.layer_widths.size())
            throw ConfigError("config: backbone.layer_widths must list " +
                              std::to_string(cfg.layer_widths.size()) + " widths");
        std::copy(widths.begin(), widths.end(), cfg.layer_widths.begin());
    }
    o.get("k", cfg.k);
    o.get("head_hidden", cfg.head_hidden);
    o.finish();
}

nn::BranchSpec parse_branch(const json& j, int index) {
    StrictObject o(j, "branches[" + std::to_string(index) + "]");
    nn::BranchSpec spec;
    spec.exit_after_layer = o.require("exit_after_layer").get<int>();
    spec.symbol_count = o.require("symbol_count").get<int>();
    o.get("pointwise_width", spec.pointwise_width);
    o.get("server_hidden", spec.server_hidden);
    o.finish();
    return spec;
}

void parse_channel(const json& j, channel::ChannelConfig& cfg) {
    StrictObject o(j, "channel");
    o.get("snr_db", cfg.snr_db);
    o.get("bandwidth_hz", cfg.bandwidth_hz);
    o.get("power", cfg.power);
    o.finish();
    if (cfg.bandwidth_hz <= 0) throw ConfigError("config: channel.bandwidth_hz must be > 0");
    if (cfg.power <= 0) throw ConfigError("config: channel.power must be > 0");
}

void parse_training(const json& j, train::TrainingPlan& plan) {
    StrictObject o(j, "training");
    if (o.has("epochs")) {
        auto epochs = o.require("epochs").get<std::vector<int>>();
        if (epochs.size() != 3) throw ConfigError("config: training.epochs must list 3 stages");
        std::copy(epochs.begin(), epochs.end(), plan.epochs.begin());
    }
    if (o.has("learning_rates")) {
        auto rates = o.require("learning_rates").get<std::vector<double>>();
        if (rates.size() != 3)
            throw ConfigError("config: training.learning_rates must list 3 stages");
        std::copy(rates.begin(), rates.end(), plan.learning_rates.begin());
    }
    o.get("batch_size", plan.batch_size);
    o.get("soft_label_temperature", plan.soft_label_temperature);
    o.get("soft_label_mix", plan.soft_label_mix);
    o.get("momentum", plan.momentum);
    o.get("train_snr_db", plan.train_snr_db);
    o.get("lr_decay_fraction", plan.lr_decay_fraction);
    o.get("lr_decay_factor", plan.lr_decay_factor);
    o.get("stage1_target_accuracy", plan.stage1_target_accuracy);
    o.finish();
}

void parse_device(const json& j, latency::DeviceProfile& profile) {
    StrictObject o(j, "device");
    o.get("flops_per_second", profile.flops_per_second);
    o.get("bits_per_raw_value", profile.bits_per_raw_value);
    o.get("server_flops_per_second", profile.server_flops_per_second);
    o.finish();
    if (profile.flops_per_second <= 0)
        throw ConfigError("config: device.flops_per_second must be > 0");
}

}  // namespace

ExperimentConfig desk_preset() {
    ExperimentConfig cfg;
    cfg.dataset.classes = data::shape_families();
    cfg.branches = nn::desk_branch_specs();
    cfg.backbone.num_classes = static_cast<int>(cfg.dataset.classes.size());
    cfg.dataset.seed = cfg.data_seed();
    return cfg;
}

ExperimentConfig paper_preset() {
    ExperimentConfig cfg;
    cfg.dataset.classes.clear();
    for (const auto& family : data::shape_families())
        for (int v = 0; v < 5; ++v) cfg.dataset.classes.push_back(family + ":" + std::to_string(v));
    cfg.dataset.points_per_cloud = 1024;
    cfg.backbone.layer_widths = {64, 64, 64, 128};
    cfg.backbone.k = 20;
    cfg.backbone.num_classes = static_cast<int>(cfg.dataset.classes.size());
    cfg.branches = nn::paper_branch_specs();
    cfg.dataset.seed = cfg.data_seed();
    return cfg;
}

ExperimentConfig from_json(const json& j) {
    ExperimentConfig cfg;
    StrictObject o(j, "");
    cfg.seed = o.require("seed").get<std::uint64_t>();
    parse_dataset(o.require("dataset"), cfg.dataset);
    if (const json* b = o.sub("backbone")) parse_backbone(*b, cfg.backbone);
    if (const json* br = o.sub("branches")) {
        if (!br->is_array()) throw ConfigError("config: 'branches' must be an array");
        cfg.branches.clear();
        int i = 0;
        for (const auto& item : *br) cfg.branches.push_back(parse_branch(item, i++));
    } else {
        cfg.branches = nn::desk_branch_specs();
    }
    if (const json* c = o.sub("channel")) parse_channel(*c, cfg.channel);
    if (const json* t = o.sub("training")) parse_training(*t, cfg.training);
    if (const json* d = o.sub("device")) parse_device(*d, cfg.device);
    if (const json* p = o.sub("planner")) {
        StrictObject po(*p, "planner");
        po.get("accuracy_floor", cfg.accuracy_floor);
        po.finish();
    }
    o.get("eval_repeats", cfg.eval_repeats);
    o.finish();

    cfg.backbone.num_classes = static_cast<int>(cfg.dataset.classes.size());
    cfg.dataset.seed = cfg.data_seed();
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["dataset"] = {{"classes", cfg.dataset.classes},
                    {"samples_per_class", cfg.dataset.samples_per_class},
                    {"test_per_class", cfg.dataset.test_per_class},
                    {"points_per_cloud", cfg.dataset.points_per_cloud},
                    {"noise_sigma", cfg.dataset.noise_sigma}};
    j["backbone"] = {{"layer_widths", cfg.backbone.layer_widths},
                     {"k", cfg.backbone.k},
                     {"head_hidden", cfg.backbone.head_hidden}};
    j["branches"] = json::array();
    for (const auto& b : cfg.branches)
        j["branches"].push_back({{"exit_after_layer", b.exit_after_layer},
                                 {"pointwise_width", b.pointwise_width},
                                 {"symbol_count", b.symbol_count},
                                 {"server_hidden", b.server_hidden}});
    j["channel"] = {{"snr_db", cfg.channel.snr_db},
                    {"bandwidth_hz", cfg.channel.bandwidth_hz},
                    {"power", cfg.channel.power}};
    j["training"] = {{"epochs", cfg.training.epochs},
                     {"learning_rates", cfg.training.learning_rates},
                     {"batch_size", cfg.training.batch_size},
                     {"soft_label_temperature", cfg.training.soft_label_temperature},
                     {"soft_label_mix", cfg.training.soft_label_mix},
                     {"momentum", cfg.training.momentum},
                     {"train_snr_db", cfg.training.train_snr_db},
                     {"lr_decay_fraction", cfg.training.lr_decay_fraction},
                     {"lr_decay_factor", cfg.training.lr_decay_factor},
                     {"stage1_target_accuracy", cfg.training.stage1_target_accuracy}};
    j["device"] = {{"flops_per_second", cfg.device.flops_per_second},
                   {"bits_per_raw_value", cfg.device.bits_per_raw_value},
                   {"server_flops_per_second", cfg.device.server_flops_per_second}};
    j["planner"] = {{"accuracy_floor", cfg.accuracy_floor}};
    j["eval_repeats"] = cfg.eval_repeats;
    return j;
}

ExperimentConfig load_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
    std::ifstream is(path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse failure in " + path + ": " + e.what());
    }
    return from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string dump = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace edgepoint::config
