#include "edgepoint/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "edgepoint/checkpoint.hpp"
#include "edgepoint/errors.hpp"
#include "edgepoint/latency.hpp"
#include "edgepoint/model.hpp"
#include "edgepoint/training.hpp"

namespace edgepoint::exp {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string acc_str(double v) { return fmt("%.6f", v); }
std::string latency_str(double v) { return fmt("%.9g", v); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ArtifactError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ArtifactError("cannot open output file: " + path);
    return os;
}

nn::Model<float> build_model(const config::ExperimentConfig& cfg) {
    return nn::Model<float>::init(cfg.backbone, cfg.branches, cfg.init_seed());
}

nn::Model<float> load_final_model(const config::ExperimentConfig& cfg,
                                  const std::string& out_dir) {
    auto model = build_model(cfg);
    model.load_entries(ckpt::load(checkpoint_path(out_dir, 3)));
    return model;
}

/// Backbone taps for a fixed cloud list, computed once and reused across
/// SNR grid points.
struct TapCache {
    std::vector<std::vector<ad::Tensor<float>>> taps;
    std::vector<int> labels;
    std::vector<std::uint64_t> ids;
    double main_acc = 0.0;
};

TapCache build_tap_cache(const nn::Model<float>& model,
                         const std::vector<data::PointCloud>& clouds) {
    ad::NoGradGuard no_grad;
    TapCache cache;
    long correct = 0;
    for (const auto& cloud : clouds) {
        auto fwd = model.backbone.forward(nn::cloud_tensor<float>(cloud));
        correct += train::argmax_index<float>(fwd.logits.data()) == cloud.label;
        cache.taps.push_back(std::move(fwd.taps));
        cache.labels.push_back(cloud.label);
        cache.ids.push_back(cloud.id);
    }
    cache.main_acc = clouds.empty() ? 0.0 : static_cast<double>(correct) / clouds.size();
    return cache;
}

double branch_accuracy(const nn::Model<float>& model, const TapCache& cache, int branch,
                       double snr_db, double power, std::uint64_t channel_seed, int repeats) {
    ad::NoGradGuard no_grad;
    const auto& net = model.branches[static_cast<std::size_t>(branch)];
    const double sigma = std::sqrt(channel::noise_variance(snr_db, power));
    const int reps = sigma > 0.0 ? repeats : 1;
    double correct = 0.0;
    for (std::size_t i = 0; i < cache.taps.size(); ++i) {
        const auto& tap =
            cache.taps[i][static_cast<std::size_t>(net.spec.exit_after_layer - 1)];
        for (int r = 0; r < reps; ++r) {
            rng::Xoshiro256 gen(
                train::eval_noise_seed(channel_seed, snr_db, cache.ids[i], branch, r));
            auto logits = net.forward(tap, static_cast<float>(power), sigma, &gen);
            if (train::argmax_index<float>(logits.data()) == cache.labels[i])
                correct += 1.0 / reps;
        }
    }
    return cache.taps.empty() ? 0.0 : correct / static_cast<double>(cache.taps.size());
}

std::map<std::string, double> accuracy_table(const config::ExperimentConfig& cfg,
                                             const nn::Model<float>& model,
                                             const std::vector<data::PointCloud>& test_clouds) {
    const TapCache cache = build_tap_cache(model, test_clouds);
    std::map<std::string, double> table;
    for (const auto& s : latency::all_strategies(static_cast<int>(cfg.backbone.layer_widths.size()),
                                                 static_cast<int>(cfg.branches.size()))) {
        if (s.kind == latency::StrategyKind::branch_exit)
            table[latency::to_string(s)] =
                branch_accuracy(model, cache, s.index - 1, cfg.channel.snr_db, cfg.channel.power,
                                cfg.channel_seed(), cfg.eval_repeats);
        else
            // Digital baselines run the unmodified network; at capacity rate
            // the transfer is reliable, so they share the main-exit accuracy.
            table[latency::to_string(s)] = cache.main_acc;
    }
    return table;
}

std::map<std::string, double> untrained_table(const config::ExperimentConfig& cfg) {
    std::map<std::string, double> table;
    for (const auto& s : latency::all_strategies(static_cast<int>(cfg.backbone.layer_widths.size()),
                                                 static_cast<int>(cfg.branches.size())))
        table[latency::to_string(s)] = 1.0;
    return table;
}

}  // namespace

std::string checkpoint_path(const std::string& out_dir, int stage) {
    return out_dir + "/stage" + std::to_string(stage) + ".ckpt";
}

void write_manifest(const config::ExperimentConfig& cfg, const std::string& out_dir,
                    const std::string& command, double wall_seconds) {
    nlohmann::json j;
    j["command"] = command;
    j["config_hash"] = config::config_hash(cfg);
    j["config"] = config::to_json(cfg);
    j["wall_clock_s"] = wall_seconds;
    auto os = open_out(out_dir + "/manifest_" + command + ".json");
    os << j.dump(2) << "\n";
}

std::vector<double> default_snr_grid() { return {-5, 0, 5, 10, 15, 20, 30}; }

std::vector<double> default_bandwidth_grid() {
    // 20 log-spaced points over [100 Hz, 1 MHz].
    std::vector<double> grid;
    for (int i = 0; i < 20; ++i)
        grid.push_back(std::pow(10.0, 2.0 + 4.0 * static_cast<double>(i) / 19.0));
    return grid;
}

TrainOutcome cmd_train(const config::ExperimentConfig& cfg, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dir(out_dir);
    const data::Dataset dataset = data::generate_synthetic(cfg.dataset);
    auto model = build_model(cfg);
    train::Trainer<float> trainer(model, dataset, cfg.training, cfg.channel, cfg.data_seed(),
                                  cfg.channel_seed(), cfg.eval_repeats);

    TrainOutcome outcome;
    trainer.run_stage_main();
    ckpt::save(checkpoint_path(out_dir, 1), model.to_entries());
    trainer.run_stage_branches();
    ckpt::save(checkpoint_path(out_dir, 2), model.to_entries());
    trainer.run_stage_finetune();
    ckpt::save(checkpoint_path(out_dir, 3), model.to_entries());
    for (int s = 1; s <= 3; ++s) outcome.checkpoint_paths.push_back(checkpoint_path(out_dir, s));
    outcome.stage1_seconds = trainer.stage_seconds(1);

    outcome.log_path = out_dir + "/training_log.csv";
    {
        auto os = open_out(outcome.log_path);
        os << "stage,epoch,loss,main_train_acc,main_test_acc";
        for (std::size_t b = 1; b <= cfg.branches.size(); ++b) os << ",branch" << b << "_test_acc";
        os << "\n";
        for (const auto& row : trainer.history()) {
            os << row.stage << "," << row.epoch << "," << acc_str(row.loss) << ","
               << acc_str(row.train_acc) << "," << acc_str(row.test_acc);
            for (double acc : row.branch_test_acc) os << "," << acc_str(acc);
            os << "\n";
        }
    }

    outcome.final_eval = train::evaluate_model(model, dataset.test, cfg.channel.power,
                                               cfg.training.train_snr_db, cfg.channel_seed(),
                                               cfg.eval_repeats);
    write_manifest(cfg, out_dir, "train",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return outcome;
}

std::string cmd_robustness(const config::ExperimentConfig& cfg, const std::string& out_dir,
                           const std::vector<double>& snr_grid) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dir(out_dir);
    auto model = load_final_model(cfg, out_dir);
    const data::Dataset dataset = data::generate_synthetic(cfg.dataset);
    const TapCache cache = build_tap_cache(model, dataset.test);

    const std::string path = out_dir + "/robustness.csv";
    auto os = open_out(path);
    os << "branch,snr_db,accuracy\n";
    for (double snr : snr_grid) {
        os << "0," << fmt("%.6g", snr) << "," << acc_str(cache.main_acc) << "\n";
        for (std::size_t b = 0; b < model.branches.size(); ++b) {
            const double acc = branch_accuracy(model, cache, static_cast<int>(b), snr,
                                               cfg.channel.power, cfg.channel_seed(),
                                               cfg.eval_repeats);
            os << (b + 1) << "," << fmt("%.6g", snr) << "," << acc_str(acc) << "\n";
        }
    }
    write_manifest(cfg, out_dir, "robustness",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return path;
}

LatencyOutcome cmd_latency(const config::ExperimentConfig& cfg, const std::string& out_dir,
                           const std::vector<double>& bandwidth_grid, bool untrained) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dir(out_dir);
    std::map<std::string, double> table;
    if (untrained) {
        table = untrained_table(cfg);
    } else {
        auto model = load_final_model(cfg, out_dir);
        const data::Dataset dataset = data::generate_synthetic(cfg.dataset);
        table = accuracy_table(cfg, model, dataset.test);
    }

    const int n = cfg.dataset.points_per_cloud;
    LatencyOutcome outcome;
    outcome.plane_path = out_dir + "/comm_comp_plane.csv";
    {
        auto os = open_out(outcome.plane_path);
        os << "strategy,on_device_flops,payload_values,payload,comm_latency_s,"
              "compute_latency_s,total_s,accuracy\n";
        for (const auto& r :
             latency::assess_all(cfg.backbone, cfg.branches, n, cfg.channel, cfg.device)) {
            const std::string name = latency::to_string(r.strategy);
            os << name << "," << r.on_device_flops << "," << fmt("%.6g", r.payload_values) << ","
               << r.payload_description << "," << latency_str(r.comm_latency_s) << ","
               << latency_str(r.compute_latency_s) << "," << latency_str(r.total_s) << ","
               << acc_str(table.count(name) ? table.at(name) : 0.0) << "\n";
        }
    }

    outcome.curve_path = out_dir + "/latency_vs_bandwidth.csv";
    {
        auto os = open_out(outcome.curve_path);
        os << "bandwidth_hz,strategy,comm_latency_s,compute_latency_s,total_s,chosen\n";
        for (const auto& row : latency::sweep(cfg.backbone, cfg.branches, n, cfg.channel,
                                              cfg.device, bandwidth_grid, table,
                                              cfg.accuracy_floor)) {
            os << fmt("%.6g", row.bandwidth_hz) << "," << latency::to_string(row.report.strategy)
               << "," << latency_str(row.report.comm_latency_s) << ","
               << latency_str(row.report.compute_latency_s) << ","
               << latency_str(row.report.total_s) << "," << (row.chosen ? 1 : 0) << "\n";
        }
    }
    write_manifest(cfg, out_dir, "latency",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return outcome;
}

void cmd_dataset_build(const config::ExperimentConfig& cfg, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dir(out_dir);
    const data::Dataset dataset = data::generate_synthetic(cfg.dataset);
    data::save_cache(out_dir + "/train.epds", dataset.train);
    data::save_cache(out_dir + "/test.epds", dataset.test);
    write_manifest(cfg, out_dir, "dataset",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string dataset_inspect_text(const std::string& cache_path) {
    const auto clouds = data::load_cache(cache_path);
    std::map<int, int> per_label;
    double worst_norm = 0.0, worst_centroid = 0.0;
    for (const auto& c : clouds) {
        per_label[c.label]++;
        double cx = 0, cy = 0, cz = 0, max_sq = 0;
        for (int p = 0; p < c.num_points; ++p) {
            const double x = c.points[static_cast<std::size_t>(p) * 3];
            const double y = c.points[static_cast<std::size_t>(p) * 3 + 1];
            const double z = c.points[static_cast<std::size_t>(p) * 3 + 2];
            cx += x;
            cy += y;
            cz += z;
            max_sq = std::max(max_sq, x * x + y * y + z * z);
        }
        const double inv = c.num_points > 0 ? 1.0 / c.num_points : 0.0;
        worst_centroid = std::max(
            worst_centroid, std::sqrt(cx * cx + cy * cy + cz * cz) * inv);
        worst_norm = std::max(worst_norm, std::sqrt(max_sq));
    }
    std::string text = "samples: " + std::to_string(clouds.size()) + "\n";
    text += "points_per_cloud: " +
            std::to_string(clouds.empty() ? 0 : clouds.front().num_points) + "\n";
    for (const auto& [label, count] : per_label)
        text += "label " + std::to_string(label) + ": " + std::to_string(count) + " samples\n";
    text += "max_point_norm: " + fmt("%.8f", worst_norm) + "\n";
    text += "max_centroid_norm: " + fmt("%.3e", worst_centroid) + "\n";
    return text;
}

}  // namespace edgepoint::exp
