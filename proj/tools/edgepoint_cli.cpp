// Command-line front end: dataset build/inspect, the three-stage training
// run, the robustness sweep and the latency planner.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgepoint/errors.hpp"
#include "edgepoint/experiment.hpp"

namespace {

using edgepoint::config::ExperimentConfig;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "runs/out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Experiment config file (JSON)");
    cmd->add_option("--out", opts.out_dir, "Output directory");
    cmd->add_option("--seed", opts.seed, "Override the experiment seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--paper-scale", opts.paper_scale,
                  "Use the 40-class / 1024-point / 1536-symbol preset");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty())
        cfg = edgepoint::config::load_file(opts.config_path);
    else
        cfg = opts.paper_scale ? edgepoint::config::paper_preset()
                               : edgepoint::config::desk_preset();
    if (opts.seed_set) {
        cfg.seed = opts.seed;
        cfg.dataset.seed = cfg.data_seed();
    }
    return cfg;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            grid.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw edgepoint::ConfigError("bad grid value '" + item + "'");
        }
    }
    if (grid.empty()) throw edgepoint::ConfigError("grid must list at least one value");
    return grid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Early-exit point-cloud GNN with learned channel coding: "
                 "training, robustness and latency planning"};
    app.require_subcommand(1);

    CommonOpts train_opts, robust_opts, latency_opts, data_opts;
    std::string snr_grid_str, bandwidth_grid_str, inspect_path;
    bool untrained = false;

    auto* train_cmd = app.add_subcommand("train", "Run the three training stages");
    add_common(train_cmd, train_opts);

    auto* robust_cmd =
        app.add_subcommand("robustness", "Accuracy-vs-SNR sweep of a trained model");
    add_common(robust_cmd, robust_opts);
    robust_cmd->add_option("--snr-grid", snr_grid_str, "Comma-separated SNR values in dB");

    auto* latency_cmd = app.add_subcommand("latency", "Latency planner sweep");
    add_common(latency_cmd, latency_opts);
    latency_cmd->add_option("--bandwidth-grid", bandwidth_grid_str,
                            "Comma-separated bandwidths in Hz");
    latency_cmd->add_flag("--untrained", untrained,
                          "Plan from structure only, no checkpoint needed");

    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
    dataset_cmd->require_subcommand(1);
    auto* build_cmd = dataset_cmd->add_subcommand("build", "Generate and cache the dataset");
    add_common(build_cmd, data_opts);
    auto* inspect_cmd = dataset_cmd->add_subcommand("inspect", "Summarise a dataset cache");
    inspect_cmd->add_option("--path", inspect_path, "Path to a .epds cache file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train_cmd) {
            const auto cfg = resolve_config(train_opts);
            const auto outcome = edgepoint::exp::cmd_train(cfg, train_opts.out_dir);
            std::printf("stage 1 took %.1f s\n", outcome.stage1_seconds);
            std::printf("main test accuracy: %.4f\n", outcome.final_eval.main_acc);
            for (std::size_t b = 0; b < outcome.final_eval.branch_acc.size(); ++b)
                std::printf("branch %zu test accuracy: %.4f\n", b + 1,
                            outcome.final_eval.branch_acc[b]);
            std::printf("log: %s\n", outcome.log_path.c_str());
        } else if (*robust_cmd) {
            const auto cfg = resolve_config(robust_opts);
            const auto grid = snr_grid_str.empty() ? edgepoint::exp::default_snr_grid()
                                                   : parse_grid(snr_grid_str);
            const auto path = edgepoint::exp::cmd_robustness(cfg, robust_opts.out_dir, grid);
            std::printf("robustness table: %s\n", path.c_str());
        } else if (*latency_cmd) {
            const auto cfg = resolve_config(latency_opts);
            const auto grid = bandwidth_grid_str.empty()
                                  ? edgepoint::exp::default_bandwidth_grid()
                                  : parse_grid(bandwidth_grid_str);
            const auto outcome =
                edgepoint::exp::cmd_latency(cfg, latency_opts.out_dir, grid, untrained);
            std::printf("plane: %s\ncurve: %s\n", outcome.plane_path.c_str(),
                        outcome.curve_path.c_str());
        } else if (*build_cmd) {
            const auto cfg = resolve_config(data_opts);
            edgepoint::exp::cmd_dataset_build(cfg, data_opts.out_dir);
            std::printf("dataset cached under %s\n", data_opts.out_dir.c_str());
        } else if (*inspect_cmd) {
            std::fputs(edgepoint::exp::dataset_inspect_text(inspect_path).c_str(), stdout);
        }
    } catch (const edgepoint::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const edgepoint::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 2;
    } catch (const edgepoint::TrainingError& e) {
        std::fprintf(stderr, "training failed: %s\n", e.what());
        return 3;
    } catch (const edgepoint::ArtifactError& e) {
        std::fprintf(stderr, "missing artifact: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
