#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <unordered_map>
#include <vector>

#include "edgepoint/channel.hpp"
#include "edgepoint/errors.hpp"
#include "edgepoint/model.hpp"
#include "edgepoint/pointcloud.hpp"

namespace edgepoint::train {

struct TrainingPlan {
    std::array<int, 3> epochs{30, 30, 10};
    std::array<double, 3> learning_rates{0.01, 0.01, 0.001};
    int batch_size = 16;
    double soft_label_temperature = 2.0;
    double soft_label_mix = 0.5;  // weight of the distillation term in stage 2
    double momentum = 0.9;
    double train_snr_db = 20.0;
    // Step size drops by decay_factor after decay_fraction of a stage's
    // epochs; 1.0 disables the schedule.
    double lr_decay_fraction = 0.75;
    double lr_decay_factor = 0.1;
    // Stage 1 stops early once test accuracy reaches this level (0 = off).
    double stage1_target_accuracy = 0.0;

    double stage_lr(int stage, int epoch) const {
        const double base = learning_rates[static_cast<std::size_t>(stage - 1)];
        const int total = epochs[static_cast<std::size_t>(stage - 1)];
        if (lr_decay_factor >= 1.0) return base;
        const int cutover = static_cast<int>(lr_decay_fraction * total);
        return epoch > cutover ? base * lr_decay_factor : base;
    }
};

// Stream tags under the channel seed.
inline constexpr std::uint64_t kTrainNoise = 11;
inline constexpr std::uint64_t kEvalNoise = 12;
// Stream tags under the data seed.
inline constexpr std::uint64_t kShuffle = 21;
inline constexpr std::uint64_t kInit = 22;

template <class T>
int argmax_index(std::span<const T> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    return best;
}

/// Stable softmax of logits / temperature, as plain values (soft labels).
template <class T>
std::vector<T> soften(std::span<const T> logits, double temperature) {
    std::vector<T> out(logits.size());
    T m = logits[0] / static_cast<T>(temperature);
    for (std::size_t i = 0; i < logits.size(); ++i)
        m = std::max(m, logits[i] / static_cast<T>(temperature));
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] / static_cast<T>(temperature) - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

template <class T>
class SgdMomentum {
  public:
    explicit SgdMomentum(double momentum) : mu_(static_cast<T>(momentum)) {}

    /// v = mu*v + grad_scale*g; p -= lr*v. Skips parameters without grads.
    void step(const nn::ParamList<T>& params, double lr, double grad_scale) {
        for (const auto& [name, tensor] : params) {
            if (!tensor.requires_grad() || !tensor.has_grad()) continue;
            auto& vel = velocity_[tensor.node().get()];
            auto grad = tensor.grad();
            if (vel.size() != grad.size()) vel.assign(grad.size(), T(0));
            auto data = const_cast<ad::Tensor<T>&>(tensor).mutable_data();
            for (std::size_t i = 0; i < grad.size(); ++i) {
                vel[i] = mu_ * vel[i] + static_cast<T>(grad_scale) * grad[i];
                data[i] -= static_cast<T>(lr) * vel[i];
            }
        }
    }

    static void zero_grad(const nn::ParamList<T>& params) {
        for (const auto& [name, tensor] : params) const_cast<ad::Tensor<T>&>(tensor).zero_grad();
    }

  private:
    T mu_;
    std::unordered_map<const ad::Node<T>*, std::vector<T>> velocity_;
};

struct EpochRow {
    int stage = 0;
    int epoch = 0;  // 1-based within the stage
    double loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::vector<double> branch_test_acc;
};

// ---------- evaluation ----------

/// Noise stream for one evaluation draw. Keyed by the cloud id rather than
/// its position so the robustness sweep reproduces training-time numbers.
inline std::uint64_t eval_noise_seed(std::uint64_t channel_seed, double snr_db,
                                     std::uint64_t cloud_id, int branch, int repeat) {
    std::uint64_t snr_bits;
    static_assert(sizeof(snr_bits) == sizeof(snr_db));
    std::memcpy(&snr_bits, &snr_db, sizeof(snr_bits));
    return rng::derive(channel_seed, kEvalNoise, snr_bits, cloud_id,
                       static_cast<std::uint64_t>(branch), static_cast<std::uint64_t>(repeat));
}

struct EvalResult {
    double main_acc = 0.0;
    std::vector<double> branch_acc;
};

/// Test-set accuracy of the main exit and every branch at the given SNR.
/// Branch decisions are averaged over `repeats` independent noise draws.
template <class T>
EvalResult evaluate_model(const nn::Model<T>& model,
                          const std::vector<data::PointCloud>& clouds, double power,
                          double snr_db, std::uint64_t channel_seed, int repeats) {
    ad::NoGradGuard no_grad;
    const double sigma = std::sqrt(channel::noise_variance(snr_db, power));
    EvalResult result;
    result.branch_acc.assign(model.branches.size(), 0.0);
    if (clouds.empty()) return result;

    long main_correct = 0;
    std::vector<double> branch_correct(model.branches.size(), 0.0);
    for (const auto& cloud : clouds) {
        auto pts = nn::cloud_tensor<T>(cloud);
        auto fwd = model.backbone.forward(pts);
        if (argmax_index<T>(fwd.logits.data()) == cloud.label) ++main_correct;
        for (std::size_t b = 0; b < model.branches.size(); ++b) {
            const auto& branch = model.branches[b];
            const auto& tap = fwd.taps[static_cast<std::size_t>(branch.spec.exit_after_layer - 1)];
            const int reps = sigma > 0.0 ? repeats : 1;
            for (int r = 0; r < reps; ++r) {
                rng::Xoshiro256 gen(
                    eval_noise_seed(channel_seed, snr_db, cloud.id, static_cast<int>(b), r));
                auto logits = branch.forward(tap, static_cast<T>(power), sigma, &gen);
                if (argmax_index<T>(logits.data()) == cloud.label)
                    branch_correct[b] += 1.0 / reps;
            }
        }
    }
    result.main_acc = static_cast<double>(main_correct) / static_cast<double>(clouds.size());
    for (std::size_t b = 0; b < branch_correct.size(); ++b)
        result.branch_acc[b] = branch_correct[b] / static_cast<double>(clouds.size());
    return result;
}

// ---------- the three-stage procedure ----------

template <class T>
class Trainer {
  public:
    Trainer(nn::Model<T>& model, const data::Dataset& dataset, const TrainingPlan& plan,
            const channel::ChannelConfig& ch, std::uint64_t data_seed, std::uint64_t channel_seed,
            int eval_repeats = 3)
        : model_(model),
          dataset_(dataset),
          plan_(plan),
          channel_(ch),
          data_seed_(data_seed),
          channel_seed_(channel_seed),
          eval_repeats_(eval_repeats) {}

    /// Stage 1: the main branch alone, hard-label cross-entropy.
    void run_stage_main() {
        require_stage(1);
        const auto t0 = std::chrono::steady_clock::now();
        nn::ParamList<T> params;
        model_.backbone.collect_parameters("backbone", params);
        SgdMomentum<T> opt(plan_.momentum);

        for (int epoch = 1; epoch <= plan_.epochs[0]; ++epoch) {
            double loss_sum = 0.0;
            long correct = 0, total = 0;
            for_each_batch(1, epoch, [&](std::span<const int> batch) {
                SgdMomentum<T>::zero_grad(params);
                for (int idx : batch) {
                    const auto& cloud = dataset_.train[static_cast<std::size_t>(idx)];
                    auto fwd = model_.backbone.forward(nn::cloud_tensor<T>(cloud));
                    auto loss = ad::cross_entropy(fwd.logits, cloud.label);
                    loss.backward();
                    loss_sum += loss.item();
                    correct += argmax_index<T>(fwd.logits.data()) == cloud.label;
                    ++total;
                }
                opt.step(params, plan_.stage_lr(1, epoch), 1.0 / static_cast<double>(batch.size()));
            });
            finish_epoch(1, epoch, loss_sum / static_cast<double>(total),
                         static_cast<double>(correct) / static_cast<double>(total));
            if (plan_.stage1_target_accuracy > 0.0 &&
                history_.back().test_acc >= plan_.stage1_target_accuracy)
                break;
        }
        stages_done_ = 1;
        stage_seconds_[0] = seconds_since(t0);
    }

    /// Stage 2: branches against a frozen backbone, hard labels mixed with
    /// soft labels distilled from the main exit. Channel noise at the
    /// training SNR is drawn fresh on every forward pass.
    void run_stage_branches() {
        require_stage(2);
        const auto t0 = std::chrono::steady_clock::now();
        freeze_backbone(true);

        // The frozen backbone makes tap features constant; compute them once.
        std::vector<std::vector<ad::Tensor<T>>> taps;
        std::vector<std::vector<T>> main_logits;
        {
            ad::NoGradGuard no_grad;
            taps.reserve(dataset_.train.size());
            for (const auto& cloud : dataset_.train) {
                auto fwd = model_.backbone.forward(nn::cloud_tensor<T>(cloud));
                taps.push_back(std::move(fwd.taps));
                main_logits.emplace_back(fwd.logits.data().begin(), fwd.logits.data().end());
            }
        }

        nn::ParamList<T> params;
        for (std::size_t b = 0; b < model_.branches.size(); ++b)
            model_.branches[b].collect_parameters("branch" + std::to_string(b + 1), params);
        SgdMomentum<T> opt(plan_.momentum);

        const double sigma = train_sigma();
        const double mix = plan_.soft_label_mix;
        const double temp = plan_.soft_label_temperature;

        for (int epoch = 1; epoch <= plan_.epochs[1]; ++epoch) {
            double loss_sum = 0.0;
            long total = 0;
            for_each_batch(2, epoch, [&](std::span<const int> batch) {
                SgdMomentum<T>::zero_grad(params);
                for (int idx : batch) {
                    const auto& cloud = dataset_.train[static_cast<std::size_t>(idx)];
                    const auto targets =
                        soften<T>(main_logits[static_cast<std::size_t>(idx)], temp);
                    for (std::size_t b = 0; b < model_.branches.size(); ++b) {
                        const auto& branch = model_.branches[b];
                        rng::Xoshiro256 gen(train_noise_seed(2, epoch, cloud.id, static_cast<int>(b)));
                        const auto& tap =
                            taps[static_cast<std::size_t>(idx)]
                                [static_cast<std::size_t>(branch.spec.exit_after_layer - 1)];
                        auto logits =
                            branch.forward(tap, static_cast<T>(channel_.power), sigma, &gen);
                        auto hard = ad::cross_entropy(logits, cloud.label);
                        auto soft = ad::kl_divergence(
                            targets, ad::scale(logits, static_cast<T>(1.0 / temp)));
                        auto loss = ad::add(ad::scale(hard, static_cast<T>(1.0 - mix)),
                                            ad::scale(soft, static_cast<T>(mix)));
                        loss.backward();
                        loss_sum += loss.item();
                    }
                    ++total;
                }
                opt.step(params, plan_.stage_lr(2, epoch), 1.0 / static_cast<double>(batch.size()));
            });
            finish_epoch(2, epoch, loss_sum / static_cast<double>(total), 0.0);
        }
        stages_done_ = 2;
        stage_seconds_[1] = seconds_since(t0);
    }

    /// Stage 3: everything trainable, objective = sum of per-exit
    /// cross-entropies (main exit included).
    void run_stage_finetune() {
        require_stage(3);
        const auto t0 = std::chrono::steady_clock::now();
        freeze_backbone(false);
        auto params = model_.parameters();
        SgdMomentum<T> opt(plan_.momentum);
        const double sigma = train_sigma();

        for (int epoch = 1; epoch <= plan_.epochs[2]; ++epoch) {
            double loss_sum = 0.0;
            long correct = 0, total = 0;
            for_each_batch(3, epoch, [&](std::span<const int> batch) {
                SgdMomentum<T>::zero_grad(params);
                for (int idx : batch) {
                    const auto& cloud = dataset_.train[static_cast<std::size_t>(idx)];
                    auto fwd = model_.backbone.forward(nn::cloud_tensor<T>(cloud));
                    auto loss = ad::cross_entropy(fwd.logits, cloud.label);
                    for (std::size_t b = 0; b < model_.branches.size(); ++b) {
                        const auto& branch = model_.branches[b];
                        rng::Xoshiro256 gen(train_noise_seed(3, epoch, cloud.id, static_cast<int>(b)));
                        const auto& tap =
                            fwd.taps[static_cast<std::size_t>(branch.spec.exit_after_layer - 1)];
                        auto logits =
                            branch.forward(tap, static_cast<T>(channel_.power), sigma, &gen);
                        loss = ad::add(loss, ad::cross_entropy(logits, cloud.label));
                    }
                    loss.backward();
                    loss_sum += loss.item();
                    correct += argmax_index<T>(fwd.logits.data()) == cloud.label;
                    ++total;
                }
                opt.step(params, plan_.stage_lr(3, epoch), 1.0 / static_cast<double>(batch.size()));
            });
            finish_epoch(3, epoch, loss_sum / static_cast<double>(total),
                         static_cast<double>(correct) / static_cast<double>(total));
        }
        stages_done_ = 3;
        stage_seconds_[2] = seconds_since(t0);
    }

    const std::vector<EpochRow>& history() const { return history_; }
    int completed_stages() const { return stages_done_; }
    double stage_seconds(int stage) const { return stage_seconds_[static_cast<std::size_t>(stage - 1)]; }

  private:
    void require_stage(int stage) {
        if (stages_done_ != stage - 1)
            throw DomainError("training stages must run in order; stage " +
                              std::to_string(stage) + " after " + std::to_string(stages_done_));
    }

    double train_sigma() const {
        return std::sqrt(channel::noise_variance(plan_.train_snr_db, channel_.power));
    }

    std::uint64_t train_noise_seed(int stage, int epoch, std::uint64_t cloud_id, int branch) const {
        return rng::derive(channel_seed_, kTrainNoise, static_cast<std::uint64_t>(stage),
                           static_cast<std::uint64_t>(epoch), cloud_id,
                           static_cast<std::uint64_t>(branch));
    }

    void freeze_backbone(bool frozen) {
        nn::ParamList<T> params;
        model_.backbone.collect_parameters("backbone", params);
        for (auto& [name, tensor] : params) {
            auto t = tensor;
            t.zero_grad();
            t.set_requires_grad(!frozen);
        }
    }

    template <class Fn>
    void for_each_batch(int stage, int epoch, Fn&& fn) {
        std::vector<int> order(dataset_.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng::Xoshiro256 gen(rng::derive(data_seed_, kShuffle, static_cast<std::uint64_t>(stage),
                                        static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[gen.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(plan_.batch_size)) {
            const std::size_t len =
                std::min(static_cast<std::size_t>(plan_.batch_size), order.size() - start);
            fn(std::span<const int>(order.data() + start, len));
        }
    }

    void finish_epoch(int stage, int epoch, double mean_loss, double train_acc) {
        if (!std::isfinite(mean_loss))
            throw TrainingError(epoch, "stage " + std::to_string(stage) + " loss is not finite");
        // Branches are untrained during stage 1; one noise draw is plenty.
        const int reps = stage == 1 ? 1 : eval_repeats_;
        auto eval = evaluate_model(model_, dataset_.test, channel_.power, plan_.train_snr_db,
                                   channel_seed_, reps);
        EpochRow row;
        row.stage = stage;
        row.epoch = epoch;
        row.loss = mean_loss;
        row.train_acc = train_acc;
        row.test_acc = eval.main_acc;
        row.branch_test_acc = eval.branch_acc;
        history_.push_back(std::move(row));
    }

    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    nn::Model<T>& model_;
    const data::Dataset& dataset_;
    TrainingPlan plan_;
    channel::ChannelConfig channel_;
    std::uint64_t data_seed_;
    std::uint64_t channel_seed_;
    int eval_repeats_;
    int stages_done_ = 0;
    std::array<double, 3> stage_seconds_{0, 0, 0};
    std::vector<EpochRow> history_;
};

}  // namespace edgepoint::train
