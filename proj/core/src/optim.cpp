// SPDX-License-Identifier: Apache-2.0
#include "lstnet/optim.hpp"

#include "lstnet/errors.hpp"
#include "lstnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace lstnet {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        slots_[i].m.assign(params_[i].numel(), 0.0);
        slots_[i].v.assign(params_[i].numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor& t = params_[p];
        if (!t.has_grad()) continue;
        auto g = t.grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                std::ostringstream os;
                os << "adam: non-finite gradient at parameter " << p
                   << ", element " << i << " (step " << step_ << ")";
                throw NumericError(os.str());
            }
        }
        auto& slot = slots_[p];
        auto values = t.values_mut();
        for (std::size_t i = 0; i < g.size(); ++i) {
            slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g[i];
            slot.v[i] =
                config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = slot.m[i] / bc1;
            const double v_hat = slot.v[i] / bc2;
            values[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Tensor& t : params_) t.zero_grad();
}

SgdOptimizer::SgdOptimizer(std::vector<Tensor> params, double lr)
    : params_(std::move(params)), lr_(lr) {}

void SgdOptimizer::step() {
    for (Tensor& t : params_) {
        if (!t.has_grad()) continue;
        auto g = t.grad();
        auto values = t.values_mut();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("sgd: non-finite gradient");
            }
            values[i] -= lr_ * g[i];
        }
    }
}

void SgdOptimizer::zero_grad() {
    for (Tensor& t : params_) t.zero_grad();
}

namespace {

/// Scales gradients so their global L2 norm does not exceed max_norm.
void clip_global_norm(std::vector<Tensor> params, double max_norm) {
    double sq = 0.0;
    for (const Tensor& t : params) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double factor = max_norm / norm;
    for (Tensor& t : params) {
        if (!t.has_grad()) continue;
        for (double& g : t.grad_mut()) g *= factor;
    }
}

std::vector<std::vector<double>> snapshot(const LstNetModel& model) {
    std::vector<std::vector<double>> out;
    out.reserve(model.named_parameters().size());
    for (const auto& [name, t] : model.named_parameters()) {
        out.emplace_back(t.values().begin(), t.values().end());
    }
    return out;
}

void restore(LstNetModel& model, const std::vector<std::vector<double>>& snap) {
    const auto& named = model.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
        model.load_parameter(named[i].first, named[i].second.shape(), snap[i]);
    }
}

} // namespace

TrainRun train(LstNetModel& model, const TimeSeriesDataset& dataset,
               const SplitSpec& split, const TrainSchedule& schedule,
               std::uint64_t seed, std::ostream* log) {
    if (schedule.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (schedule.epochs == 0) throw ConfigError("epochs must be >= 1");
    const LstNetConfig& cfg = model.config();

    auto train_anchors = window_anchors(dataset.rows(), cfg.window, cfg.horizon,
                                        split, DatasetPart::train);
    if (train_anchors.empty()) {
        throw DataError("training split yields no windows (q=" +
                        std::to_string(cfg.window) + ", h=" +
                        std::to_string(cfg.horizon) + ")");
    }
    auto valid_anchors = window_anchors(dataset.rows(), cfg.window, cfg.horizon,
                                        split, DatasetPart::valid);
    if (valid_anchors.empty()) {
        throw DataError("validation split yields no windows");
    }

    const bool use_adam = schedule.optimizer == "adam";
    if (!use_adam && schedule.optimizer != "sgd") {
        throw ConfigError("unknown optimizer '" + schedule.optimizer + "'");
    }
    AdamOptimizer adam(model.parameters(), AdamConfig{.lr = schedule.lr});
    SgdOptimizer sgd(model.parameters(), schedule.lr);

    std::mt19937_64 shuffle_rng(seed);
    std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);

    NeuralForecaster forecaster(model);
    RollingEvalOptions valid_opts;
    valid_opts.scale = schedule.valid_scale;

    TrainRun run;
    run.best_valid_rse = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train_anchors);
    for (std::size_t epoch = 1; epoch <= schedule.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size();
             begin += schedule.batch_size) {
            const std::size_t end =
                std::min(order.size(), begin + schedule.batch_size);
            std::span<const std::size_t> chunk(order.data() + begin,
                                               end - begin);
            WindowBatch batch = make_batch(dataset, chunk, cfg.window,
                                           cfg.horizon);
            Tensor target = Tensor::from_values({batch.batch, batch.vars},
                                                batch.targets);
            if (use_adam) {
                adam.zero_grad();
            } else {
                sgd.zero_grad();
            }
            try {
                Tensor pred = model.forward(batch, /*training=*/true,
                                            dropout_rng);
                Tensor loss = compute_loss(cfg.loss, pred, target);
                if (schedule.ar_l2 > 0.0) {
                    loss = add(loss, l2_regularize_ar(model, schedule.ar_l2));
                }
                const double loss_value = loss.value();
                if (!std::isfinite(loss_value)) {
                    throw NumericError("non-finite loss");
                }
                epoch_loss += loss_value;
                backward(loss);
                if (schedule.clip_norm > 0.0) {
                    clip_global_norm(model.parameters(), schedule.clip_norm);
                }
                if (use_adam) {
                    adam.step();
                } else {
                    sgd.step();
                }
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " +
                                   std::to_string(epoch) + ": " + e.what());
            }
        }

        EvalReport valid = rolling_evaluate(forecaster, dataset, split,
                                            DatasetPart::valid, cfg.horizon,
                                            valid_opts);
        if (valid.degenerate || !valid.rse) {
            throw NumericError("validation metric degenerate: " +
                               valid.degenerate_reason);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss;
        stats.valid_rse = *valid.rse;
        stats.valid_corr = valid.corr.value_or(0.0);
        stats.seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        run.history.push_back(stats);
        if (log) {
            (*log) << epoch << '\t' << stats.train_loss << '\t'
                   << stats.valid_rse << '\t' << stats.valid_corr << '\t'
                   << stats.seconds << '\n';
            log->flush();
        }

        if (stats.valid_rse < run.best_valid_rse) {
            run.best_valid_rse = stats.valid_rse;
            run.best_epoch = epoch;
            run.best_parameters = snapshot(model);
            since_best = 0;
        } else {
            ++since_best;
            if (schedule.patience > 0 && since_best >= schedule.patience) {
                run.stop_reason = "patience";
                break;
            }
        }
    }
    if (run.stop_reason.empty()) run.stop_reason = "epoch_cap";
    if (!run.best_parameters.empty()) restore(model, run.best_parameters);
    return run;
}

} // namespace lstnet
