// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/data.hpp"
#include "lstnet/eval.hpp"
#include "lstnet/model.hpp"
#include "lstnet/tensor.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace lstnet {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers shape-match their parameters;
/// non-finite gradients abort with diagnostics naming the parameter index.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, AdamConfig config = {});

    /// Applies one update from the gradients currently on the parameters.
    /// Parameters without a gradient (never touched by backward) are left
    /// unchanged.
    void step();
    void zero_grad();
    std::size_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }

private:
    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Tensor> params_;
    std::vector<Slot> slots_;
    AdamConfig config_;
    std::size_t step_ = 0;
};

/// Plain theta <- theta - lr * g.
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<Tensor> params, double lr);
    void step();
    void zero_grad();

private:
    std::vector<Tensor> params_;
    double lr_;
};

struct TrainSchedule {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::size_t patience = 10;
    double lr = 1e-3;
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 10.0;
    double ar_l2 = 0.0;
    std::string optimizer = "adam"; // adam | sgd
    MetricScale valid_scale = MetricScale::normalized;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0; // summed over the epoch's samples
    double valid_rse = 0.0;
    double valid_corr = 0.0;
    double seconds = 0.0;
};

struct TrainRun {
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
    double best_valid_rse = 0.0;
    std::string stop_reason; // "patience" | "epoch_cap"
    /// Snapshot of the best-validation parameters, aligned with the model's
    /// named_parameters(); also restored onto the model before returning.
    std::vector<std::vector<double>> best_parameters;
};

/// Mini-batch training on the train part with per-epoch validation on the
/// valid part; window indices reshuffled each epoch from `seed`, model
/// restored to its best-validation parameters at the end. Deterministic for
/// fixed (seed, config, data). The optional log gets one tab-separated line
/// per epoch: epoch, train_loss, valid_rse, valid_corr, seconds.
TrainRun train(LstNetModel& model, const TimeSeriesDataset& dataset,
               const SplitSpec& split, const TrainSchedule& schedule,
               std::uint64_t seed, std::ostream* log = nullptr);

} // namespace lstnet
