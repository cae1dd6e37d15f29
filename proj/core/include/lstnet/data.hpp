// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lstnet {

enum class NormalizeMode { none, per_variable_max };

enum class DatasetPart { train, valid, test, all };

/// Chronological train/valid/test fractions and their resolved row
/// boundaries: train rows [0, train_end), valid [train_end, valid_end),
/// test [valid_end, T).
struct SplitSpec {
    double train_fraction = 0.6;
    double valid_fraction = 0.2;
    double test_fraction = 0.2;

    void validate() const;
    std::size_t train_end(std::size_t rows) const;
    std::size_t valid_end(std::size_t rows) const;
    /// [lo, hi) row range of one part.
    std::pair<std::size_t, std::size_t> part_range(std::size_t rows,
                                                   DatasetPart part) const;
};

/// T x n multivariate series, row = time step, column = variable.
/// Values are stored on the scale they were last normalized to; scale()
/// holds the per-variable factors needed to recover raw values.
class TimeSeriesDataset {
public:
    TimeSeriesDataset() = default;
    TimeSeriesDataset(std::size_t rows, std::size_t vars,
                      std::vector<double> values, std::string name = "",
                      std::string interval = "");

    std::size_t rows() const { return rows_; }
    std::size_t vars() const { return vars_; }
    const std::string& name() const { return name_; }
    const std::string& interval() const { return interval_; }

    double value(std::size_t t, std::size_t i) const {
        return values_[t * vars_ + i];
    }
    double raw_value(std::size_t t, std::size_t i) const {
        return values_[t * vars_ + i] * scale_[i];
    }
    std::span<const double> row(std::size_t t) const {
        return {values_.data() + t * vars_, vars_};
    }
    std::span<const double> values() const { return values_; }
    std::span<const double> scale() const { return scale_; }
    NormalizeMode normalize_mode() const { return mode_; }

    /// Divides each variable by its max absolute value over the training
    /// rows of `split` (factor 1 for all-zero variables). Factors are
    /// recorded for checkpointing and raw-scale metrics. Mode none resets
    /// factors to 1. Applying max mode twice is rejected.
    void normalize(NormalizeMode mode, const SplitSpec& split);

    /// Inverse of normalize: restores raw values and unit factors.
    void denormalize();

    /// Restores a normalization state loaded from a checkpoint.
    void set_scale(NormalizeMode mode, std::vector<double> factors);

    /// One variable as a contiguous copy.
    std::vector<double> variable(std::size_t i) const;

private:
    std::size_t rows_ = 0;
    std::size_t vars_ = 0;
    std::vector<double> values_;
    std::vector<double> scale_;
    NormalizeMode mode_ = NormalizeMode::none;
    std::string name_;
    std::string interval_;
};

/// Parses delimited text: one time step per row, one variable per column,
/// no header. Throws DataError naming the offending row/column on ragged or
/// unparseable input.
TimeSeriesDataset load_dataset(const std::filesystem::path& path,
                               char delimiter = ',');

/// One supervised pair: input window of the q rows ending at `anchor`
/// (inclusive), target row anchor + horizon.
struct WindowSample {
    std::size_t anchor = 0;
    std::size_t window = 0;
    std::size_t horizon = 0;
    std::vector<double> input;  // q x n, time ascending, row-major
    std::vector<double> target; // n
};

/// Anchor indices of every admissible window for one dataset part. Targets
/// stay inside the part; input context may reach back into earlier rows
/// (rolling forecasting). Empty when the part is too short - not an error.
std::vector<std::size_t> window_anchors(std::size_t rows, std::size_t window,
                                        std::size_t horizon,
                                        const SplitSpec& split,
                                        DatasetPart part);

WindowSample materialize_window(const TimeSeriesDataset& ds, std::size_t anchor,
                                std::size_t window, std::size_t horizon);

/// A batch of windows packed for model consumption.
///   inputs:  batch-major, sample s, time step t (ascending), variable i at
///            s*window*vars + t*vars + i
///   targets: s*vars + i
struct WindowBatch {
    std::size_t batch = 0;
    std::size_t window = 0;
    std::size_t vars = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
    std::vector<std::size_t> anchors;

    double input_at(std::size_t s, std::size_t t, std::size_t i) const {
        return inputs[(s * window + t) * vars + i];
    }
};

WindowBatch make_batch(const TimeSeriesDataset& ds,
                       std::span<const std::size_t> anchors, std::size_t window,
                       std::size_t horizon);

/// Sample autocorrelation R(0..max_lag): lag-tau covariance with the 1/(N-tau)
/// unbiased factor over the lag-0 sample variance, so R(0) = 1 exactly.
/// Throws DataError on zero variance or max_lag >= length.
std::vector<double> autocorrelation(std::span<const double> series,
                                    std::size_t max_lag);

struct ScaleShiftSeries {
    std::vector<double> values;
    std::vector<double> weights; // generating AR coefficients
};

/// Synthetic AR(order) process whose Gaussian noise mean steps up by mu0
/// every `period` emitted samples: eps_t ~ N(floor(t/period)*mu0, 1).
/// Weights are drawn N(0,1) unless overridden. The first 10*order generated
/// samples are burn-in and discarded; the shift schedule starts at the first
/// emitted sample. Deterministic per seed.
ScaleShiftSeries generate_scale_shift_ar(
    std::size_t order, std::size_t period, double mu0, std::size_t length,
    std::uint64_t seed,
    std::optional<std::vector<double>> weights_override = std::nullopt);

} // namespace lstnet
