// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/data.hpp"
#include "lstnet/model.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lstnet {

/// Time-major prediction/truth container: steps x vars, row-major.
struct EvalMatrix {
    std::size_t steps = 0;
    std::size_t vars = 0;
    std::vector<double> values;

    double& at(std::size_t t, std::size_t i) { return values[t * vars + i]; }
    double at(std::size_t t, std::size_t i) const { return values[t * vars + i]; }
};

/// Root relative squared error over all entries (Table-2 metric, lower is
/// better). Throws NumericError when the truth is globally constant.
double rse(const EvalMatrix& truth, const EvalMatrix& prediction);

struct CorrResult {
    double corr = 0.0;               // mean Pearson over included variables
    std::size_t excluded_vars = 0;   // zero-variance rows skipped
};

/// Mean per-variable Pearson correlation (higher is better). Variables with
/// zero variance in either the truth or the prediction row are excluded and
/// counted; all-excluded throws NumericError.
CorrResult corr(const EvalMatrix& truth, const EvalMatrix& prediction);

enum class MetricScale { normalized, raw };

MetricScale metric_scale_from_string(const std::string& s);
std::string to_string(MetricScale m);

struct EvalReport {
    std::string dataset;
    std::string method;
    std::size_t horizon = 0;
    std::optional<double> rse;   // absent when the truth is degenerate
    std::optional<double> corr;
    std::size_t excluded_vars = 0;
    std::vector<double> per_variable_corr; // NaN-free; excluded vars carry 0
    std::vector<bool> variable_included;
    bool degenerate = false;
    std::string degenerate_reason;
    double runtime_seconds = 0.0;
    std::size_t evaluated_steps = 0;
    MetricScale scale = MetricScale::normalized;
};

/// Anything that maps an input window batch to per-variable predictions.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::vector<double> predict(const WindowBatch& batch) const = 0;
    virtual std::size_t window() const = 0;
    virtual std::string name() const = 0;
};

class NeuralForecaster final : public Forecaster {
public:
    explicit NeuralForecaster(const LstNetModel& model) : model_(&model) {}
    std::vector<double> predict(const WindowBatch& batch) const override {
        return model_->predict(batch);
    }
    std::size_t window() const override { return model_->config().window; }
    std::string name() const override {
        return "lstnet-" + to_string(model_->config().variant);
    }

private:
    const LstNetModel* model_;
};

/// Repeats the last observed value (the trivial baseline an identity AR
/// component induces).
class PersistenceForecaster final : public Forecaster {
public:
    explicit PersistenceForecaster(std::size_t window = 1) : window_(window) {}
    std::vector<double> predict(const WindowBatch& batch) const override;
    std::size_t window() const override { return window_; }
    std::string name() const override { return "persistence"; }

private:
    std::size_t window_;
};

struct RollingEvalOptions {
    std::size_t batch_size = 256;
    MetricScale scale = MetricScale::normalized;
    /// Receives (target_row, variable, truth, prediction) per entry.
    std::function<void(std::size_t, std::size_t, double, double)> trace;
};

/// One prediction per eligible timestamp of the part, inputs drawn strictly
/// from rows at or before each window anchor; metrics over the whole part.
EvalReport rolling_evaluate(const Forecaster& forecaster,
                            const TimeSeriesDataset& dataset,
                            const SplitSpec& split, DatasetPart part,
                            std::size_t horizon,
                            const RollingEvalOptions& options = {});

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

struct GridSpec {
    /// Axis key (a run-config key) with its candidate values, in order.
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::size_t max_configs = 512;

    std::size_t cartesian_size() const;
};

struct GridAssignment {
    std::vector<std::pair<std::string, std::string>> settings;
    std::string key() const; // canonical "k=v,k=v" identity
};

/// Candidate points in lexicographic order of the axes as given, truncated
/// at max_configs (truncated flag set when the cap bites).
std::vector<GridAssignment> enumerate_grid(const GridSpec& spec,
                                           bool* truncated = nullptr);

struct GridOutcome {
    std::optional<double> valid_rse; // absent when the run diverged/failed
    std::size_t parameter_count = 0;
    std::string diagnostics;
    double runtime_seconds = 0.0;
};

struct GridRow {
    GridAssignment assignment;
    GridOutcome outcome;
};

struct GridResult {
    std::vector<GridRow> table;
    std::size_t best_index = 0;
    bool truncated = false;
};

using GridRecipe = std::function<GridOutcome(const GridAssignment&)>;

/// Runs every grid point through the recipe and selects by validation RSE;
/// ties prefer fewer parameters, then earlier (lexicographic) enumeration
/// order. `precomputed` rows (keyed by assignment) are reused, giving
/// resumability. Throws NumericError carrying diagnostics when every run
/// fails.
GridResult grid_search(const GridSpec& spec, const GridRecipe& recipe,
                       const std::vector<GridRow>& precomputed = {},
                       std::ostream* progress = nullptr);

} // namespace lstnet
