// SPDX-License-Identifier: Apache-2.0
#include "lstnet/eval.hpp"

#include "lstnet/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace lstnet {

namespace {

void check_same_dims(const EvalMatrix& a, const EvalMatrix& b,
                     const char* what) {
    if (a.steps != b.steps || a.vars != b.vars) {
        throw ShapeError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.steps) + "x" + std::to_string(a.vars) +
                         " vs " + std::to_string(b.steps) + "x" +
                         std::to_string(b.vars) + ")");
    }
    if (a.values.size() != a.steps * a.vars ||
        b.values.size() != b.steps * b.vars) {
        throw ShapeError(std::string(what) + ": malformed EvalMatrix");
    }
}

} // namespace

double rse(const EvalMatrix& truth, const EvalMatrix& prediction) {
    check_same_dims(truth, prediction, "rse");
    if (truth.values.empty()) throw ShapeError("rse: empty matrices");
    double mean = 0.0;
    for (double v : truth.values) mean += v;
    mean /= static_cast<double>(truth.values.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
        const double e = truth.values[i] - prediction.values[i];
        num += e * e;
        const double d = truth.values[i] - mean;
        den += d * d;
    }
    if (den == 0.0) {
        throw NumericError("rse: truth is globally constant (zero denominator)");
    }
    return std::sqrt(num) / std::sqrt(den);
}

CorrResult corr(const EvalMatrix& truth, const EvalMatrix& prediction) {
    check_same_dims(truth, prediction, "corr");
    const std::size_t n = truth.vars;
    const std::size_t steps = truth.steps;
    if (steps == 0 || n == 0) throw ShapeError("corr: empty matrices");
    CorrResult result;
    double acc = 0.0;
    std::size_t included = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double my = 0.0, mp = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            my += truth.at(t, i);
            mp += prediction.at(t, i);
        }
        my /= static_cast<double>(steps);
        mp /= static_cast<double>(steps);
        double num = 0.0, vy = 0.0, vp = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double dy = truth.at(t, i) - my;
            const double dp = prediction.at(t, i) - mp;
            num += dy * dp;
            vy += dy * dy;
            vp += dp * dp;
        }
        if (vy == 0.0 || vp == 0.0) {
            ++result.excluded_vars;
            continue;
        }
        acc += num / std::sqrt(vy * vp);
        ++included;
    }
    if (included == 0) {
        throw NumericError("corr: every variable has zero variance");
    }
    result.corr = acc / static_cast<double>(included);
    return result;
}

MetricScale metric_scale_from_string(const std::string& s) {
    if (s == "normalized") return MetricScale::normalized;
    if (s == "raw") return MetricScale::raw;
    throw ConfigError("unknown metric scale '" + s +
                      "' (expected normalized|raw)");
}

std::string to_string(MetricScale m) {
    return m == MetricScale::normalized ? "normalized" : "raw";
}

std::vector<double> PersistenceForecaster::predict(const WindowBatch& batch) const {
    std::vector<double> out(batch.batch * batch.vars);
    for (std::size_t s = 0; s < batch.batch; ++s) {
        for (std::size_t i = 0; i < batch.vars; ++i) {
            out[s * batch.vars + i] = batch.input_at(s, batch.window - 1, i);
        }
    }
    return out;
}

EvalReport rolling_evaluate(const Forecaster& forecaster,
                            const TimeSeriesDataset& dataset,
                            const SplitSpec& split, DatasetPart part,
                            std::size_t horizon,
                            const RollingEvalOptions& options) {
    const auto start_time = std::chrono::steady_clock::now();
    const std::size_t q = forecaster.window();
    auto anchors = window_anchors(dataset.rows(), q, horizon, split, part);
    if (anchors.empty()) {
        throw DataError("rolling_evaluate: part has no evaluable timestamps "
                        "for window " + std::to_string(q) + " and horizon " +
                        std::to_string(horizon));
    }

    EvalMatrix truth{anchors.size(), dataset.vars(), {}};
    EvalMatrix pred{anchors.size(), dataset.vars(), {}};
    truth.values.resize(anchors.size() * dataset.vars());
    pred.values.resize(anchors.size() * dataset.vars());

    const std::size_t bs = std::max<std::size_t>(1, options.batch_size);
    for (std::size_t begin = 0; begin < anchors.size(); begin += bs) {
        const std::size_t end = std::min(anchors.size(), begin + bs);
        std::span<const std::size_t> chunk(anchors.data() + begin, end - begin);
        WindowBatch batch = make_batch(dataset, chunk, q, horizon);
        std::vector<double> yhat = forecaster.predict(batch);
        if (yhat.size() != batch.batch * batch.vars) {
            throw ShapeError("rolling_evaluate: forecaster returned " +
                             std::to_string(yhat.size()) + " values, expected " +
                             std::to_string(batch.batch * batch.vars));
        }
        for (std::size_t s = 0; s < batch.batch; ++s) {
            const std::size_t row = begin + s;
            for (std::size_t i = 0; i < dataset.vars(); ++i) {
                truth.at(row, i) = batch.targets[s * batch.vars + i];
                pred.at(row, i) = yhat[s * batch.vars + i];
            }
        }
    }

    if (options.scale == MetricScale::raw) {
        auto scale = dataset.scale();
        for (std::size_t t = 0; t < truth.steps; ++t) {
            for (std::size_t i = 0; i < truth.vars; ++i) {
                truth.at(t, i) *= scale[i];
                pred.at(t, i) *= scale[i];
            }
        }
    }

    if (options.trace) {
        for (std::size_t t = 0; t < anchors.size(); ++t) {
            const std::size_t target_row = anchors[t] + horizon;
            for (std::size_t i = 0; i < dataset.vars(); ++i) {
                options.trace(target_row, i, truth.at(t, i), pred.at(t, i));
            }
        }
    }

    EvalReport report;
    report.dataset = dataset.name();
    report.method = forecaster.name();
    report.horizon = horizon;
    report.scale = options.scale;
    report.evaluated_steps = anchors.size();

    try {
        report.rse = rse(truth, pred);
    } catch (const NumericError& e) {
        report.degenerate = true;
        report.degenerate_reason = e.what();
    }
    report.per_variable_corr.assign(dataset.vars(), 0.0);
    report.variable_included.assign(dataset.vars(), false);
    if (!report.degenerate) {
        // A fully-excluded corr (constant predictions) is not fatal: rse is
        // still meaningful, so only the corr field stays empty.
        try {
            CorrResult c = corr(truth, pred);
            report.corr = c.corr;
            report.excluded_vars = c.excluded_vars;
        } catch (const NumericError&) {
            report.excluded_vars = dataset.vars();
        }
    }
    // Per-variable diagnostics (independent of the aggregate above).
    for (std::size_t i = 0; i < dataset.vars(); ++i) {
        double my = 0.0, mp = 0.0;
        for (std::size_t t = 0; t < truth.steps; ++t) {
            my += truth.at(t, i);
            mp += pred.at(t, i);
        }
        my /= static_cast<double>(truth.steps);
        mp /= static_cast<double>(truth.steps);
        double num = 0.0, vy = 0.0, vp = 0.0;
        for (std::size_t t = 0; t < truth.steps; ++t) {
            const double dy = truth.at(t, i) - my;
            const double dp = pred.at(t, i) - mp;
            num += dy * dp;
            vy += dy * dy;
            vp += dp * dp;
        }
        if (vy > 0.0 && vp > 0.0) {
            report.per_variable_corr[i] = num / std::sqrt(vy * vp);
            report.variable_included[i] = true;
        }
    }

    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_time)
            .count();
    return report;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

std::size_t GridSpec::cartesian_size() const {
    std::size_t total = 1;
    for (const auto& [key, values] : axes) {
        if (values.empty()) {
            throw ConfigError("grid axis '" + key + "' has no values");
        }
        total *= values.size();
    }
    return axes.empty() ? 0 : total;
}

std::string GridAssignment::key() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < settings.size(); ++i) {
        if (i) os << ',';
        os << settings[i].first << '=' << settings[i].second;
    }
    return os.str();
}

std::vector<GridAssignment> enumerate_grid(const GridSpec& spec,
                                           bool* truncated) {
    if (spec.axes.empty()) {
        throw ConfigError("grid search needs at least one axis");
    }
    const std::size_t total = spec.cartesian_size();
    const std::size_t cap = std::min(total, spec.max_configs);
    if (truncated) *truncated = cap < total;

    std::vector<GridAssignment> out;
    out.reserve(cap);
    std::vector<std::size_t> idx(spec.axes.size(), 0);
    for (std::size_t c = 0; c < cap; ++c) {
        GridAssignment a;
        a.settings.reserve(spec.axes.size());
        for (std::size_t d = 0; d < spec.axes.size(); ++d) {
            a.settings.emplace_back(spec.axes[d].first,
                                    spec.axes[d].second[idx[d]]);
        }
        out.push_back(std::move(a));
        // odometer increment, last axis fastest
        for (std::size_t d = spec.axes.size(); d-- > 0;) {
            if (++idx[d] < spec.axes[d].second.size()) break;
            idx[d] = 0;
        }
    }
    return out;
}

GridResult grid_search(const GridSpec& spec, const GridRecipe& recipe,
                       const std::vector<GridRow>& precomputed,
                       std::ostream* progress) {
    bool truncated = false;
    auto assignments = enumerate_grid(spec, &truncated);

    GridResult result;
    result.truncated = truncated;
    result.table.reserve(assignments.size());

    for (std::size_t c = 0; c < assignments.size(); ++c) {
        const GridAssignment& a = assignments[c];
        const std::string key = a.key();
        const GridRow* cached = nullptr;
        for (const GridRow& row : precomputed) {
            if (row.assignment.key() == key) {
                cached = &row;
                break;
            }
        }
        GridRow row;
        row.assignment = a;
        if (cached) {
            row.outcome = cached->outcome;
        } else {
            row.outcome = recipe(a);
        }
        if (progress) {
            (*progress) << "[grid " << (c + 1) << "/" << assignments.size()
                        << "] " << key << " -> "
                        << (row.outcome.valid_rse
                                ? std::to_string(*row.outcome.valid_rse)
                                : "failed: " + row.outcome.diagnostics)
                        << (cached ? " (resumed)" : "") << "\n";
        }
        result.table.push_back(std::move(row));
    }

    std::size_t best = assignments.size();
    for (std::size_t c = 0; c < result.table.size(); ++c) {
        const GridRow& row = result.table[c];
        if (!row.outcome.valid_rse) continue;
        if (best == assignments.size()) {
            best = c;
            continue;
        }
        const GridRow& cur = result.table[best];
        const double rse_c = *row.outcome.valid_rse;
        const double rse_b = *cur.outcome.valid_rse;
        if (rse_c < rse_b ||
            (rse_c == rse_b &&
             row.outcome.parameter_count < cur.outcome.parameter_count)) {
            best = c;
        }
        // equal RSE and parameter count keeps the earlier (lexicographic)
        // configuration
    }
    if (best == assignments.size()) {
        std::ostringstream os;
        os << "grid search: every configuration failed:";
        for (const GridRow& row : result.table) {
            os << "\n  " << row.assignment.key() << ": "
               << row.outcome.diagnostics;
        }
        throw NumericError(os.str());
    }
    result.best_index = best;
    return result;
}

} // namespace lstnet
