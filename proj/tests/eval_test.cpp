// SPDX-License-Identifier: Apache-2.0
#include "lstnet/eval.hpp"

#include "lstnet/baselines.hpp"
#include "lstnet/errors.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace lstnet;

namespace {

EvalMatrix random_matrix(std::size_t steps, std::size_t vars,
                         std::mt19937_64& rng) {
    EvalMatrix m{steps, vars, {}};
    m.values.resize(steps * vars);
    std::uniform_real_distribution<double> dist(-2, 2);
    for (auto& v : m.values) v = dist(rng);
    return m;
}

/// Brute-force Eq.-style oracles, written independently of eval.cpp.
double rse_oracle(const EvalMatrix& y, const EvalMatrix& p) {
    double mean = 0.0;
    for (double v : y.values) mean += v;
    mean /= static_cast<double>(y.values.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.values.size(); ++i) {
        num += (y.values[i] - p.values[i]) * (y.values[i] - p.values[i]);
        den += (y.values[i] - mean) * (y.values[i] - mean);
    }
    return std::sqrt(num / den);
}

double corr_oracle(const EvalMatrix& y, const EvalMatrix& p) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < y.vars; ++i) {
        double my = 0.0, mp = 0.0;
        for (std::size_t t = 0; t < y.steps; ++t) {
            my += y.at(t, i);
            mp += p.at(t, i);
        }
        my /= static_cast<double>(y.steps);
        mp /= static_cast<double>(y.steps);
        double num = 0.0, sy = 0.0, sp = 0.0;
        for (std::size_t t = 0; t < y.steps; ++t) {
            num += (y.at(t, i) - my) * (p.at(t, i) - mp);
            sy += (y.at(t, i) - my) * (y.at(t, i) - my);
            sp += (p.at(t, i) - mp) * (p.at(t, i) - mp);
        }
        if (sy == 0.0 || sp == 0.0) continue;
        acc += num / std::sqrt(sy * sp);
        ++used;
    }
    return acc / static_cast<double>(used);
}

} // namespace

TEST_CASE("rse") {
    std::mt19937_64 rng(1);
    SUBCASE("perfect prediction gives 0") {
        auto y = random_matrix(10, 3, rng);
        CHECK(rse(y, y) == 0.0);
    }
    SUBCASE("mean predictor gives exactly 1") {
        auto y = random_matrix(50, 5, rng);
        double mean = 0.0;
        for (double v : y.values) mean += v;
        mean /= static_cast<double>(y.values.size());
        EvalMatrix p = y;
        for (auto& v : p.values) v = mean;
        CHECK(std::fabs(rse(y, p) - 1.0) < 1e-12);
    }
    SUBCASE("random pairs match the oracle to 1e-12") {
        for (int trial = 0; trial < 20; ++trial) {
            auto y = random_matrix(50, 5, rng);
            auto p = random_matrix(50, 5, rng);
            CHECK(std::fabs(rse(y, p) - rse_oracle(y, p)) < 1e-12);
        }
    }
    SUBCASE("globally constant truth is degenerate") {
        EvalMatrix y{4, 2, std::vector<double>(8, 3.0)};
        EvalMatrix p{4, 2, std::vector<double>(8, 2.0)};
        CHECK_THROWS_AS(rse(y, p), NumericError);
    }
    SUBCASE("invariant under global affine rescaling of both") {
        auto y = random_matrix(40, 4, rng);
        auto p = random_matrix(40, 4, rng);
        const double base = rse(y, p);
        const double alpha = -3.7, c = 11.0;
        EvalMatrix ys = y, ps = p;
        for (auto& v : ys.values) v = alpha * v + c;
        for (auto& v : ps.values) v = alpha * v + c;
        CHECK(rse(ys, ps) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        EvalMatrix a{2, 2, {1, 2, 3, 4}};
        EvalMatrix b{4, 1, {1, 2, 3, 4}};
        CHECK_THROWS_AS(rse(a, b), ShapeError);
    }
}

TEST_CASE("corr") {
    std::mt19937_64 rng(2);
    SUBCASE("perfect prediction gives 1, anti-prediction -1") {
        auto y = random_matrix(30, 4, rng);
        CHECK(corr(y, y).corr == doctest::Approx(1.0).epsilon(1e-12));
        EvalMatrix neg = y;
        for (auto& v : neg.values) v = -v;
        CHECK(corr(y, neg).corr == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("random pairs match the per-row oracle to 1e-12") {
        for (int trial = 0; trial < 20; ++trial) {
            auto y = random_matrix(50, 5, rng);
            auto p = random_matrix(50, 5, rng);
            CHECK(std::fabs(corr(y, p).corr - corr_oracle(y, p)) < 1e-12);
        }
    }
    SUBCASE("zero-variance variables are excluded and counted") {
        auto y = random_matrix(20, 3, rng);
        auto p = random_matrix(20, 3, rng);
        for (std::size_t t = 0; t < 20; ++t) y.at(t, 1) = 7.0;
        auto r = corr(y, p);
        CHECK(r.excluded_vars == 1);
        EvalMatrix y2 = y, p2 = p;
        for (std::size_t t = 0; t < 20; ++t) {
            y2.at(t, 1) = static_cast<double>(t);
            p2.at(t, 2) = -1.0;
        }
        CHECK(corr(y2, p2).excluded_vars == 1);
    }
    SUBCASE("all variables excluded is an error") {
        EvalMatrix y{5, 2, std::vector<double>(10, 1.0)};
        auto p = random_matrix(5, 2, rng);
        CHECK_THROWS_AS(corr(y, p), NumericError);
    }
    SUBCASE("invariant under per-variable positive affine maps of predictions") {
        auto y = random_matrix(40, 3, rng);
        auto p = random_matrix(40, 3, rng);
        const double base = corr(y, p).corr;
        EvalMatrix ps = p;
        const double scales[] = {2.0, 0.5, 7.0};
        const double shifts[] = {-1.0, 3.0, 0.25};
        for (std::size_t t = 0; t < 40; ++t) {
            for (std::size_t i = 0; i < 3; ++i) {
                ps.at(t, i) = scales[i] * ps.at(t, i) + shifts[i];
            }
        }
        CHECK(corr(y, ps).corr == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("rolling_evaluate") {
    SplitSpec split;
    SUBCASE("persistence on a constant series reports degenerate") {
        TimeSeriesDataset ds(50, 2, std::vector<double>(100, 4.0), "const");
        PersistenceForecaster fc(1);
        auto report = rolling_evaluate(fc, ds, split, DatasetPart::test, 1);
        CHECK(report.degenerate);
        CHECK_FALSE(report.rse.has_value());
        CHECK(report.degenerate_reason.find("constant") != std::string::npos);
    }
    SUBCASE("persistence on a periodic series with aligned horizon is exact") {
        const std::size_t period = 5, T = 100;
        std::vector<double> vals(T);
        for (std::size_t t = 0; t < T; ++t) {
            vals[t] = std::sin(2.0 * std::numbers::pi *
                               static_cast<double>(t % period) / period);
        }
        TimeSeriesDataset ds(T, 1, vals, "periodic");
        PersistenceForecaster fc(1);
        auto report = rolling_evaluate(fc, ds, split, DatasetPart::test, period);
        REQUIRE(report.rse.has_value());
        CHECK(*report.rse < 1e-12);
        REQUIRE(report.corr.has_value());
        CHECK(*report.corr == doctest::Approx(1.0));
    }
    SUBCASE("inputs never reach past the window anchor (causality audit)") {
        // forecaster that verifies every batch window ends at its anchor
        struct Audit final : Forecaster {
            const TimeSeriesDataset* ds;
            std::vector<double> predict(const WindowBatch& b) const override {
                for (std::size_t s = 0; s < b.batch; ++s) {
                    const std::size_t anchor = b.anchors[s];
                    for (std::size_t t = 0; t < b.window; ++t) {
                        const std::size_t row = anchor + 1 - b.window + t;
                        for (std::size_t i = 0; i < b.vars; ++i) {
                            if (b.input_at(s, t, i) != ds->value(row, i)) {
                                throw std::logic_error("window misaligned");
                            }
                        }
                    }
                }
                return std::vector<double>(b.batch * b.vars, 0.0);
            }
            std::size_t window() const override { return 4; }
            std::string name() const override { return "audit"; }
        };
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> dist(-1, 1);
        std::vector<double> vals(200);
        for (auto& v : vals) v = dist(rng);
        TimeSeriesDataset ds(100, 2, vals, "audit");
        Audit fc;
        fc.ds = &ds;
        CHECK_NOTHROW(rolling_evaluate(fc, ds, split, DatasetPart::valid, 2));
    }
    SUBCASE("parts are labeled and evaluable separately") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> dist(-1, 1);
        std::vector<double> vals(120);
        for (auto& v : vals) v = dist(rng);
        TimeSeriesDataset ds(120, 1, vals, "parts");
        PersistenceForecaster fc(2);
        auto train_r = rolling_evaluate(fc, ds, split, DatasetPart::train, 1);
        auto test_r = rolling_evaluate(fc, ds, split, DatasetPart::test, 1);
        CHECK(train_r.evaluated_steps > test_r.evaluated_steps);
        CHECK(train_r.method == "persistence");
        CHECK(train_r.dataset == "parts");
    }
    SUBCASE("trace emits one row per timestamp and variable") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> dist(-1, 1);
        std::vector<double> vals(60 * 2);
        for (auto& v : vals) v = dist(rng);
        TimeSeriesDataset ds(60, 2, vals, "trace");
        PersistenceForecaster fc(1);
        RollingEvalOptions opts;
        std::size_t rows = 0;
        std::size_t min_t = SIZE_MAX;
        opts.trace = [&](std::size_t t, std::size_t var, double truth,
                         double pred) {
            ++rows;
            min_t = std::min(min_t, t);
            CHECK(var < 2);
            CHECK(truth == ds.value(t, var));
            (void)pred;
        };
        auto report = rolling_evaluate(fc, ds, split, DatasetPart::test, 1, opts);
        CHECK(rows == report.evaluated_steps * 2);
        CHECK(min_t >= split.valid_end(60));
    }
    SUBCASE("raw metric scale multiplies by the stored factors") {
        std::vector<double> vals(100);
        for (std::size_t t = 0; t < 100; ++t) {
            vals[t] = std::sin(0.3 * static_cast<double>(t)) * 10.0;
        }
        TimeSeriesDataset ds(100, 1, vals, "scaled");
        ds.normalize(NormalizeMode::per_variable_max, split);
        PersistenceForecaster fc(1);
        RollingEvalOptions raw;
        raw.scale = MetricScale::raw;
        auto r_norm = rolling_evaluate(fc, ds, split, DatasetPart::test, 1);
        auto r_raw = rolling_evaluate(fc, ds, split, DatasetPart::test, 1, raw);
        // one variable: rse is scale-free, so both agree; the trace values
        // differ by the factor (checked through truth values above)
        CHECK(*r_norm.rse == doctest::Approx(*r_raw.rse).epsilon(1e-12));
    }
}

TEST_CASE("grid enumeration and search") {
    SUBCASE("single-point grid returns that configuration") {
        GridSpec spec;
        spec.axes = {{"model.window", {"8"}}};
        auto result = grid_search(spec, [](const GridAssignment& a) {
            CHECK(a.settings.size() == 1);
            GridOutcome out;
            out.valid_rse = 0.5;
            out.parameter_count = 10;
            return out;
        });
        CHECK(result.table.size() == 1);
        CHECK(result.best_index == 0);
        CHECK_FALSE(result.truncated);
    }
    SUBCASE("selection is by validation rse with parameter-count tie break") {
        GridSpec spec;
        spec.axes = {{"model.rnn_hidden", {"10", "20", "30"}}};
        auto result = grid_search(spec, [](const GridAssignment& a) {
            GridOutcome out;
            const std::string& v = a.settings[0].second;
            if (v == "10") {
                out.valid_rse = 0.4;
                out.parameter_count = 100;
            } else if (v == "20") {
                out.valid_rse = 0.4;
                out.parameter_count = 50; // tie on rse, fewer params wins
            } else {
                out.valid_rse = 0.9;
                out.parameter_count = 1;
            }
            return out;
        });
        CHECK(result.best_index == 1);
    }
    SUBCASE("equal rse and parameters keeps the earlier enumeration") {
        GridSpec spec;
        spec.axes = {{"model.window", {"8", "16"}}};
        auto result = grid_search(spec, [](const GridAssignment&) {
            GridOutcome out;
            out.valid_rse = 0.4;
            out.parameter_count = 10;
            return out;
        });
        CHECK(result.best_index == 0);
    }
    SUBCASE("cartesian order is lexicographic with the last axis fastest") {
        GridSpec spec;
        spec.axes = {{"a", {"1", "2"}}, {"b", {"x", "y"}}};
        auto points = enumerate_grid(spec);
        REQUIRE(points.size() == 4);
        CHECK(points[0].key() == "a=1,b=x");
        CHECK(points[1].key() == "a=1,b=y");
        CHECK(points[2].key() == "a=2,b=x");
        CHECK(points[3].key() == "a=2,b=y");
    }
    SUBCASE("max_configs truncates with a report") {
        GridSpec spec;
        spec.axes = {{"a", {"1", "2", "3", "4"}}};
        spec.max_configs = 2;
        bool truncated = false;
        auto points = enumerate_grid(spec, &truncated);
        CHECK(points.size() == 2);
        CHECK(truncated);
    }
    SUBCASE("all-failed grid throws with per-run diagnostics") {
        GridSpec spec;
        spec.axes = {{"a", {"1", "2"}}};
        CHECK_THROWS_WITH_AS(
            grid_search(spec,
                        [](const GridAssignment&) {
                            GridOutcome out;
                            out.diagnostics = "diverged";
                            return out;
                        }),
            doctest::Contains("diverged"), NumericError);
    }
    SUBCASE("precomputed rows are reused (resume)") {
        GridSpec spec;
        spec.axes = {{"a", {"1", "2", "3"}}};
        std::size_t calls = 0;
        auto recipe = [&calls](const GridAssignment& a) {
            ++calls;
            GridOutcome out;
            out.valid_rse = std::stod(a.settings[0].second);
            out.parameter_count = 1;
            return out;
        };
        auto full = grid_search(spec, recipe);
        CHECK(calls == 3);
        // resume with the first two rows done
        std::vector<GridRow> partial{full.table[0], full.table[1]};
        calls = 0;
        auto resumed = grid_search(spec, recipe, partial);
        CHECK(calls == 1);
        REQUIRE(resumed.table.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(resumed.table[i].assignment.key() ==
                  full.table[i].assignment.key());
            CHECK(resumed.table[i].outcome.valid_rse ==
                  full.table[i].outcome.valid_rse);
        }
        CHECK(resumed.best_index == full.best_index);
    }
    SUBCASE("ridge lambda grid matches exhaustive recomputation") {
        // synthetic AR(1): best lambda by validation rse, recomputed directly
        std::mt19937_64 rng(14);
        std::normal_distribution<double> noise(0, 0.3);
        const std::size_t T = 200;
        std::vector<double> vals(T);
        vals[0] = 1.0;
        for (std::size_t t = 1; t < T; ++t) {
            vals[t] = 0.85 * vals[t - 1] + noise(rng);
        }
        TimeSeriesDataset ds(T, 1, vals, "ar1");
        SplitSpec split;
        const std::vector<std::string> lambdas{"0.001", "0.1", "10", "1000"};
        auto recipe = [&](const GridAssignment& a) {
            GridOutcome out;
            const double lambda = std::stod(a.settings[0].second);
            auto model = fit_univariate_ar(ds, 4, 1, lambda, split);
            UnivariateArForecaster fc(model);
            auto report = rolling_evaluate(fc, ds, split, DatasetPart::valid, 1);
            out.valid_rse = report.rse;
            out.parameter_count = 5;
            return out;
        };
        GridSpec spec;
        spec.axes = {{"baseline.lambda", lambdas}};
        auto result = grid_search(spec, recipe);
        // exhaustive recomputation
        double best = 1e100;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            auto model = fit_univariate_ar(ds, 4, 1, std::stod(lambdas[i]), split);
            UnivariateArForecaster fc(model);
            auto report = rolling_evaluate(fc, ds, split, DatasetPart::valid, 1);
            if (*report.rse < best) {
                best = *report.rse;
                best_i = i;
            }
        }
        CHECK(result.best_index == best_i);
        CHECK(*result.table[result.best_index].outcome.valid_rse ==
              doctest::Approx(best));
    }
}
