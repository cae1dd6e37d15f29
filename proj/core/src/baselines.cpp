// SPDX-License-Identifier: Apache-2.0
#include "lstnet/baselines.hpp"

#include "lstnet/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace lstnet {

namespace {

using MatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

} // namespace

std::vector<double> RidgeModel::predict(std::span<const double> x) const {
    if (x.size() != features) {
        throw ShapeError("ridge predict: got " + std::to_string(x.size()) +
                         " features, expected " + std::to_string(features));
    }
    std::vector<double> out(intercept);
    for (std::size_t f = 0; f < features; ++f) {
        const double xv = x[f];
        if (xv == 0.0) continue;
        const double* row = coef.data() + f * targets;
        for (std::size_t t = 0; t < targets; ++t) out[t] += xv * row[t];
    }
    return out;
}

RidgeModel fit_ridge(std::span<const double> design, std::size_t rows,
                     std::size_t features, std::span<const double> targets,
                     std::size_t target_dim, double lambda) {
    if (rows == 0) throw DataError("ridge fit: no samples");
    if (lambda < 0.0) throw ConfigError("ridge lambda must be >= 0");
    if (design.size() != rows * features || targets.size() != rows * target_dim) {
        throw ShapeError("ridge fit: design/target sizes inconsistent");
    }
    const std::size_t d = features + 1; // unpenalized intercept column

    MatrixMap x(design.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(features));
    MatrixMap y(targets.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(target_dim));

    Eigen::MatrixXd gram(d, d);
    gram.topLeftCorner(features, features).noalias() = x.transpose() * x;
    Eigen::VectorXd col_sums = x.colwise().sum();
    gram.topRightCorner(features, 1) = col_sums;
    gram.bottomLeftCorner(1, features) = col_sums.transpose();
    gram(d - 1, d - 1) = static_cast<double>(rows);
    for (std::size_t i = 0; i < features; ++i) {
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += lambda;
    }

    Eigen::MatrixXd rhs(d, target_dim);
    rhs.topRows(features).noalias() = x.transpose() * y;
    rhs.bottomRows(1) = y.colwise().sum();

    auto ldlt = gram.ldlt();
    Eigen::MatrixXd beta = ldlt.solve(rhs);

    // Rank-deficient Gram matrices can still be consistent, so a residual
    // check alone misses them; inspect the LDLT pivots too. Any lambda > 0
    // makes the penalized block positive definite, so the pivot check only
    // applies to the unregularized solve.
    const double pivot_max = ldlt.vectorD().cwiseAbs().maxCoeff();
    const double pivot_min = ldlt.vectorD().cwiseAbs().minCoeff();
    const bool rank_deficient =
        lambda == 0.0 && (pivot_max == 0.0 || pivot_min < 1e-12 * pivot_max);
    const double rhs_norm = rhs.norm();
    const double residual = (gram * beta - rhs).norm();
    if (!beta.allFinite() || rank_deficient ||
        (rhs_norm > 0.0 && residual > 1e-6 * rhs_norm) ||
        (rhs_norm == 0.0 && residual > 0.0)) {
        std::ostringstream os;
        os << "ridge fit: normal equations are singular or ill-conditioned "
              "(relative residual "
           << (rhs_norm > 0.0 ? residual / rhs_norm : residual)
           << ", pivot ratio "
           << (pivot_max > 0.0 ? pivot_min / pivot_max : 0.0)
           << " at lambda=" << lambda << "); use lambda > 0";
        throw NumericError(os.str());
    }

    RidgeModel model;
    model.features = features;
    model.targets = target_dim;
    model.lambda = lambda;
    model.coef.resize(features * target_dim);
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t t = 0; t < target_dim; ++t) {
            model.coef[f * target_dim + t] =
                beta(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(t));
        }
    }
    model.intercept.resize(target_dim);
    for (std::size_t t = 0; t < target_dim; ++t) {
        model.intercept[t] =
            beta(static_cast<Eigen::Index>(d - 1), static_cast<Eigen::Index>(t));
    }
    return model;
}

double ridge_normal_residual(const RidgeModel& model,
                             std::span<const double> design, std::size_t rows,
                             std::span<const double> targets) {
    const std::size_t features = model.features;
    const std::size_t m = model.targets;
    const std::size_t d = features + 1;
    MatrixMap x(design.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(features));
    MatrixMap y(targets.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(m));

    Eigen::MatrixXd gram(d, d);
    gram.topLeftCorner(features, features).noalias() = x.transpose() * x;
    Eigen::VectorXd col_sums = x.colwise().sum();
    gram.topRightCorner(features, 1) = col_sums;
    gram.bottomLeftCorner(1, features) = col_sums.transpose();
    gram(d - 1, d - 1) = static_cast<double>(rows);
    for (std::size_t i = 0; i < features; ++i) {
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +=
            model.lambda;
    }
    Eigen::MatrixXd rhs(d, m);
    rhs.topRows(features).noalias() = x.transpose() * y;
    rhs.bottomRows(1) = y.colwise().sum();

    Eigen::MatrixXd beta(d, m);
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t t = 0; t < m; ++t) {
            beta(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(t)) =
                model.coef[f * m + t];
        }
    }
    for (std::size_t t = 0; t < m; ++t) {
        beta(static_cast<Eigen::Index>(d - 1), static_cast<Eigen::Index>(t)) =
            model.intercept[t];
    }
    const double rhs_norm = rhs.norm();
    const double residual = (gram * beta - rhs).norm();
    return rhs_norm > 0.0 ? residual / rhs_norm : residual;
}

// ---------------------------------------------------------------------------
// VAR ridge
// ---------------------------------------------------------------------------

namespace {

/// Flattened-window design + targets over the training anchors.
void build_var_design(const TimeSeriesDataset& ds, std::size_t window,
                      std::size_t horizon, const SplitSpec& split,
                      std::vector<double>& design,
                      std::vector<double>& targets, std::size_t& rows) {
    auto anchors = window_anchors(ds.rows(), window, horizon, split,
                                  DatasetPart::train);
    if (anchors.empty()) {
        throw DataError("ridge fit: training split yields no windows");
    }
    rows = anchors.size();
    const std::size_t n = ds.vars();
    design.resize(rows * window * n);
    targets.resize(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t a = anchors[r];
        const std::size_t start = a + 1 - window;
        for (std::size_t t = 0; t < window; ++t) {
            auto row = ds.row(start + t);
            std::copy(row.begin(), row.end(),
                      design.begin() + (r * window + t) * n);
        }
        auto target = ds.row(a + horizon);
        std::copy(target.begin(), target.end(), targets.begin() + r * n);
    }
}

} // namespace

VarRidgeModel fit_var_ridge(const TimeSeriesDataset& dataset,
                            std::size_t window, std::size_t horizon,
                            double lambda, const SplitSpec& split,
                            std::size_t max_features) {
    if (window == 0) throw ConfigError("ridge window must be >= 1");
    const std::size_t n = dataset.vars();
    if (window * n > max_features) {
        std::ostringstream os;
        os << "ridge design would have " << window * n
           << " features (n*q), above the cap of " << max_features
           << "; reduce the window q or raise baseline.max_features";
        throw ConfigError(os.str());
    }
    std::vector<double> design, targets;
    std::size_t rows = 0;
    build_var_design(dataset, window, horizon, split, design, targets, rows);
    VarRidgeModel model;
    model.window = window;
    model.vars = n;
    model.ridge = fit_ridge(design, rows, window * n, targets, n, lambda);
    return model;
}

std::vector<double> predict_linear(const VarRidgeModel& model,
                                   std::span<const double> window) {
    return model.ridge.predict(window);
}

std::vector<double> VarRidgeForecaster::predict(const WindowBatch& batch) const {
    if (batch.vars != model_.vars || batch.window != model_.window) {
        throw ShapeError("lridge predict: batch window/vars mismatch");
    }
    std::vector<double> out(batch.batch * batch.vars);
    const std::size_t stride = batch.window * batch.vars;
    for (std::size_t s = 0; s < batch.batch; ++s) {
        std::span<const double> w(batch.inputs.data() + s * stride, stride);
        auto y = model_.ridge.predict(w);
        std::copy(y.begin(), y.end(), out.begin() + s * batch.vars);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Univariate AR
// ---------------------------------------------------------------------------

UnivariateArModel fit_univariate_ar(const TimeSeriesDataset& dataset,
                                    std::size_t order, std::size_t horizon,
                                    double lambda, const SplitSpec& split) {
    if (order == 0) throw ConfigError("AR order must be >= 1");
    auto anchors = window_anchors(dataset.rows(), order, horizon, split,
                                  DatasetPart::train);
    if (anchors.empty()) {
        throw DataError("AR fit: training split yields no windows");
    }
    const std::size_t n = dataset.vars();
    const std::size_t rows = anchors.size();

    UnivariateArModel model;
    model.order = order;
    model.vars = n;
    model.lambda = lambda;
    model.coef.resize(n * order);
    model.intercept.resize(n);

    std::vector<double> design(rows * order);
    std::vector<double> target(rows);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t a = anchors[r];
            for (std::size_t k = 0; k < order; ++k) {
                design[r * order + k] = dataset.value(a - k, i); // newest first
            }
            target[r] = dataset.value(a + horizon, i);
        }
        RidgeModel fit = fit_ridge(design, rows, order, target, 1, lambda);
        for (std::size_t k = 0; k < order; ++k) {
            model.coef[i * order + k] = fit.coef[k];
        }
        model.intercept[i] = fit.intercept[0];
    }
    return model;
}

std::vector<double> predict_linear(const UnivariateArModel& model,
                                   std::span<const double> window,
                                   std::size_t window_steps) {
    const std::size_t n = model.vars;
    if (window.size() != window_steps * n || window_steps < model.order) {
        throw ShapeError("AR predict: window must hold at least `order` steps");
    }
    std::vector<double> out(model.intercept);
    for (std::size_t i = 0; i < n; ++i) {
        const double* c = model.coef.data() + i * model.order;
        double acc = 0.0;
        for (std::size_t k = 0; k < model.order; ++k) {
            acc += c[k] * window[(window_steps - 1 - k) * n + i];
        }
        out[i] += acc;
    }
    return out;
}

std::vector<double> UnivariateArForecaster::predict(const WindowBatch& batch) const {
    if (batch.vars != model_.vars || batch.window < model_.order) {
        throw ShapeError("ar predict: batch window/vars mismatch");
    }
    std::vector<double> out(batch.batch * batch.vars);
    const std::size_t stride = batch.window * batch.vars;
    for (std::size_t s = 0; s < batch.batch; ++s) {
        std::span<const double> w(batch.inputs.data() + s * stride, stride);
        auto y = predict_linear(model_, w, batch.window);
        std::copy(y.begin(), y.end(), out.begin() + s * batch.vars);
    }
    return out;
}

} // namespace lstnet
