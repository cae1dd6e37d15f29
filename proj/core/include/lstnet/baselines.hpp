// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/data.hpp"
#include "lstnet/eval.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lstnet {

/// Linear model fit by the regularized normal equations
/// (X^T X + lambda I) beta = X^T y, intercept as an unpenalized constant
/// feature.
struct RidgeModel {
    std::size_t features = 0; // without the intercept
    std::size_t targets = 0;
    std::vector<double> coef;      // features x targets, row-major
    std::vector<double> intercept; // targets
    double lambda = 0.0;

    std::vector<double> predict(std::span<const double> x) const;
};

/// Direct solve of the regularized normal equations; throws NumericError
/// naming the failure when the system is singular at lambda = 0.
RidgeModel fit_ridge(std::span<const double> design, std::size_t rows,
                     std::size_t features, std::span<const double> targets,
                     std::size_t target_dim, double lambda);

/// Max over targets of ||(X^T X + lambda I) beta - X^T y|| / ||X^T y||
/// over the augmented (intercept-carrying) system.
double ridge_normal_residual(const RidgeModel& model,
                             std::span<const double> design, std::size_t rows,
                             std::span<const double> targets);

/// VAR baseline: every variable regresses on the flattened n x q window.
/// Guards against accidental huge designs (n*q > max_features).
struct VarRidgeModel {
    std::size_t window = 0;
    std::size_t vars = 0;
    RidgeModel ridge;
};

VarRidgeModel fit_var_ridge(const TimeSeriesDataset& dataset,
                            std::size_t window, std::size_t horizon,
                            double lambda, const SplitSpec& split,
                            std::size_t max_features = 8192);

/// n independent per-variable autoregressions on each variable's own lags
/// (newest lag first), all sharing (order, lambda).
struct UnivariateArModel {
    std::size_t order = 0;
    std::size_t vars = 0;
    double lambda = 0.0;
    std::vector<double> coef;      // vars x order, row-major
    std::vector<double> intercept; // vars
};

UnivariateArModel fit_univariate_ar(const TimeSeriesDataset& dataset,
                                    std::size_t order, std::size_t horizon,
                                    double lambda, const SplitSpec& split);

/// Affine map of one flattened window (q x n time-major values) to the
/// n-vector prediction.
std::vector<double> predict_linear(const VarRidgeModel& model,
                                   std::span<const double> window);
std::vector<double> predict_linear(const UnivariateArModel& model,
                                   std::span<const double> window,
                                   std::size_t window_steps);

class VarRidgeForecaster final : public Forecaster {
public:
    explicit VarRidgeForecaster(VarRidgeModel model) : model_(std::move(model)) {}
    std::vector<double> predict(const WindowBatch& batch) const override;
    std::size_t window() const override { return model_.window; }
    std::string name() const override { return "lridge"; }
    const VarRidgeModel& model() const { return model_; }

private:
    VarRidgeModel model_;
};

class UnivariateArForecaster final : public Forecaster {
public:
    explicit UnivariateArForecaster(UnivariateArModel model)
        : model_(std::move(model)) {}
    std::vector<double> predict(const WindowBatch& batch) const override;
    std::size_t window() const override { return model_.order; }
    std::string name() const override { return "ar"; }
    const UnivariateArModel& model() const { return model_; }

private:
    UnivariateArModel model_;
};

} // namespace lstnet
