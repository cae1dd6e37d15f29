// SPDX-License-Identifier: Apache-2.0
#include "lstnet/data.hpp"

#include "lstnet/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace lstnet {

// ---------------------------------------------------------------------------
// SplitSpec
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    const double s = train_fraction + valid_fraction + test_fraction;
    if (train_fraction <= 0.0 || valid_fraction < 0.0 || test_fraction < 0.0 ||
        std::fabs(s - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "split fractions must be positive-train, nonnegative and sum to 1, got "
           << train_fraction << "/" << valid_fraction << "/" << test_fraction;
        throw ConfigError(os.str());
    }
}

std::size_t SplitSpec::train_end(std::size_t rows) const {
    return static_cast<std::size_t>(
        std::floor(static_cast<double>(rows) * train_fraction));
}

std::size_t SplitSpec::valid_end(std::size_t rows) const {
    return static_cast<std::size_t>(std::floor(
        static_cast<double>(rows) * (train_fraction + valid_fraction)));
}

std::pair<std::size_t, std::size_t>
SplitSpec::part_range(std::size_t rows, DatasetPart part) const {
    switch (part) {
    case DatasetPart::train:
        return {0, train_end(rows)};
    case DatasetPart::valid:
        return {train_end(rows), valid_end(rows)};
    case DatasetPart::test:
        return {valid_end(rows), rows};
    case DatasetPart::all:
        return {0, rows};
    }
    throw ConfigError("unknown dataset part");
}

// ---------------------------------------------------------------------------
// TimeSeriesDataset
// ---------------------------------------------------------------------------

TimeSeriesDataset::TimeSeriesDataset(std::size_t rows, std::size_t vars,
                                     std::vector<double> values,
                                     std::string name, std::string interval)
    : rows_(rows), vars_(vars), values_(std::move(values)),
      scale_(vars, 1.0), name_(std::move(name)), interval_(std::move(interval)) {
    if (rows_ == 0 || vars_ == 0) {
        throw DataError("dataset must have at least one row and one variable");
    }
    if (values_.size() != rows_ * vars_) {
        throw DataError("dataset value count does not match rows x vars");
    }
}

void TimeSeriesDataset::normalize(NormalizeMode mode, const SplitSpec& split) {
    split.validate();
    if (mode == NormalizeMode::none) {
        denormalize();
        return;
    }
    if (mode_ == NormalizeMode::per_variable_max) {
        throw DataError("dataset is already normalized");
    }
    const std::size_t end = split.train_end(rows_);
    if (end == 0) {
        throw DataError("cannot normalize: training split has no rows");
    }
    for (std::size_t i = 0; i < vars_; ++i) {
        double mx = 0.0;
        for (std::size_t t = 0; t < end; ++t) {
            mx = std::max(mx, std::fabs(values_[t * vars_ + i]));
        }
        scale_[i] = mx == 0.0 ? 1.0 : mx;
    }
    for (std::size_t t = 0; t < rows_; ++t) {
        for (std::size_t i = 0; i < vars_; ++i) {
            values_[t * vars_ + i] /= scale_[i];
        }
    }
    mode_ = NormalizeMode::per_variable_max;
}

void TimeSeriesDataset::denormalize() {
    if (mode_ == NormalizeMode::none) {
        std::fill(scale_.begin(), scale_.end(), 1.0);
        return;
    }
    for (std::size_t t = 0; t < rows_; ++t) {
        for (std::size_t i = 0; i < vars_; ++i) {
            values_[t * vars_ + i] *= scale_[i];
        }
    }
    std::fill(scale_.begin(), scale_.end(), 1.0);
    mode_ = NormalizeMode::none;
}

void TimeSeriesDataset::set_scale(NormalizeMode mode,
                                  std::vector<double> factors) {
    if (factors.size() != vars_) {
        throw DataError("scale factor count does not match variable count");
    }
    for (double f : factors) {
        if (!(f > 0.0)) throw DataError("scale factors must be positive");
    }
    if (mode_ == NormalizeMode::per_variable_max) {
        throw DataError("dataset is already normalized");
    }
    if (mode == NormalizeMode::per_variable_max) {
        for (std::size_t t = 0; t < rows_; ++t) {
            for (std::size_t i = 0; i < vars_; ++i) {
                values_[t * vars_ + i] /= factors[i];
            }
        }
        scale_ = std::move(factors);
        mode_ = mode;
    }
}

std::vector<double> TimeSeriesDataset::variable(std::size_t i) const {
    if (i >= vars_) {
        throw DataError("variable index " + std::to_string(i) +
                        " out of range (n=" + std::to_string(vars_) + ")");
    }
    std::vector<double> out(rows_);
    for (std::size_t t = 0; t < rows_; ++t) out[t] = values_[t * vars_ + i];
    return out;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

TimeSeriesDataset load_dataset(const std::filesystem::path& path,
                               char delimiter) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dataset file: " + path.string());
    }
    std::vector<double> values;
    std::size_t vars = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue; // tolerate blank lines
        std::size_t field_count = 0;
        std::size_t pos = 0;
        while (true) {
            std::size_t next = line.find(delimiter, pos);
            std::string_view field(line.data() + pos,
                                   (next == std::string::npos ? line.size() : next) - pos);
            // trim surrounding spaces
            while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
                field.remove_prefix(1);
            }
            while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) {
                field.remove_suffix(1);
            }
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size()) {
                std::ostringstream os;
                os << path.string() << ": row " << line_no << ", column "
                   << (field_count + 1) << ": cannot parse '" << std::string(field)
                   << "' as a number";
                throw DataError(os.str());
            }
            values.push_back(v);
            ++field_count;
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (vars == 0) {
            vars = field_count;
        } else if (field_count != vars) {
            std::ostringstream os;
            os << path.string() << ": row " << line_no << " has " << field_count
               << " fields, expected " << vars;
            throw DataError(os.str());
        }
        ++rows;
    }
    if (rows == 0) {
        throw DataError(path.string() + ": empty dataset file");
    }
    return TimeSeriesDataset(rows, vars, std::move(values),
                             path.stem().string());
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

std::vector<std::size_t> window_anchors(std::size_t rows, std::size_t window,
                                        std::size_t horizon,
                                        const SplitSpec& split,
                                        DatasetPart part) {
    if (window == 0) throw ConfigError("window must be >= 1");
    if (horizon == 0) throw ConfigError("horizon must be >= 1");
    auto [lo, hi] = split.part_range(rows, part);
    std::vector<std::size_t> anchors;
    // Anchor a uses input rows [a-window+1, a] and target row a+horizon.
    const std::size_t min_anchor =
        std::max(window - 1, lo >= horizon ? lo - horizon : 0);
    for (std::size_t a = min_anchor; a + horizon < hi; ++a) {
        if (a + horizon < lo) continue;
        anchors.push_back(a);
    }
    return anchors;
}

WindowSample materialize_window(const TimeSeriesDataset& ds, std::size_t anchor,
                                std::size_t window, std::size_t horizon) {
    if (anchor + 1 < window || anchor + horizon >= ds.rows()) {
        throw DataError("window anchor out of range");
    }
    WindowSample s;
    s.anchor = anchor;
    s.window = window;
    s.horizon = horizon;
    s.input.resize(window * ds.vars());
    const std::size_t start = anchor + 1 - window;
    for (std::size_t t = 0; t < window; ++t) {
        auto row = ds.row(start + t);
        std::copy(row.begin(), row.end(), s.input.begin() + t * ds.vars());
    }
    auto target = ds.row(anchor + horizon);
    s.target.assign(target.begin(), target.end());
    return s;
}

WindowBatch make_batch(const TimeSeriesDataset& ds,
                       std::span<const std::size_t> anchors, std::size_t window,
                       std::size_t horizon) {
    WindowBatch b;
    b.batch = anchors.size();
    b.window = window;
    b.vars = ds.vars();
    b.inputs.resize(b.batch * window * b.vars);
    b.targets.resize(b.batch * b.vars);
    b.anchors.assign(anchors.begin(), anchors.end());
    for (std::size_t s = 0; s < b.batch; ++s) {
        const std::size_t anchor = anchors[s];
        if (anchor + 1 < window || anchor + horizon >= ds.rows()) {
            throw DataError("window anchor out of range");
        }
        const std::size_t start = anchor + 1 - window;
        for (std::size_t t = 0; t < window; ++t) {
            auto row = ds.row(start + t);
            std::copy(row.begin(), row.end(),
                      b.inputs.begin() + (s * window + t) * b.vars);
        }
        auto target = ds.row(anchor + horizon);
        std::copy(target.begin(), target.end(), b.targets.begin() + s * b.vars);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

std::vector<double> autocorrelation(std::span<const double> series,
                                    std::size_t max_lag) {
    const std::size_t n = series.size();
    if (n == 0 || max_lag >= n) {
        throw DataError("autocorrelation: series length must exceed max_lag");
    }
    double mu = 0.0;
    for (double v : series) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : series) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    if (var == 0.0) {
        throw DataError("autocorrelation: series has zero variance");
    }
    std::vector<double> r(max_lag + 1);
    for (std::size_t tau = 0; tau <= max_lag; ++tau) {
        double cov = 0.0;
        for (std::size_t t = 0; t + tau < n; ++t) {
            cov += (series[t] - mu) * (series[t + tau] - mu);
        }
        cov /= static_cast<double>(n - tau);
        r[tau] = cov / var;
    }
    return r;
}

ScaleShiftSeries generate_scale_shift_ar(
    std::size_t order, std::size_t period, double mu0, std::size_t length,
    std::uint64_t seed, std::optional<std::vector<double>> weights_override) {
    if (order == 0) throw ConfigError("generator order must be >= 1");
    if (period == 0) throw ConfigError("generator period must be positive");
    if (length <= order) {
        throw ConfigError("generator length must exceed the order");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    ScaleShiftSeries out;
    if (weights_override) {
        if (weights_override->size() != order) {
            throw ConfigError("weights override size must equal the order");
        }
        out.weights = std::move(*weights_override);
    } else {
        out.weights.resize(order);
        for (auto& w : out.weights) w = unit(rng);
    }

    const std::size_t burn = 10 * order;
    std::vector<double> x;
    x.reserve(burn + length + order);
    for (std::size_t i = 0; i < order; ++i) x.push_back(unit(rng));
    for (std::size_t t = order; t < burn + length; ++t) {
        const bool emitted = t >= burn;
        const double mean =
            emitted ? std::floor(static_cast<double>(t - burn) /
                                 static_cast<double>(period)) *
                          mu0
                    : 0.0;
        double v = mean + unit(rng);
        for (std::size_t i = 0; i < order; ++i) {
            v += out.weights[i] * x[t - 1 - i];
        }
        x.push_back(v);
    }
    out.values.assign(x.begin() + static_cast<std::ptrdiff_t>(burn), x.end());
    return out;
}

} // namespace lstnet
