// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/data.hpp"
#include "lstnet/eval.hpp"
#include "lstnet/model.hpp"
#include "lstnet/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lstnet {

/// Flat dotted-key run configuration: defaults, then an optional config
/// file, then command-line overrides (later layers win). Unknown keys are
/// rejected; grid.<key> axes must themselves name known keys.
class RunConfig {
public:
    RunConfig(); // defaults only

    static RunConfig from_file(const std::filesystem::path& path);

    /// Parses `key = value` lines ('#' starts a comment).
    void apply_text(const std::string& text, const std::string& origin);
    void set(const std::string& key, const std::string& value);
    void apply_overrides(
        const std::vector<std::pair<std::string, std::string>>& overrides);

    const std::string& get(const std::string& key) const;
    bool is_set(const std::string& key) const; // explicitly, beyond default

    std::string str(const std::string& key) const;
    double number(const std::string& key) const;
    std::size_t size(const std::string& key) const;
    std::uint64_t u64(const std::string& key) const;
    bool flag(const std::string& key) const;

    /// Defaults-resolved text, sorted by key; replaying it reproduces the
    /// same effective configuration.
    std::string effective_text() const;

    // ---- typed views -------------------------------------------------
    LstNetConfig model_config() const;
    SplitSpec split() const;
    TrainSchedule schedule() const;
    NormalizeMode normalize_mode() const;
    MetricScale metric_scale() const;
    DatasetPart eval_part() const;

    /// Grid axes collected from grid.<key> entries, in sorted key order.
    std::vector<std::pair<std::string, std::vector<std::string>>> grid_axes() const;

    /// Full validation of every set value (ranges, enums, cross-field).
    void validate() const;

private:
    std::map<std::string, std::string> values_;   // effective
    std::map<std::string, std::string> explicit_; // set beyond defaults
};

/// Splits "key=value"; throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_override(const std::string& arg);

} // namespace lstnet
