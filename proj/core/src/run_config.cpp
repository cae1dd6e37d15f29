// SPDX-License-Identifier: Apache-2.0
#include "lstnet/run_config.hpp"

#include "lstnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lstnet {

namespace {

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> defaults = {
        {"dataset.path", ""},
        {"dataset.delimiter", ","},
        {"dataset.name", ""},
        {"dataset.interval", ""},
        {"normalize.mode", "max"},
        {"metrics.scale", "normalized"},
        {"split.train", "0.6"},
        {"split.valid", "0.2"},
        {"split.test", "0.2"},
        {"model.variant", "skip"},
        {"model.window", "168"},
        {"model.horizon", "3"},
        {"model.conv_width", "6"},
        {"model.conv_filters", "100"},
        {"model.rnn_hidden", "100"},
        {"model.skip_hidden", "50"},
        {"model.skip_length", "24"},
        {"model.ar_window", "24"},
        {"model.dropout", "0.2"},
        {"model.loss", "l2"},
        {"model.attn_score", "dot"},
        {"model.freeze_neural", "false"},
        {"train.optimizer", "adam"},
        {"train.lr", "0.001"},
        {"train.batch", "128"},
        {"train.epochs", "100"},
        {"train.patience", "10"},
        {"train.clip_norm", "10"},
        {"train.ar_l2", "0"},
        {"train.seed", "42"},
        {"eval.part", "test"},
        {"eval.trace", "false"},
        {"baseline.kind", "none"},
        {"baseline.order", "8"},
        {"baseline.lambda", "0.1"},
        {"baseline.max_features", "8192"},
        {"grid.max_configs", "512"},
        {"simulate.order", "2"},
        {"simulate.period", "500"},
        {"simulate.mu0", "0.5"},
        {"simulate.length", "4000"},
        {"simulate.seed", "1"},
        {"autocorr.variable", "0"},
        {"autocorr.max_lag", "200"},
        {"out.dir", ""},
        {"out.overwrite", "false"},
        {"checkpoint.path", ""},
    };
    return defaults;
}

bool is_known_key(const std::string& key) {
    if (default_values().count(key)) return true;
    // grid axes name an existing key
    if (key.rfind("grid.", 0) == 0) {
        const std::string inner = key.substr(5);
        return default_values().count(inner) > 0 && inner.rfind("grid.", 0) != 0;
    }
    return false;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" +
                      v + "'");
}

} // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig cfg;
    cfg.apply_text(buf.str(), path.string());
    return cfg;
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!is_known_key(key)) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    values_[key] = value;
    explicit_[key] = value;
}

void RunConfig::apply_overrides(
    const std::vector<std::pair<std::string, std::string>>& overrides) {
    for (const auto& [k, v] : overrides) set(k, v);
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    return it->second;
}

bool RunConfig::is_set(const std::string& key) const {
    return explicit_.count(key) > 0;
}

std::string RunConfig::str(const std::string& key) const { return get(key); }

double RunConfig::number(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected a number, got '" +
                          v + "'");
    }
}

std::size_t RunConfig::size(const std::string& key) const {
    const double x = number(key);
    if (x < 0 || x != std::floor(x)) {
        throw ConfigError("config key '" + key +
                          "': expected a nonnegative integer, got '" + get(key) +
                          "'");
    }
    return static_cast<std::size_t>(x);
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    const std::string& v = get(key);
    try {
        return std::stoull(v);
    } catch (...) {
        throw ConfigError("config key '" + key +
                          "': expected an unsigned integer, got '" + v + "'");
    }
}

bool RunConfig::flag(const std::string& key) const {
    return parse_bool(get(key), key);
}

std::string RunConfig::effective_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) {
        os << k << " = " << v << '\n';
    }
    return os.str();
}

LstNetConfig RunConfig::model_config() const {
    LstNetConfig c;
    c.window = size("model.window");
    c.horizon = size("model.horizon");
    c.conv_width = size("model.conv_width");
    c.conv_filters = size("model.conv_filters");
    c.rnn_hidden = size("model.rnn_hidden");
    c.skip_hidden = size("model.skip_hidden");
    c.skip_length = size("model.skip_length");
    c.ar_window = size("model.ar_window");
    c.dropout = number("model.dropout");
    c.variant = variant_from_string(str("model.variant"));
    c.loss = loss_from_string(str("model.loss"));
    c.attn_score = attn_score_from_string(str("model.attn_score"));
    c.freeze_neural = flag("model.freeze_neural");
    return c;
}

SplitSpec RunConfig::split() const {
    SplitSpec s;
    s.train_fraction = number("split.train");
    s.valid_fraction = number("split.valid");
    s.test_fraction = number("split.test");
    s.validate();
    return s;
}

TrainSchedule RunConfig::schedule() const {
    TrainSchedule s;
    s.epochs = size("train.epochs");
    s.batch_size = size("train.batch");
    s.patience = size("train.patience");
    s.lr = number("train.lr");
    s.clip_norm = number("train.clip_norm");
    s.ar_l2 = number("train.ar_l2");
    s.optimizer = str("train.optimizer");
    s.valid_scale = metric_scale();
    if (s.optimizer != "adam" && s.optimizer != "sgd") {
        throw ConfigError("train.optimizer must be adam or sgd");
    }
    if (s.lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (s.clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
    if (s.ar_l2 < 0.0) throw ConfigError("train.ar_l2 must be >= 0");
    return s;
}

NormalizeMode RunConfig::normalize_mode() const {
    const std::string& v = get("normalize.mode");
    if (v == "max") return NormalizeMode::per_variable_max;
    if (v == "none") return NormalizeMode::none;
    throw ConfigError("normalize.mode must be max or none, got '" + v + "'");
}

MetricScale RunConfig::metric_scale() const {
    return metric_scale_from_string(get("metrics.scale"));
}

DatasetPart RunConfig::eval_part() const {
    const std::string& v = get("eval.part");
    if (v == "train") return DatasetPart::train;
    if (v == "valid") return DatasetPart::valid;
    if (v == "test") return DatasetPart::test;
    throw ConfigError("eval.part must be train, valid or test, got '" + v + "'");
}

std::vector<std::pair<std::string, std::vector<std::string>>>
RunConfig::grid_axes() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& [key, value] : explicit_) {
        if (key.rfind("grid.", 0) != 0 || key == "grid.max_configs") continue;
        std::vector<std::string> candidates;
        std::istringstream in(value);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) candidates.push_back(item);
        }
        if (candidates.empty()) {
            throw ConfigError("grid axis '" + key + "' has no values");
        }
        axes.emplace_back(key.substr(5), std::move(candidates));
    }
    return axes;
}

void RunConfig::validate() const {
    // Type/range probes; each getter throws on malformed values. Cross-field
    // model checks that need the dataset width run at model construction.
    split();
    model_config();
    const double dropout = number("model.dropout");
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("model.dropout must be in [0, 1)");
    }
    schedule();
    normalize_mode();
    metric_scale();
    eval_part();
    flag("eval.trace");
    flag("out.overwrite");
    size("baseline.order");
    if (number("baseline.lambda") < 0.0) {
        throw ConfigError("baseline.lambda must be >= 0");
    }
    size("baseline.max_features");
    size("grid.max_configs");
    size("simulate.order");
    size("simulate.period");
    number("simulate.mu0");
    size("simulate.length");
    u64("simulate.seed");
    u64("train.seed");
    size("autocorr.variable");
    size("autocorr.max_lag");
    const std::string& kind = get("baseline.kind");
    if (kind != "none" && kind != "ar" && kind != "ridge") {
        throw ConfigError("baseline.kind must be none, ar or ridge");
    }
    const std::string& delim = get("dataset.delimiter");
    if (delim.size() != 1) {
        throw ConfigError("dataset.delimiter must be a single character");
    }
}

std::pair<std::string, std::string> parse_override(const std::string& arg) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + arg + "' must look like key=value");
    }
    return {trim(arg.substr(0, eq)), trim(arg.substr(eq + 1))};
}

} // namespace lstnet
