// SPDX-License-Identifier: Apache-2.0
#include "lstnet/checkpoint.hpp"

#include "lstnet/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace lstnet {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'T', 'N', 'E', 'T', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    out.append(reinterpret_cast<const char*>(&v), 8);
}

void put_f64(std::string& out, double v) {
    out.append(reinterpret_cast<const char*>(&v), 8);
}

class Reader {
public:
    Reader(const std::string& data, std::string path)
        : data_(data), path_(std::move(path)) {}

    std::uint32_t u32() {
        std::uint32_t v;
        take(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        take(&v, 8);
        return v;
    }
    double f64() {
        double v;
        take(&v, 8);
        return v;
    }
    std::string bytes(std::size_t n) {
        check(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void f64_array(double* dst, std::size_t count) {
        check(count * 8);
        std::memcpy(dst, data_.data() + pos_, count * 8);
        pos_ += count * 8;
    }
    bool exhausted() const { return pos_ == data_.size(); }

private:
    void check(std::size_t n) const {
        if (pos_ + n > data_.size()) {
            throw DataError(path_ + ": truncated checkpoint");
        }
    }
    void take(void* dst, std::size_t n) {
        check(n);
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic, 8);
    put_u32(out, ckpt.version);
    put_u32(out, static_cast<std::uint32_t>(ckpt.kind));
    put_u64(out, ckpt.n_vars);
    put_u64(out, ckpt.seed);
    put_u32(out, ckpt.normalize_mode == NormalizeMode::per_variable_max ? 1 : 0);
    if (ckpt.scale_factors.size() != ckpt.n_vars) {
        throw ShapeError("checkpoint: scale factor count must equal n_vars");
    }
    for (double f : ckpt.scale_factors) put_f64(out, f);
    put_u32(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
    out.append(ckpt.config_text);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const NamedArray& p : ckpt.params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out.append(p.name);
        put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
        for (std::size_t e : p.shape) put_u64(out, e);
        if (p.values.size() != shape_numel(p.shape)) {
            throw ShapeError("checkpoint: parameter '" + p.name +
                             "' value count does not match its shape");
        }
        for (double v : p.values) put_f64(out, v);
    }

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("cannot write checkpoint: " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw DataError("short write on checkpoint: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    const std::string data = buf.str();
    if (data.size() < 8 || std::memcmp(data.data(), kMagic, 8) != 0) {
        throw DataError(path.string() + ": not a checkpoint file (bad magic)");
    }
    Reader r(data, path.string());
    r.bytes(8); // magic
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != 1) {
        throw DataError(path.string() + ": unsupported checkpoint version " +
                        std::to_string(ckpt.version));
    }
    const std::uint32_t kind = r.u32();
    if (kind > 2) {
        throw DataError(path.string() + ": unknown checkpoint kind " +
                        std::to_string(kind));
    }
    ckpt.kind = static_cast<CheckpointKind>(kind);
    ckpt.n_vars = r.u64();
    ckpt.seed = r.u64();
    ckpt.normalize_mode =
        r.u32() == 1 ? NormalizeMode::per_variable_max : NormalizeMode::none;
    ckpt.scale_factors.resize(ckpt.n_vars);
    r.f64_array(ckpt.scale_factors.data(), ckpt.n_vars);
    ckpt.config_text = r.bytes(r.u32());
    const std::uint32_t count = r.u32();
    ckpt.params.resize(count);
    for (NamedArray& p : ckpt.params) {
        p.name = r.bytes(r.u32());
        const std::uint32_t rank = r.u32();
        p.shape.resize(rank);
        for (std::size_t d = 0; d < rank; ++d) p.shape[d] = r.u64();
        p.values.resize(shape_numel(p.shape));
        r.f64_array(p.values.data(), p.values.size());
    }
    if (!r.exhausted()) {
        throw DataError(path.string() + ": trailing bytes after checkpoint");
    }
    return ckpt;
}

// ---------------------------------------------------------------------------
// Config text
// ---------------------------------------------------------------------------

std::string model_config_text(const LstNetConfig& config) {
    std::ostringstream os;
    os << "model.ar_window = " << config.ar_window << '\n'
       << "model.attn_score = " << to_string(config.attn_score) << '\n'
       << "model.conv_filters = " << config.conv_filters << '\n'
       << "model.conv_width = " << config.conv_width << '\n'
       << "model.dropout = " << config.dropout << '\n'
       << "model.freeze_neural = " << (config.freeze_neural ? "true" : "false")
       << '\n'
       << "model.horizon = " << config.horizon << '\n'
       << "model.loss = " << to_string(config.loss) << '\n'
       << "model.rnn_hidden = " << config.rnn_hidden << '\n'
       << "model.skip_hidden = " << config.skip_hidden << '\n'
       << "model.skip_length = " << config.skip_length << '\n'
       << "model.variant = " << to_string(config.variant) << '\n'
       << "model.window = " << config.window << '\n';
    return os.str();
}

namespace {

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{}
                                          : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::size_t to_size(const std::string& s, const char* key) {
    try {
        return static_cast<std::size_t>(std::stoull(s));
    } catch (...) {
        throw DataError(std::string("checkpoint config: bad value for ") + key);
    }
}

} // namespace

LstNetConfig model_config_from_text(const std::string& text) {
    auto kv = parse_kv_text(text);
    LstNetConfig c;
    auto want = [&](const char* key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw DataError(std::string("checkpoint config: missing key ") + key);
        }
        return it->second;
    };
    c.window = to_size(want("model.window"), "model.window");
    c.horizon = to_size(want("model.horizon"), "model.horizon");
    c.conv_width = to_size(want("model.conv_width"), "model.conv_width");
    c.conv_filters = to_size(want("model.conv_filters"), "model.conv_filters");
    c.rnn_hidden = to_size(want("model.rnn_hidden"), "model.rnn_hidden");
    c.skip_hidden = to_size(want("model.skip_hidden"), "model.skip_hidden");
    c.skip_length = to_size(want("model.skip_length"), "model.skip_length");
    c.ar_window = to_size(want("model.ar_window"), "model.ar_window");
    c.dropout = std::stod(want("model.dropout"));
    c.variant = variant_from_string(want("model.variant"));
    c.loss = loss_from_string(want("model.loss"));
    c.attn_score = attn_score_from_string(want("model.attn_score"));
    c.freeze_neural = want("model.freeze_neural") == "true";
    return c;
}

// ---------------------------------------------------------------------------
// Bridges
// ---------------------------------------------------------------------------

namespace {

void fill_dataset_state(Checkpoint& ckpt, const TimeSeriesDataset& dataset) {
    ckpt.n_vars = dataset.vars();
    ckpt.normalize_mode = dataset.normalize_mode();
    ckpt.scale_factors.assign(dataset.scale().begin(), dataset.scale().end());
}

} // namespace

Checkpoint make_checkpoint(const LstNetModel& model,
                           const TimeSeriesDataset& dataset) {
    Checkpoint ckpt;
    ckpt.kind = CheckpointKind::neural;
    fill_dataset_state(ckpt, dataset);
    ckpt.seed = model.seed();
    ckpt.config_text = model_config_text(model.config());
    for (const auto& [name, tensor] : model.named_parameters()) {
        NamedArray arr;
        arr.name = name;
        arr.shape = tensor.shape();
        arr.values.assign(tensor.values().begin(), tensor.values().end());
        ckpt.params.push_back(std::move(arr));
    }
    return ckpt;
}

Checkpoint make_checkpoint(const VarRidgeModel& model,
                           const TimeSeriesDataset& dataset,
                           std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.kind = CheckpointKind::var_ridge;
    fill_dataset_state(ckpt, dataset);
    ckpt.seed = seed;
    std::ostringstream os;
    os << "baseline.kind = ridge\n"
       << "baseline.lambda = " << model.ridge.lambda << '\n'
       << "baseline.order = " << model.window << '\n';
    ckpt.config_text = os.str();
    ckpt.params.push_back({"coef",
                           {model.ridge.features, model.ridge.targets},
                           model.ridge.coef});
    ckpt.params.push_back({"intercept", {model.ridge.targets},
                           model.ridge.intercept});
    return ckpt;
}

Checkpoint make_checkpoint(const UnivariateArModel& model,
                           const TimeSeriesDataset& dataset,
                           std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.kind = CheckpointKind::univariate_ar;
    fill_dataset_state(ckpt, dataset);
    ckpt.seed = seed;
    std::ostringstream os;
    os << "baseline.kind = ar\n"
       << "baseline.lambda = " << model.lambda << '\n'
       << "baseline.order = " << model.order << '\n';
    ckpt.config_text = os.str();
    ckpt.params.push_back({"coef", {model.vars, model.order}, model.coef});
    ckpt.params.push_back({"intercept", {model.vars}, model.intercept});
    return ckpt;
}

LstNetModel restore_neural(const Checkpoint& ckpt) {
    if (ckpt.kind != CheckpointKind::neural) {
        throw DataError("checkpoint does not hold a neural model");
    }
    LstNetConfig config = model_config_from_text(ckpt.config_text);
    LstNetModel model(config, ckpt.n_vars, ckpt.seed);
    if (ckpt.params.size() != model.named_parameters().size()) {
        throw DataError("checkpoint parameter count does not match the model");
    }
    for (const NamedArray& p : ckpt.params) {
        model.load_parameter(p.name, p.shape, p.values);
    }
    return model;
}

namespace {

const NamedArray& find_param(const Checkpoint& ckpt, const std::string& name) {
    for (const NamedArray& p : ckpt.params) {
        if (p.name == name) return p;
    }
    throw DataError("checkpoint is missing parameter '" + name + "'");
}

} // namespace

VarRidgeModel restore_var_ridge(const Checkpoint& ckpt) {
    if (ckpt.kind != CheckpointKind::var_ridge) {
        throw DataError("checkpoint does not hold a ridge model");
    }
    auto kv = parse_kv_text(ckpt.config_text);
    VarRidgeModel model;
    model.vars = ckpt.n_vars;
    model.window = to_size(kv.at("baseline.order"), "baseline.order");
    const NamedArray& coef = find_param(ckpt, "coef");
    const NamedArray& intercept = find_param(ckpt, "intercept");
    model.ridge.features = coef.shape.at(0);
    model.ridge.targets = coef.shape.at(1);
    model.ridge.coef = coef.values;
    model.ridge.intercept = intercept.values;
    model.ridge.lambda = std::stod(kv.at("baseline.lambda"));
    if (model.ridge.features != model.window * model.vars) {
        throw DataError("ridge checkpoint feature count is inconsistent");
    }
    return model;
}

UnivariateArModel restore_univariate_ar(const Checkpoint& ckpt) {
    if (ckpt.kind != CheckpointKind::univariate_ar) {
        throw DataError("checkpoint does not hold an AR model");
    }
    auto kv = parse_kv_text(ckpt.config_text);
    UnivariateArModel model;
    model.vars = ckpt.n_vars;
    model.order = to_size(kv.at("baseline.order"), "baseline.order");
    model.lambda = std::stod(kv.at("baseline.lambda"));
    const NamedArray& coef = find_param(ckpt, "coef");
    const NamedArray& intercept = find_param(ckpt, "intercept");
    if (coef.shape != Shape{model.vars, model.order}) {
        throw DataError("AR checkpoint coefficient shape is inconsistent");
    }
    model.coef = coef.values;
    model.intercept = intercept.values;
    return model;
}

} // namespace lstnet
