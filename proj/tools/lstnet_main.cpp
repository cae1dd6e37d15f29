// SPDX-License-Identifier: Apache-2.0
//
// lstnet: train, evaluate and analyze LSTNet-style multivariate time-series
// forecasters from the command line.

#include "lstnet/baselines.hpp"
#include "lstnet/checkpoint.hpp"
#include "lstnet/data.hpp"
#include "lstnet/errors.hpp"
#include "lstnet/eval.hpp"
#include "lstnet/model.hpp"
#include "lstnet/optim.hpp"
#include "lstnet/run_config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lstnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::string dataset;
    std::string out;
    std::string variant;
    std::string normalize;
    std::string checkpoint;
    std::string part;
    std::optional<std::size_t> horizon;
    std::optional<std::uint64_t> seed;
    bool overwrite = false;
    bool trace = false;
};

void add_common_options(CLI::App* cmd, CommonFlags& flags,
                        bool seed_is_simulation = false) {
    cmd->add_option("--config", flags.config_file,
                    "Declarative config file (flat dotted keys)");
    cmd->add_option("--set", flags.sets,
                    "Override any config key, e.g. --set model.window=64")
        ->take_all();
    cmd->add_option("--dataset", flags.dataset, "Dataset file path");
    cmd->add_option("--horizon", flags.horizon, "Forecast horizon h");
    cmd->add_option("--variant", flags.variant,
                    "Model variant: skip|attn|no_skip|no_cnn|no_ar|gru_only");
    cmd->add_option("--seed", flags.seed,
                    seed_is_simulation ? "Generator seed" : "Training seed");
    cmd->add_option("--out", flags.out, "Output directory");
    cmd->add_flag("--overwrite", flags.overwrite,
                  "Replace existing output artifacts");
    cmd->add_option("--normalize", flags.normalize,
                    "Normalization mode: max|none")
        ->check(CLI::IsMember({"max", "none"}));
}

RunConfig build_config(const CommonFlags& flags, bool seed_is_simulation) {
    RunConfig cfg = flags.config_file.empty()
                        ? RunConfig()
                        : RunConfig::from_file(flags.config_file);
    for (const std::string& kv : flags.sets) {
        auto [k, v] = parse_override(kv);
        cfg.set(k, v);
    }
    // named flags win over --set and the file
    if (!flags.dataset.empty()) cfg.set("dataset.path", flags.dataset);
    if (flags.horizon) cfg.set("model.horizon", std::to_string(*flags.horizon));
    if (!flags.variant.empty()) cfg.set("model.variant", flags.variant);
    if (flags.seed) {
        cfg.set(seed_is_simulation ? "simulate.seed" : "train.seed",
                std::to_string(*flags.seed));
    }
    if (!flags.out.empty()) cfg.set("out.dir", flags.out);
    if (flags.overwrite) cfg.set("out.overwrite", "true");
    if (!flags.normalize.empty()) cfg.set("normalize.mode", flags.normalize);
    if (!flags.checkpoint.empty()) cfg.set("checkpoint.path", flags.checkpoint);
    if (!flags.part.empty()) cfg.set("eval.part", flags.part);
    if (flags.trace) cfg.set("eval.trace", "true");
    cfg.validate();
    return cfg;
}

fs::path require_out_dir(const RunConfig& cfg) {
    const std::string dir = cfg.str("out.dir");
    if (dir.empty()) {
        throw ConfigError("this command writes artifacts; pass --out or set "
                          "out.dir");
    }
    fs::create_directories(dir);
    return dir;
}

/// Refuses to clobber an existing artifact unless out.overwrite is set.
void guard_artifact(const RunConfig& cfg, const fs::path& path) {
    if (!cfg.flag("out.overwrite") && fs::exists(path)) {
        throw ConfigError("output " + path.string() +
                          " already exists; pass --overwrite to replace it");
    }
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
        if (!f) throw DataError("cannot write " + tmp.string());
        f << content;
        if (!f) throw DataError("short write on " + tmp.string());
    }
    fs::rename(tmp, path);
}

void echo_effective_config(const RunConfig& cfg, const fs::path& out_dir) {
    write_file_atomic(out_dir / "effective_config.txt", cfg.effective_text());
}

TimeSeriesDataset load_configured_dataset(const RunConfig& cfg) {
    const std::string path = cfg.str("dataset.path");
    if (path.empty()) {
        throw ConfigError("dataset.path is required (or pass --dataset)");
    }
    TimeSeriesDataset ds = load_dataset(path, cfg.str("dataset.delimiter")[0]);
    if (!cfg.str("dataset.name").empty() ||
        !cfg.str("dataset.interval").empty()) {
        const std::string name = cfg.str("dataset.name").empty()
                                     ? ds.name()
                                     : cfg.str("dataset.name");
        ds = TimeSeriesDataset(ds.rows(), ds.vars(),
                               {ds.values().begin(), ds.values().end()}, name,
                               cfg.str("dataset.interval"));
    }
    return ds;
}

json report_to_json(const EvalReport& report, const std::string& part) {
    json j;
    j["method"] = report.method;
    j["dataset"] = report.dataset;
    j["part"] = part;
    j["horizon"] = report.horizon;
    j["scale"] = to_string(report.scale);
    j["rse"] = report.rse ? json(*report.rse) : json(nullptr);
    j["corr"] = report.corr ? json(*report.corr) : json(nullptr);
    j["excluded_vars"] = report.excluded_vars;
    j["evaluated_steps"] = report.evaluated_steps;
    j["runtime_seconds"] = report.runtime_seconds;
    j["degenerate"] = report.degenerate;
    if (report.degenerate) j["degenerate_reason"] = report.degenerate_reason;
    j["per_variable_corr"] = report.per_variable_corr;
    return j;
}

std::string report_to_text(const EvalReport& report, const std::string& part) {
    std::ostringstream os;
    os << "method:          " << report.method << '\n'
       << "dataset:         " << report.dataset << '\n'
       << "part:            " << part << '\n'
       << "horizon:         " << report.horizon << '\n'
       << "metric scale:    " << to_string(report.scale) << '\n';
    if (report.degenerate) {
        os << "status:          degenerate (" << report.degenerate_reason
           << ")\n";
    } else {
        os << "rse:             "
           << (report.rse ? std::to_string(*report.rse) : "n/a") << '\n'
           << "corr:            "
           << (report.corr ? std::to_string(*report.corr) : "n/a") << '\n'
           << "excluded vars:   " << report.excluded_vars << '\n';
    }
    os << "evaluated steps: " << report.evaluated_steps << '\n'
       << "runtime seconds: " << report.runtime_seconds << '\n';
    return os.str();
}

std::string part_name(DatasetPart part) {
    switch (part) {
    case DatasetPart::train: return "train";
    case DatasetPart::valid: return "valid";
    case DatasetPart::test: return "test";
    case DatasetPart::all: return "all";
    }
    return "?";
}

/// Buffered trace sink producing "t<TAB>variable<TAB>truth<TAB>prediction"
/// rows for external plotting.
class TraceBuffer {
public:
    TraceBuffer() { buffer_.precision(17); }
    std::string str() const { return buffer_.str(); }
    std::function<void(std::size_t, std::size_t, double, double)> sink() {
        return [this](std::size_t t, std::size_t v, double y, double p) {
            buffer_ << t << '\t' << v << '\t' << y << '\t' << p << '\n';
        };
    }

private:
    std::ostringstream buffer_;
};

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
    const fs::path out_dir = require_out_dir(cfg);
    const fs::path ckpt_path = out_dir / "model.ckpt";
    guard_artifact(cfg, ckpt_path);

    TimeSeriesDataset ds = load_configured_dataset(cfg);
    const SplitSpec split = cfg.split();
    ds.normalize(cfg.normalize_mode(), split);

    const std::string kind = cfg.str("baseline.kind");
    RollingEvalOptions valid_opts;
    valid_opts.scale = cfg.metric_scale();

    if (kind == "ar" || kind == "ridge") {
        const std::size_t order = cfg.size("baseline.order");
        const double lambda = cfg.number("baseline.lambda");
        const std::size_t horizon = cfg.size("model.horizon");
        Checkpoint ckpt;
        std::unique_ptr<Forecaster> forecaster;
        if (kind == "ar") {
            auto model = fit_univariate_ar(ds, order, horizon, lambda, split);
            ckpt = make_checkpoint(model, ds, cfg.u64("train.seed"));
            forecaster =
                std::make_unique<UnivariateArForecaster>(std::move(model));
        } else {
            auto model = fit_var_ridge(ds, order, horizon, lambda, split,
                                       cfg.size("baseline.max_features"));
            ckpt = make_checkpoint(model, ds, cfg.u64("train.seed"));
            forecaster = std::make_unique<VarRidgeForecaster>(std::move(model));
        }
        EvalReport valid = rolling_evaluate(*forecaster, ds, split,
                                            DatasetPart::valid, horizon,
                                            valid_opts);
        save_checkpoint(ckpt_path, ckpt);
        write_file_atomic(out_dir / "valid_report.json",
                          report_to_json(valid, "valid").dump(2) + "\n");
        write_file_atomic(out_dir / "valid_report.txt",
                          report_to_text(valid, "valid"));
        echo_effective_config(cfg, out_dir);
        std::cout << "fitted " << kind << " baseline (order=" << order
                  << ", lambda=" << lambda << ")\n"
                  << "valid rse:  " << (valid.rse ? *valid.rse : -1.0) << '\n'
                  << "checkpoint: " << ckpt_path.string() << '\n';
        return kExitOk;
    }

    guard_artifact(cfg, out_dir / "history.tsv");
    LstNetConfig model_cfg = cfg.model_config();
    LstNetModel model(model_cfg, ds.vars(), cfg.u64("train.seed"));
    TrainSchedule schedule = cfg.schedule();

    const fs::path log_tmp = out_dir / "train_log.tsv.tmp";
    TrainRun run;
    {
        std::ofstream log(log_tmp, std::ios::trunc);
        if (!log) throw DataError("cannot write " + log_tmp.string());
        log.precision(17);
        run = train(model, ds, split, schedule, cfg.u64("train.seed"), &log);
    }
    fs::rename(log_tmp, out_dir / "train_log.tsv");

    {
        std::ostringstream hist;
        hist.precision(17);
        for (const EpochStats& e : run.history) {
            hist << e.epoch << '\t' << e.train_loss << '\t' << e.valid_rse
                 << '\t' << e.valid_corr << '\n';
        }
        write_file_atomic(out_dir / "history.tsv", hist.str());
    }
    save_checkpoint(ckpt_path, make_checkpoint(model, ds));

    NeuralForecaster forecaster(model);
    EvalReport valid = rolling_evaluate(forecaster, ds, split,
                                        DatasetPart::valid, model_cfg.horizon,
                                        valid_opts);
    write_file_atomic(out_dir / "valid_report.json",
                      report_to_json(valid, "valid").dump(2) + "\n");
    write_file_atomic(out_dir / "valid_report.txt",
                      report_to_text(valid, "valid"));
    echo_effective_config(cfg, out_dir);

    std::cout << "trained " << to_string(model_cfg.variant) << " for "
              << run.history.size() << " epochs (" << run.stop_reason << ")\n"
              << "best epoch: " << run.best_epoch << "  valid rse "
              << run.best_valid_rse << '\n'
              << "checkpoint: " << ckpt_path.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate / forecast
// ---------------------------------------------------------------------------

/// Keeps a restored neural model alive alongside its forecaster.
struct LoadedForecaster {
    std::unique_ptr<LstNetModel> model;
    std::unique_ptr<Forecaster> forecaster;
    std::size_t horizon_hint = 0;
};

LoadedForecaster load_forecaster(const Checkpoint& ckpt) {
    LoadedForecaster out;
    switch (ckpt.kind) {
    case CheckpointKind::neural:
        out.model = std::make_unique<LstNetModel>(restore_neural(ckpt));
        out.forecaster = std::make_unique<NeuralForecaster>(*out.model);
        out.horizon_hint = out.model->config().horizon;
        break;
    case CheckpointKind::var_ridge:
        out.forecaster =
            std::make_unique<VarRidgeForecaster>(restore_var_ridge(ckpt));
        break;
    case CheckpointKind::univariate_ar:
        out.forecaster = std::make_unique<UnivariateArForecaster>(
            restore_univariate_ar(ckpt));
        break;
    }
    return out;
}

int run_evaluation(const RunConfig& cfg, bool always_trace) {
    const std::string ckpt_path = cfg.str("checkpoint.path");
    if (ckpt_path.empty()) {
        throw ConfigError("checkpoint.path is required (or pass --checkpoint)");
    }
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TimeSeriesDataset ds = load_configured_dataset(cfg);
    if (ds.vars() != ckpt.n_vars) {
        throw DataError("checkpoint was built for " +
                        std::to_string(ckpt.n_vars) +
                        " variables but the dataset has " +
                        std::to_string(ds.vars()));
    }
    // evaluation always reuses the normalization captured at training time
    ds.set_scale(ckpt.normalize_mode, ckpt.scale_factors);

    LoadedForecaster loaded = load_forecaster(ckpt);
    const std::size_t horizon =
        cfg.is_set("model.horizon") || !loaded.horizon_hint
            ? cfg.size("model.horizon")
            : loaded.horizon_hint;
    const SplitSpec split = cfg.split();
    const DatasetPart part = cfg.eval_part();

    RollingEvalOptions opts;
    opts.scale = cfg.metric_scale();
    TraceBuffer trace;
    const bool want_trace = always_trace || cfg.flag("eval.trace");
    if (want_trace) opts.trace = trace.sink();
    if (want_trace && cfg.str("out.dir").empty()) {
        throw ConfigError("tracing requires an output directory (--out)");
    }

    EvalReport report = rolling_evaluate(*loaded.forecaster, ds, split, part,
                                         horizon, opts);

    std::cout << report_to_text(report, part_name(part));
    if (!cfg.str("out.dir").empty()) {
        const fs::path out_dir = require_out_dir(cfg);
        const std::string stem = part_name(part);
        guard_artifact(cfg, out_dir / ("report_" + stem + ".json"));
        write_file_atomic(out_dir / ("report_" + stem + ".json"),
                          report_to_json(report, stem).dump(2) + "\n");
        write_file_atomic(out_dir / ("report_" + stem + ".txt"),
                          report_to_text(report, stem));
        if (want_trace) {
            write_file_atomic(out_dir / ("trace_" + stem + ".tsv"),
                              trace.str());
        }
        echo_effective_config(cfg, out_dir);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
    const fs::path out_dir = require_out_dir(cfg);
    guard_artifact(cfg, out_dir / "series.tsv");

    const std::size_t order = cfg.size("simulate.order");
    const std::size_t period = cfg.size("simulate.period");
    const double mu0 = cfg.number("simulate.mu0");
    const std::size_t length = cfg.size("simulate.length");
    const std::uint64_t seed = cfg.u64("simulate.seed");

    ScaleShiftSeries series =
        generate_scale_shift_ar(order, period, mu0, length, seed);

    std::ostringstream two_col;
    two_col.precision(17);
    std::ostringstream one_col;
    one_col.precision(17);
    for (std::size_t t = 0; t < series.values.size(); ++t) {
        two_col << t << '\t' << series.values[t] << '\n';
        one_col << series.values[t] << '\n';
    }
    write_file_atomic(out_dir / "series.tsv", two_col.str());
    write_file_atomic(out_dir / "train_ready.txt", one_col.str());

    json meta;
    meta["order"] = order;
    meta["period"] = period;
    meta["mu0"] = mu0;
    meta["length"] = length;
    meta["seed"] = seed;
    meta["weights"] = series.weights;
    if (mu0 == 0.0) {
        // stationarity sanity: block means of a drift-free series
        const std::size_t blocks = std::min<std::size_t>(
            8, std::max<std::size_t>(1, series.values.size() / period));
        std::vector<double> means;
        for (std::size_t b = 0; b < blocks; ++b) {
            double m = 0.0;
            for (std::size_t t = 0; t < period; ++t) {
                m += series.values[b * period + t];
            }
            means.push_back(m / static_cast<double>(period));
        }
        meta["stationarity_block_means"] = means;
    }
    write_file_atomic(out_dir / "metadata.json", meta.dump(2) + "\n");
    echo_effective_config(cfg, out_dir);

    std::cout << "generated " << series.values.size() << " samples (order "
              << order << ", period " << period << ", mu0 " << mu0 << ")\n"
              << "series:   " << (out_dir / "series.tsv").string() << '\n'
              << "loadable: " << (out_dir / "train_ready.txt").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// autocorr
// ---------------------------------------------------------------------------

int cmd_autocorr(const RunConfig& cfg) {
    const fs::path out_dir = require_out_dir(cfg);
    guard_artifact(cfg, out_dir / "acf.tsv");

    TimeSeriesDataset ds = load_configured_dataset(cfg);
    const std::size_t var = cfg.size("autocorr.variable");
    if (var >= ds.vars()) {
        throw ConfigError("autocorr.variable " + std::to_string(var) +
                          " out of range: dataset has " +
                          std::to_string(ds.vars()) + " variables");
    }
    const std::size_t max_lag = cfg.size("autocorr.max_lag");
    auto r = autocorrelation(ds.variable(var), max_lag);

    std::ostringstream out;
    out.precision(17);
    for (std::size_t tau = 0; tau < r.size(); ++tau) {
        out << tau << '\t' << r[tau] << '\n';
    }
    write_file_atomic(out_dir / "acf.tsv", out.str());
    echo_effective_config(cfg, out_dir);
    std::cout << "wrote R(0.." << max_lag << ") for variable " << var << " to "
              << (out_dir / "acf.tsv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

std::vector<GridRow> read_grid_table(const fs::path& path) {
    std::vector<GridRow> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key, rse_str, params_str, status;
        if (!std::getline(ls, key, '\t') || !std::getline(ls, rse_str, '\t') ||
            !std::getline(ls, params_str, '\t') ||
            !std::getline(ls, status)) {
            continue;
        }
        GridRow row;
        std::istringstream ks(key);
        std::string setting;
        while (std::getline(ks, setting, ',')) {
            const auto eq = setting.find('=');
            if (eq == std::string::npos) continue;
            row.assignment.settings.emplace_back(setting.substr(0, eq),
                                                 setting.substr(eq + 1));
        }
        if (rse_str != "NA") row.outcome.valid_rse = std::stod(rse_str);
        row.outcome.parameter_count =
            static_cast<std::size_t>(std::stoull(params_str));
        if (status != "ok") row.outcome.diagnostics = status;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string grid_row_line(const GridRow& row) {
    std::ostringstream os;
    os.precision(17);
    os << row.assignment.key() << '\t';
    if (row.outcome.valid_rse) {
        os << *row.outcome.valid_rse;
    } else {
        os << "NA";
    }
    os << '\t' << row.outcome.parameter_count << '\t'
       << (row.outcome.diagnostics.empty() ? "ok" : row.outcome.diagnostics)
       << '\n';
    return os.str();
}

int cmd_grid(const RunConfig& cfg) {
    const fs::path out_dir = require_out_dir(cfg);
    const fs::path table_path = out_dir / "grid_table.tsv";

    GridSpec spec;
    spec.axes = cfg.grid_axes();
    spec.max_configs = cfg.size("grid.max_configs");
    if (spec.axes.empty()) {
        throw ConfigError("grid search needs at least one grid.<key> axis");
    }
    std::cout << "grid over " << spec.axes.size() << " axes, "
              << spec.cartesian_size() << " configurations (cap "
              << spec.max_configs << ")\n";

    // an existing table is resumable state, not a conflict
    std::vector<GridRow> precomputed;
    if (fs::exists(table_path)) {
        if (cfg.flag("out.overwrite")) {
            fs::remove(table_path);
        } else {
            precomputed = read_grid_table(table_path);
            if (!precomputed.empty()) {
                std::cout << "resuming: " << precomputed.size()
                          << " rows already computed\n";
            }
        }
    }

    TimeSeriesDataset raw = load_configured_dataset(cfg);

    std::ofstream progress(table_path, std::ios::app);
    if (!progress) throw DataError("cannot write " + table_path.string());
    progress.precision(17);

    auto recipe = [&](const GridAssignment& assignment) {
        RunConfig point = cfg;
        for (const auto& [k, v] : assignment.settings) point.set(k, v);
        GridOutcome outcome;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            point.validate();
            TimeSeriesDataset ds = raw;
            const SplitSpec split = point.split();
            ds.normalize(point.normalize_mode(), split);
            RollingEvalOptions opts;
            opts.scale = point.metric_scale();
            const std::string kind = point.str("baseline.kind");
            if (kind == "ar") {
                auto model = fit_univariate_ar(
                    ds, point.size("baseline.order"),
                    point.size("model.horizon"),
                    point.number("baseline.lambda"), split);
                UnivariateArForecaster fc(model);
                auto report =
                    rolling_evaluate(fc, ds, split, DatasetPart::valid,
                                     point.size("model.horizon"), opts);
                outcome.valid_rse = report.rse;
                outcome.parameter_count = ds.vars() * (model.order + 1);
            } else if (kind == "ridge") {
                auto model = fit_var_ridge(
                    ds, point.size("baseline.order"),
                    point.size("model.horizon"),
                    point.number("baseline.lambda"), split,
                    point.size("baseline.max_features"));
                VarRidgeForecaster fc(model);
                auto report =
                    rolling_evaluate(fc, ds, split, DatasetPart::valid,
                                     point.size("model.horizon"), opts);
                outcome.valid_rse = report.rse;
                outcome.parameter_count =
                    model.ridge.coef.size() + model.ridge.intercept.size();
            } else {
                LstNetConfig mc = point.model_config();
                LstNetModel model(mc, ds.vars(), point.u64("train.seed"));
                TrainSchedule schedule = point.schedule();
                TrainRun run =
                    train(model, ds, split, schedule, point.u64("train.seed"));
                outcome.valid_rse = run.best_valid_rse;
                outcome.parameter_count = model.parameter_count();
            }
        } catch (const std::exception& e) {
            outcome.valid_rse.reset();
            outcome.diagnostics = e.what();
        }
        outcome.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        GridRow row;
        row.assignment = assignment;
        row.outcome = outcome;
        progress << grid_row_line(row);
        progress.flush();
        return outcome;
    };

    GridResult result = grid_search(spec, recipe, precomputed, &std::cout);
    progress.close();

    // canonical table in enumeration order
    std::ostringstream table;
    table.precision(17);
    table << "# assignment\tvalid_rse\tparameters\tstatus\n";
    for (const GridRow& row : result.table) table << grid_row_line(row);
    write_file_atomic(table_path, table.str());

    const GridRow& best = result.table[result.best_index];
    RunConfig best_cfg = cfg;
    for (const auto& [k, v] : best.assignment.settings) best_cfg.set(k, v);
    write_file_atomic(out_dir / "best_config.txt", best_cfg.effective_text());
    echo_effective_config(cfg, out_dir);

    std::cout << "best: " << best.assignment.key() << " (valid rse "
              << *best.outcome.valid_rse << ", "
              << best.outcome.parameter_count << " parameters)\n"
              << (result.truncated ? "note: grid truncated at the cap\n" : "")
              << "table: " << table_path.string() << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTNet-style multivariate time-series forecasting toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;

    CLI::App* train_cmd =
        app.add_subcommand("train", "Fit a model and write a checkpoint");
    add_common_options(train_cmd, flags);

    CLI::App* eval_cmd = app.add_subcommand(
        "evaluate", "Rolling evaluation of a checkpoint on a dataset part");
    add_common_options(eval_cmd, flags);
    eval_cmd->add_option("--checkpoint", flags.checkpoint, "Checkpoint path");
    eval_cmd->add_option("--part", flags.part,
                         "Dataset part: train|valid|test");
    eval_cmd->add_flag("--trace", flags.trace,
                       "Also write per-timestamp prediction traces");

    CLI::App* forecast_cmd = app.add_subcommand(
        "forecast", "Emit per-timestamp prediction traces for a checkpoint");
    add_common_options(forecast_cmd, flags);
    forecast_cmd->add_option("--checkpoint", flags.checkpoint,
                             "Checkpoint path");
    forecast_cmd->add_option("--part", flags.part,
                             "Dataset part: train|valid|test");

    CLI::App* sim_cmd = app.add_subcommand(
        "simulate", "Generate a scale-shift autoregressive series");
    add_common_options(sim_cmd, flags, /*seed_is_simulation=*/true);

    CLI::App* acf_cmd = app.add_subcommand(
        "autocorr", "Autocorrelation diagnostics for one variable");
    add_common_options(acf_cmd, flags);

    CLI::App* grid_cmd = app.add_subcommand(
        "grid", "Validation-driven grid search over config axes");
    add_common_options(grid_cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg = build_config(flags, sim_cmd->parsed());
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (eval_cmd->parsed()) return run_evaluation(cfg, false);
        if (forecast_cmd->parsed()) return run_evaluation(cfg, true);
        if (sim_cmd->parsed()) return cmd_simulate(cfg);
        if (acf_cmd->parsed()) return cmd_autocorr(cfg);
        if (grid_cmd->parsed()) return cmd_grid(cfg);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ShapeError& e) {
        std::cerr << "numeric error (shape): " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "numeric error (internal): " << e.what() << '\n';
        return kExitNumeric;
    }
}
