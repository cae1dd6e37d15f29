// SPDX-License-Identifier: Apache-2.0
#include "lstnet/model.hpp"

#include "lstnet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace lstnet {

Variant variant_from_string(const std::string& s) {
    if (s == "skip") return Variant::skip;
    if (s == "attn") return Variant::attn;
    if (s == "no_skip") return Variant::no_skip;
    if (s == "no_cnn") return Variant::no_cnn;
    if (s == "no_ar") return Variant::no_ar;
    if (s == "gru_only") return Variant::gru_only;
    throw ConfigError("unknown variant '" + s +
                      "' (expected skip|attn|no_skip|no_cnn|no_ar|gru_only)");
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::skip: return "skip";
    case Variant::attn: return "attn";
    case Variant::no_skip: return "no_skip";
    case Variant::no_cnn: return "no_cnn";
    case Variant::no_ar: return "no_ar";
    case Variant::gru_only: return "gru_only";
    }
    return "?";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "l2" || s == "L2") return LossKind::l2;
    if (s == "l1" || s == "L1") return LossKind::l1;
    throw ConfigError("unknown loss '" + s + "' (expected l2|l1)");
}

std::string to_string(LossKind k) {
    return k == LossKind::l2 ? "l2" : "l1";
}

AttnScoreKind attn_score_from_string(const std::string& s) {
    if (s == "dot") return AttnScoreKind::dot;
    if (s == "cosine") return AttnScoreKind::cosine;
    if (s == "mlp") return AttnScoreKind::mlp;
    throw ConfigError("unknown attention score '" + s +
                      "' (expected dot|cosine|mlp)");
}

std::string to_string(AttnScoreKind k) {
    switch (k) {
    case AttnScoreKind::dot: return "dot";
    case AttnScoreKind::cosine: return "cosine";
    case AttnScoreKind::mlp: return "mlp";
    }
    return "?";
}

bool LstNetConfig::uses_conv() const {
    return variant == Variant::skip || variant == Variant::attn ||
           variant == Variant::no_skip || variant == Variant::no_ar;
}

bool LstNetConfig::uses_skip() const {
    return variant == Variant::skip || variant == Variant::no_cnn ||
           variant == Variant::no_ar;
}

bool LstNetConfig::uses_attention() const { return variant == Variant::attn; }

bool LstNetConfig::uses_ar() const {
    return variant != Variant::no_ar && variant != Variant::gru_only;
}

void LstNetConfig::validate(std::size_t n_vars) const {
    if (n_vars == 0) throw ConfigError("model needs at least one variable");
    if (window == 0) throw ConfigError("window must be >= 1");
    if (horizon == 0) throw ConfigError("horizon must be >= 1");
    if (rnn_hidden == 0) throw ConfigError("rnn_hidden must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("dropout must be in [0, 1)");
    }
    if (uses_conv()) {
        if (conv_width == 0 || conv_filters == 0) {
            throw ConfigError("conv_width and conv_filters must be >= 1");
        }
        if (window < conv_width) {
            throw ConfigError("window q=" + std::to_string(window) +
                              " must be >= conv width " +
                              std::to_string(conv_width));
        }
    }
    if (uses_skip()) {
        if (skip_length == 0 || skip_hidden == 0) {
            throw ConfigError("skip_length and skip_hidden must be >= 1");
        }
        if (window < skip_length) {
            throw ConfigError("window q=" + std::to_string(window) +
                              " must be >= skip length p=" +
                              std::to_string(skip_length));
        }
    }
    if (uses_attention() && window < 2) {
        throw ConfigError("attention variant needs window >= 2");
    }
    if (uses_ar()) {
        if (ar_window == 0) throw ConfigError("ar_window must be >= 1");
        if (ar_window > window) {
            throw ConfigError("ar_window q^ar=" + std::to_string(ar_window) +
                              " must be <= window q=" + std::to_string(window));
        }
    }
    if (freeze_neural && !uses_ar()) {
        throw ConfigError("freeze_neural with variant " + to_string(variant) +
                          " leaves nothing to train");
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

/// Replaces freshly initialized weights with frozen zeros.
void freeze_zero(Tensor& t) {
    t = Tensor::zeros(t.shape(), /*requires_grad=*/false);
}

} // namespace

LstNetModel::LstNetModel(LstNetConfig config, std::size_t n_vars,
                         std::uint64_t seed)
    : config_(config), n_vars_(n_vars), seed_(seed) {
    config_.validate(n_vars);
    std::mt19937_64 rng(seed);

    const std::size_t rnn_input =
        config_.uses_conv() ? config_.conv_filters : n_vars;

    if (config_.uses_conv()) {
        conv_ = ConvLayerParams::init(config_.conv_width, n_vars,
                                      config_.conv_filters, rng);
    }
    gru_ = GruParams::init(rnn_input, config_.rnn_hidden, rng);
    if (config_.uses_skip()) {
        skip_ = SkipGruParams::init(rnn_input, config_.skip_hidden,
                                    config_.skip_length, rng);
        dense_ = DenseCombinerParams::init(config_.rnn_hidden,
                                           config_.skip_hidden,
                                           config_.skip_length, n_vars, rng);
    } else if (config_.uses_attention()) {
        attn_ = AttentionParams::init(config_.attn_score, config_.rnn_hidden,
                                      n_vars, rng);
    } else if (config_.variant == Variant::no_skip) {
        dense_ = DenseCombinerParams::init(config_.rnn_hidden,
                                           config_.skip_hidden, 0, n_vars, rng);
    } else { // gru_only
        out_ = OutputLayerParams{
            init_weight({config_.rnn_hidden, n_vars}, config_.rnn_hidden, rng),
            Tensor::zeros({n_vars}, true)};
    }
    if (config_.uses_ar()) {
        ar_ = ArParams{init_weight({config_.ar_window, 1}, config_.ar_window, rng),
                       Tensor::scalar(0.0, true)};
    }

    if (config_.freeze_neural) {
        if (conv_) {
            freeze_zero(conv_->weight);
            freeze_zero(conv_->bias);
        }
        auto freeze_gru = [](GruParams& g) {
            freeze_zero(g.w_xr);
            freeze_zero(g.w_xu);
            freeze_zero(g.w_xc);
            freeze_zero(g.w_hr);
            freeze_zero(g.w_hu);
            freeze_zero(g.w_hc);
            freeze_zero(g.b_r);
            freeze_zero(g.b_u);
            freeze_zero(g.b_c);
        };
        freeze_gru(*gru_);
        if (skip_) freeze_gru(skip_->gru);
        if (dense_) {
            freeze_zero(dense_->w_rnn);
            for (auto& w : dense_->w_skip) freeze_zero(w);
            freeze_zero(dense_->bias);
        }
        if (attn_) {
            freeze_zero(attn_->w_out);
            freeze_zero(attn_->b_out);
            if (attn_->score == AttnScoreKind::mlp) {
                freeze_zero(attn_->w_score);
                freeze_zero(attn_->b_score);
                freeze_zero(attn_->v_score);
            }
        }
        if (out_) {
            freeze_zero(out_->weight);
            freeze_zero(out_->bias);
        }
    }

    register_params();
}

void LstNetModel::register_params() {
    named_.clear();
    trainable_.clear();
    auto reg = [&](const std::string& name, const Tensor& t) {
        named_.emplace_back(name, t);
        if (t.requires_grad()) trainable_.push_back(t);
    };
    if (conv_) {
        reg("conv.weight", conv_->weight);
        reg("conv.bias", conv_->bias);
    }
    auto reg_gru = [&](const std::string& prefix, const GruParams& g) {
        reg(prefix + ".w_xr", g.w_xr);
        reg(prefix + ".w_xu", g.w_xu);
        reg(prefix + ".w_xc", g.w_xc);
        reg(prefix + ".w_hr", g.w_hr);
        reg(prefix + ".w_hu", g.w_hu);
        reg(prefix + ".w_hc", g.w_hc);
        reg(prefix + ".b_r", g.b_r);
        reg(prefix + ".b_u", g.b_u);
        reg(prefix + ".b_c", g.b_c);
    };
    reg_gru("gru", *gru_);
    if (skip_) reg_gru("skip", skip_->gru);
    if (dense_) {
        reg("dense.w_rnn", dense_->w_rnn);
        for (std::size_t i = 0; i < dense_->w_skip.size(); ++i) {
            reg("dense.w_skip." + std::to_string(i), dense_->w_skip[i]);
        }
        reg("dense.bias", dense_->bias);
    }
    if (attn_) {
        reg("attn.w_out", attn_->w_out);
        reg("attn.b_out", attn_->b_out);
        if (attn_->score == AttnScoreKind::mlp) {
            reg("attn.w_score", attn_->w_score);
            reg("attn.b_score", attn_->b_score);
            reg("attn.v_score", attn_->v_score);
        }
    }
    if (out_) {
        reg("out.weight", out_->weight);
        reg("out.bias", out_->bias);
    }
    if (ar_) {
        reg("ar.weight", ar_->weight);
        reg("ar.bias", ar_->bias);
    }
}

std::size_t LstNetModel::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : trainable_) n += t.numel();
    return n;
}

void LstNetModel::load_parameter(const std::string& name, const Shape& shape,
                                 std::span<const double> values) {
    for (auto& [pname, tensor] : named_) {
        if (pname != name) continue;
        if (tensor.shape() != shape || tensor.numel() != values.size()) {
            throw ShapeError("checkpoint parameter '" + name + "' has shape " +
                             shape_str(shape) + ", model expects " +
                             shape_str(tensor.shape()));
        }
        Tensor& t = tensor;
        auto dst = t.values_mut();
        std::copy(values.begin(), values.end(), dst.begin());
        return;
    }
    throw ShapeError("checkpoint parameter '" + name +
                     "' does not exist in this model");
}

Tensor LstNetModel::ar_forward(const WindowBatch& batch) const {
    const std::size_t b = batch.batch;
    const std::size_t n = n_vars_;
    const std::size_t q = batch.window;
    const std::size_t qar = config_.ar_window;
    // Row (s*n + i) holds variable i's most recent qar values, newest first,
    // matching W^ar_k multiplying y_{t-k,i}.
    std::vector<double> lags(b * n * qar);
    for (std::size_t s = 0; s < b; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            double* row = lags.data() + (s * n + i) * qar;
            for (std::size_t k = 0; k < qar; ++k) {
                row[k] = batch.input_at(s, q - 1 - k, i);
            }
        }
    }
    Tensor z = Tensor::from_values({b * n, qar}, std::move(lags));
    Tensor linear = add(matmul(z, ar_->weight), ar_->bias); // (b*n, 1)
    return reshape(linear, {b, n});
}

Tensor LstNetModel::neural_forward(const WindowBatch& batch, bool training,
                                   std::mt19937_64& rng) const {
    SequenceBatch seq =
        config_.uses_conv()
            ? conv_forward_batch(*conv_, batch.inputs.data(), batch.batch,
                                 batch.window, batch.vars)
            : raw_sequence_batch(batch.inputs.data(), batch.batch,
                                 batch.window, batch.vars);
    if (config_.uses_conv() && config_.dropout > 0.0) {
        seq.packed = dropout(seq.packed, config_.dropout, training, rng);
    }

    GruOutput rnn = gru_unroll(*gru_, seq);

    if (config_.variant == Variant::gru_only) {
        Tensor h = dropout(rnn.final_state(), config_.dropout, training, rng);
        return add(matmul(h, out_->weight), out_->bias);
    }
    if (config_.uses_attention()) {
        std::vector<Tensor> states = rnn.states;
        if (config_.dropout > 0.0) {
            for (auto& s : states) s = dropout(s, config_.dropout, training, rng);
        }
        return attention_combine(*attn_, states);
    }
    Tensor h_rnn = dropout(rnn.final_state(), config_.dropout, training, rng);
    if (config_.uses_skip()) {
        std::vector<Tensor> skip_states = skip_gru_unroll(*skip_, seq);
        if (config_.dropout > 0.0) {
            for (auto& s : skip_states) {
                s = dropout(s, config_.dropout, training, rng);
            }
        }
        return dense_combine(*dense_, h_rnn, skip_states);
    }
    return dense_combine(*dense_, h_rnn, {});
}

Tensor LstNetModel::forward(const WindowBatch& batch, bool training,
                            std::mt19937_64& rng) const {
    if (batch.batch == 0) throw ShapeError("forward: empty batch");
    if (batch.vars != n_vars_) {
        throw ShapeError("forward: batch has " + std::to_string(batch.vars) +
                         " variables, model expects " +
                         std::to_string(n_vars_));
    }
    if (batch.window != config_.window) {
        throw ShapeError("forward: batch window " +
                         std::to_string(batch.window) +
                         " does not match config window " +
                         std::to_string(config_.window));
    }
    // A frozen-zero neural path contributes exactly zero (zero weights and
    // biases with zero initial hidden state), so it is skipped outright.
    Tensor neural;
    if (!config_.freeze_neural) {
        neural = neural_forward(batch, training, rng);
    }
    Tensor ar_part;
    if (config_.uses_ar()) {
        ar_part = ar_forward(batch);
    }
    if (neural.defined() && ar_part.defined()) return add(neural, ar_part);
    if (neural.defined()) return neural;
    return ar_part;
}

std::vector<double> LstNetModel::predict(const WindowBatch& batch) const {
    NoGradGuard guard;
    std::mt19937_64 rng(0); // unused in eval mode
    Tensor y = forward(batch, /*training=*/false, rng);
    return {y.values().begin(), y.values().end()};
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

namespace {

void check_loss_shapes(const Tensor& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape()) {
        throw ShapeError("loss: prediction " + shape_str(prediction.shape()) +
                         " vs target " + shape_str(target.shape()));
    }
}

} // namespace

Tensor loss_l2(const Tensor& prediction, const Tensor& target) {
    check_loss_shapes(prediction, target);
    return sum(square(sub(prediction, target)));
}

Tensor loss_l1(const Tensor& prediction, const Tensor& target) {
    check_loss_shapes(prediction, target);
    return sum(abs(sub(prediction, target)));
}

Tensor compute_loss(LossKind kind, const Tensor& prediction,
                    const Tensor& target) {
    return kind == LossKind::l2 ? loss_l2(prediction, target)
                                : loss_l1(prediction, target);
}

Tensor l2_regularize_ar(const LstNetModel& model, double coefficient) {
    if (coefficient < 0.0) {
        throw ConfigError("AR regularization coefficient must be >= 0");
    }
    if (!model.ar() || coefficient == 0.0) return Tensor::scalar(0.0);
    return mul(Tensor::scalar(coefficient), sum(square(model.ar()->weight)));
}

} // namespace lstnet
