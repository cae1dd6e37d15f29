// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/data.hpp"
#include "lstnet/layers.hpp"
#include "lstnet/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lstnet {

/// Architecture variants: `skip` is the full model, `attn` replaces the
/// recurrent-skip path with temporal attention, the rest are ablations.
/// gru_only is the plain RNN-GRU baseline (raw input -> GRU -> affine map,
/// no conv, no AR).
enum class Variant { skip, attn, no_skip, no_cnn, no_ar, gru_only };

enum class LossKind { l2, l1 };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
LossKind loss_from_string(const std::string& s);
std::string to_string(LossKind k);
AttnScoreKind attn_score_from_string(const std::string& s);
std::string to_string(AttnScoreKind k);

struct LstNetConfig {
    std::size_t window = 168;     // q
    std::size_t horizon = 3;      // h
    std::size_t conv_width = 6;   // omega
    std::size_t conv_filters = 100;
    std::size_t rnn_hidden = 100;
    std::size_t skip_hidden = 50;
    std::size_t skip_length = 24; // p
    std::size_t ar_window = 24;   // q^ar
    double dropout = 0.2;
    Variant variant = Variant::skip;
    LossKind loss = LossKind::l2;
    AttnScoreKind attn_score = AttnScoreKind::dot;
    /// Neural weights pinned at zero and excluded from training; with an
    /// AR-bearing variant this trains the AR component alone.
    bool freeze_neural = false;

    bool uses_conv() const;
    bool uses_skip() const;
    bool uses_attention() const;
    bool uses_ar() const;

    void validate(std::size_t n_vars) const;
};

/// Shared-coefficient autoregressive highway: one weight vector applied to
/// every variable's own recent values.
struct ArParams {
    Tensor weight; // (ar_window, 1)
    Tensor bias;   // scalar
};

struct OutputLayerParams { // gru_only head
    Tensor weight; // (rnn_hidden, n)
    Tensor bias;   // (n)
};

class LstNetModel {
public:
    LstNetModel(LstNetConfig config, std::size_t n_vars, std::uint64_t seed);

    /// Batched prediction for time t+h: neural component plus AR highway
    /// per the variant. Training mode applies dropout using `rng`.
    Tensor forward(const WindowBatch& batch, bool training,
                   std::mt19937_64& rng) const;

    /// Eval-mode convenience (no dropout, no graph).
    std::vector<double> predict(const WindowBatch& batch) const;

    const LstNetConfig& config() const { return config_; }
    std::size_t n_vars() const { return n_vars_; }
    std::uint64_t seed() const { return seed_; }

    /// Trainable leaves only; frozen components are excluded.
    const std::vector<Tensor>& parameters() const { return trainable_; }
    /// Every parameter with its stable checkpoint name, frozen included.
    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
        return named_;
    }
    std::size_t parameter_count() const; // trainable scalars

    const std::optional<ArParams>& ar() const { return ar_; }
    GruParams& gru_params() { return *gru_; }
    SkipGruParams& skip_params() { return *skip_; }

    /// Overwrites one named parameter's values (checkpoint restore).
    void load_parameter(const std::string& name, const Shape& shape,
                        std::span<const double> values);

private:
    LstNetConfig config_;
    std::size_t n_vars_ = 0;
    std::uint64_t seed_ = 0;

    std::optional<ConvLayerParams> conv_;
    std::optional<GruParams> gru_;
    std::optional<SkipGruParams> skip_;
    std::optional<AttentionParams> attn_;
    std::optional<DenseCombinerParams> dense_;
    std::optional<OutputLayerParams> out_;
    std::optional<ArParams> ar_;

    std::vector<std::pair<std::string, Tensor>> named_;
    std::vector<Tensor> trainable_;

    Tensor neural_forward(const WindowBatch& batch, bool training,
                          std::mt19937_64& rng) const;
    Tensor ar_forward(const WindowBatch& batch) const;
    void register_params();
};

/// Sum of squared errors over the batch (Frobenius norm squared).
Tensor loss_l2(const Tensor& prediction, const Tensor& target);
/// Sum of absolute errors over the batch.
Tensor loss_l1(const Tensor& prediction, const Tensor& target);
Tensor compute_loss(LossKind kind, const Tensor& prediction,
                    const Tensor& target);

/// coefficient * ||W^ar||^2 as a graph scalar; a plain zero scalar for
/// variants without an AR component. Negative coefficients are rejected.
Tensor l2_regularize_ar(const LstNetModel& model, double coefficient);

} // namespace lstnet
