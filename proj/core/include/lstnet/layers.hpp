// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "lstnet/tensor.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace lstnet {

/// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weight init; biases zero.
Tensor init_weight(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

/// A batch of step inputs packed time-major: row t*batch + s of `packed`
/// is the step-t input of sample s. step(t) slices one (batch x dim) matrix.
struct SequenceBatch {
    Tensor packed; // (steps*batch, dim)
    std::size_t steps = 0;
    std::size_t batch = 0;
    std::size_t dim = 0;

    Tensor step(std::size_t t) const;
};

// ---------------------------------------------------------------------------
// Temporal convolution (causal, left zero-padded, no pooling)
// ---------------------------------------------------------------------------

struct ConvLayerParams {
    std::size_t width = 0;   // filter width over time
    std::size_t vars = 0;    // filter height = variable count
    std::size_t filters = 0;
    // Row i*vars + j of weight is the coefficient of variable j at relative
    // time offset i inside the receptive field (offset 0 = oldest column).
    Tensor weight; // (width*vars, filters)
    Tensor bias;   // (filters)

    static ConvLayerParams init(std::size_t width, std::size_t vars,
                                std::size_t filters, std::mt19937_64& rng);
    void validate(std::size_t dataset_vars) const;
};

/// Single-window form: X is (vars x q), output (filters x q) with
/// output column t depending only on input columns <= t.
Tensor conv_forward(const ConvLayerParams& params, const Tensor& window);

/// Batched form over raw window data (see WindowBatch layout in data.hpp);
/// the im2col gather happens outside the graph since windows carry no
/// gradient. Produces relu(im2col * W + b) packed time-major.
SequenceBatch conv_forward_batch(const ConvLayerParams& params,
                                 const double* inputs, std::size_t batch,
                                 std::size_t window, std::size_t vars);

/// Raw windows as a SequenceBatch (dim = vars), for variants with no conv.
SequenceBatch raw_sequence_batch(const double* inputs, std::size_t batch,
                                 std::size_t window, std::size_t vars);

// ---------------------------------------------------------------------------
// GRU recurrence (relu hidden update)
// ---------------------------------------------------------------------------

struct GruParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    Tensor w_xr, w_xu, w_xc; // (input_dim, hidden)
    Tensor w_hr, w_hu, w_hc; // (hidden, hidden)
    Tensor b_r, b_u, b_c;    // (hidden)

    static GruParams init(std::size_t input_dim, std::size_t hidden,
                          std::mt19937_64& rng);
};

/// One step: x_t (batch x input_dim), h_prev (batch x hidden) -> h_t.
/// Gates r,u = sigmoid(..) are strictly inside (0,1); the candidate state
/// uses relu; h_t = (1-u) h_prev + u c_t.
Tensor gru_step(const GruParams& params, const Tensor& x_t,
                const Tensor& h_prev);

struct GruOutput {
    std::vector<Tensor> states; // one (batch x hidden) per step
    Tensor final_state() const { return states.back(); }
};

GruOutput gru_unroll(const GruParams& params, const SequenceBatch& seq,
                     const Tensor& h0);
/// Zero initial state.
GruOutput gru_unroll(const GruParams& params, const SequenceBatch& seq);

// ---------------------------------------------------------------------------
// Recurrent-skip
// ---------------------------------------------------------------------------

struct SkipGruParams {
    GruParams gru;
    std::size_t skip = 1; // hidden cells skipped through (period p)

    static SkipGruParams init(std::size_t input_dim, std::size_t hidden,
                              std::size_t skip, std::mt19937_64& rng);
};

/// Recurrence reading h_{t-p} instead of h_{t-1} (zero state when t < p);
/// equivalently p independent GRU chains over the strided subsequences.
/// Returns the last p hidden states ordered oldest first:
/// h_{q-p}, ..., h_{q-1}. Throws when seq.steps < p.
std::vector<Tensor> skip_gru_unroll(const SkipGruParams& params,
                                    const SequenceBatch& seq);

// ---------------------------------------------------------------------------
// Dense combiner
// ---------------------------------------------------------------------------

struct DenseCombinerParams {
    std::size_t skip_count = 0; // p
    Tensor w_rnn;               // (d_r, n)
    std::vector<Tensor> w_skip; // p tensors, each (d_s, n); w_skip[i]
                                // multiplies h^S_{t-i}
    Tensor bias;                // (n)

    static DenseCombinerParams init(std::size_t rnn_hidden,
                                    std::size_t skip_hidden,
                                    std::size_t skip_count, std::size_t out,
                                    std::mt19937_64& rng);
};

/// h^D = h_R W^R + sum_i h^S_{t-i} W^S_i + b. skip_states are ordered oldest
/// first (as returned by skip_gru_unroll) and must number exactly p;
/// p == 0 reduces to the affine map of h_R.
Tensor dense_combine(const DenseCombinerParams& params, const Tensor& h_rnn,
                     std::span<const Tensor> skip_states);

// ---------------------------------------------------------------------------
// Temporal attention
// ---------------------------------------------------------------------------

enum class AttnScoreKind { dot, cosine, mlp };

struct AttentionParams {
    AttnScoreKind score = AttnScoreKind::dot;
    std::size_t hidden = 0; // d_r
    Tensor w_out;           // (2*d_r, n)
    Tensor b_out;           // (n)
    // mlp score only
    Tensor w_score;  // (2*d_r, d_r)
    Tensor b_score;  // (d_r)
    Tensor v_score;  // (d_r, 1)

    static AttentionParams init(AttnScoreKind score, std::size_t hidden,
                                std::size_t out, std::mt19937_64& rng);
};

/// Softmax-normalized attention over all window positions with the last
/// hidden state as the query; output is the projection of
/// [context; last state]. Needs at least 2 states.
Tensor attention_combine(const AttentionParams& params,
                         std::span<const Tensor> states);

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: in training mode each element is zeroed independently
/// with probability `rate` and survivors are scaled by 1/(1-rate); identity
/// in eval mode or at rate 0. Requires 0 <= rate < 1.
Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64& rng);

} // namespace lstnet
