// SPDX-License-Identifier: Apache-2.0
#include "lstnet/layers.hpp"

#include "lstnet/errors.hpp"

#include <cmath>
#include <string>

namespace lstnet {

Tensor init_weight(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng,
                           /*requires_grad=*/true);
}

Tensor SequenceBatch::step(std::size_t t) const {
    if (t >= steps) throw ShapeError("SequenceBatch::step: index out of range");
    return slice(packed, 0, t * batch, (t + 1) * batch);
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

ConvLayerParams ConvLayerParams::init(std::size_t width, std::size_t vars,
                                      std::size_t filters,
                                      std::mt19937_64& rng) {
    if (width == 0 || vars == 0 || filters == 0) {
        throw ConfigError("conv layer needs width, vars and filters >= 1");
    }
    ConvLayerParams p;
    p.width = width;
    p.vars = vars;
    p.filters = filters;
    p.weight = init_weight({width * vars, filters}, width * vars, rng);
    p.bias = Tensor::zeros({filters}, /*requires_grad=*/true);
    return p;
}

void ConvLayerParams::validate(std::size_t dataset_vars) const {
    if (vars != dataset_vars) {
        throw ShapeError("conv filter height " + std::to_string(vars) +
                         " does not match variable count " +
                         std::to_string(dataset_vars));
    }
}

Tensor conv_forward(const ConvLayerParams& params, const Tensor& window) {
    if (window.ndim() != 2 || window.shape()[0] != params.vars) {
        throw ShapeError("conv_forward: window must be (" +
                         std::to_string(params.vars) + " x q), got " +
                         shape_str(window.shape()));
    }
    const std::size_t q = window.shape()[1];
    // Left zero-padding keeps the output causal and of width q.
    Tensor padded = window;
    if (params.width > 1) {
        Tensor pad = Tensor::zeros({params.vars, params.width - 1});
        const Tensor parts[] = {pad, window};
        padded = concat(parts, 1);
    }
    // Row block i of the gather holds input columns shifted by offset i, so
    // column t of the result sees input columns t-width+1 .. t.
    std::vector<Tensor> blocks;
    blocks.reserve(params.width);
    for (std::size_t i = 0; i < params.width; ++i) {
        blocks.push_back(slice(padded, 1, i, i + q));
    }
    Tensor gathered = params.width == 1 ? blocks[0] : concat(blocks, 0);
    Tensor pre = add(matmul(transpose(gathered), params.weight), params.bias);
    return transpose(relu(pre));
}

namespace {

// Time-major im2col over a batch of raw windows: output row t*batch + s
// is the flattened receptive field [x_{t-w+1}; ...; x_t] of sample s with
// zeros left of the window start.
std::vector<double> im2col_time_major(const double* inputs, std::size_t batch,
                                      std::size_t window, std::size_t vars,
                                      std::size_t width) {
    std::vector<double> out(window * batch * width * vars, 0.0);
    for (std::size_t t = 0; t < window; ++t) {
        for (std::size_t s = 0; s < batch; ++s) {
            double* dst = out.data() + (t * batch + s) * width * vars;
            for (std::size_t i = 0; i < width; ++i) {
                const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t) -
                                             static_cast<std::ptrdiff_t>(width) +
                                             1 + static_cast<std::ptrdiff_t>(i);
                if (src_t < 0) continue;
                const double* src =
                    inputs + (s * window + static_cast<std::size_t>(src_t)) * vars;
                std::copy(src, src + vars, dst + i * vars);
            }
        }
    }
    return out;
}

} // namespace

SequenceBatch conv_forward_batch(const ConvLayerParams& params,
                                 const double* inputs, std::size_t batch,
                                 std::size_t window, std::size_t vars) {
    params.validate(vars);
    if (batch == 0 || window == 0) {
        throw ShapeError("conv_forward_batch: empty batch or window");
    }
    Tensor gathered = Tensor::from_values(
        {window * batch, params.width * vars},
        im2col_time_major(inputs, batch, window, vars, params.width));
    SequenceBatch seq;
    seq.packed = relu(add(matmul(gathered, params.weight), params.bias));
    seq.steps = window;
    seq.batch = batch;
    seq.dim = params.filters;
    return seq;
}

SequenceBatch raw_sequence_batch(const double* inputs, std::size_t batch,
                                 std::size_t window, std::size_t vars) {
    std::vector<double> packed(window * batch * vars);
    for (std::size_t t = 0; t < window; ++t) {
        for (std::size_t s = 0; s < batch; ++s) {
            const double* src = inputs + (s * window + t) * vars;
            std::copy(src, src + vars,
                      packed.data() + (t * batch + s) * vars);
        }
    }
    SequenceBatch seq;
    seq.packed = Tensor::from_values({window * batch, vars}, std::move(packed));
    seq.steps = window;
    seq.batch = batch;
    seq.dim = vars;
    return seq;
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

GruParams GruParams::init(std::size_t input_dim, std::size_t hidden,
                          std::mt19937_64& rng) {
    if (input_dim == 0 || hidden == 0) {
        throw ConfigError("gru needs input_dim and hidden >= 1");
    }
    GruParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.w_xr = init_weight({input_dim, hidden}, input_dim, rng);
    p.w_xu = init_weight({input_dim, hidden}, input_dim, rng);
    p.w_xc = init_weight({input_dim, hidden}, input_dim, rng);
    p.w_hr = init_weight({hidden, hidden}, hidden, rng);
    p.w_hu = init_weight({hidden, hidden}, hidden, rng);
    p.w_hc = init_weight({hidden, hidden}, hidden, rng);
    p.b_r = Tensor::zeros({hidden}, true);
    p.b_u = Tensor::zeros({hidden}, true);
    p.b_c = Tensor::zeros({hidden}, true);
    return p;
}

Tensor gru_step(const GruParams& params, const Tensor& x_t,
                const Tensor& h_prev) {
    if (x_t.ndim() != 2 || x_t.shape()[1] != params.input_dim) {
        throw ShapeError("gru_step: input must be (batch x " +
                         std::to_string(params.input_dim) + "), got " +
                         shape_str(x_t.shape()));
    }
    if (h_prev.ndim() != 2 || h_prev.shape()[1] != params.hidden ||
        h_prev.shape()[0] != x_t.shape()[0]) {
        throw ShapeError("gru_step: hidden must be (batch x " +
                         std::to_string(params.hidden) + "), got " +
                         shape_str(h_prev.shape()));
    }
    Tensor r = sigmoid(add(add(matmul(x_t, params.w_xr),
                               matmul(h_prev, params.w_hr)),
                           params.b_r));
    Tensor u = sigmoid(add(add(matmul(x_t, params.w_xu),
                               matmul(h_prev, params.w_hu)),
                           params.b_u));
    Tensor c = relu(add(add(matmul(x_t, params.w_xc),
                            mul(r, matmul(h_prev, params.w_hc))),
                        params.b_c));
    // (1-u) h_prev + u c
    return add(mul(scale_shift(u, -1.0, 1.0), h_prev), mul(u, c));
}

GruOutput gru_unroll(const GruParams& params, const SequenceBatch& seq,
                     const Tensor& h0) {
    if (seq.steps == 0) throw ShapeError("gru_unroll: empty sequence");
    GruOutput out;
    out.states.reserve(seq.steps);
    Tensor h = h0;
    for (std::size_t t = 0; t < seq.steps; ++t) {
        h = gru_step(params, seq.step(t), h);
        out.states.push_back(h);
    }
    return out;
}

GruOutput gru_unroll(const GruParams& params, const SequenceBatch& seq) {
    return gru_unroll(params, seq,
                      Tensor::zeros({seq.batch, params.hidden}));
}

// ---------------------------------------------------------------------------
// Recurrent-skip
// ---------------------------------------------------------------------------

SkipGruParams SkipGruParams::init(std::size_t input_dim, std::size_t hidden,
                                  std::size_t skip, std::mt19937_64& rng) {
    if (skip == 0) throw ConfigError("skip length must be >= 1");
    SkipGruParams p;
    p.gru = GruParams::init(input_dim, hidden, rng);
    p.skip = skip;
    return p;
}

std::vector<Tensor> skip_gru_unroll(const SkipGruParams& params,
                                    const SequenceBatch& seq) {
    const std::size_t p = params.skip;
    if (seq.steps < p) {
        throw ShapeError("skip_gru_unroll: window of " +
                         std::to_string(seq.steps) +
                         " steps is shorter than skip length " +
                         std::to_string(p));
    }
    Tensor zero = Tensor::zeros({seq.batch, params.gru.hidden});
    std::vector<Tensor> states(seq.steps);
    for (std::size_t t = 0; t < seq.steps; ++t) {
        const Tensor& prev = t >= p ? states[t - p] : zero;
        states[t] = gru_step(params.gru, seq.step(t), prev);
    }
    return {states.end() - static_cast<std::ptrdiff_t>(p), states.end()};
}

// ---------------------------------------------------------------------------
// Dense combiner
// ---------------------------------------------------------------------------

DenseCombinerParams DenseCombinerParams::init(std::size_t rnn_hidden,
                                              std::size_t skip_hidden,
                                              std::size_t skip_count,
                                              std::size_t out,
                                              std::mt19937_64& rng) {
    DenseCombinerParams p;
    p.skip_count = skip_count;
    p.w_rnn = init_weight({rnn_hidden, out}, rnn_hidden, rng);
    p.w_skip.reserve(skip_count);
    for (std::size_t i = 0; i < skip_count; ++i) {
        p.w_skip.push_back(init_weight({skip_hidden, out}, skip_hidden, rng));
    }
    p.bias = Tensor::zeros({out}, true);
    return p;
}

Tensor dense_combine(const DenseCombinerParams& params, const Tensor& h_rnn,
                     std::span<const Tensor> skip_states) {
    if (skip_states.size() != params.skip_count) {
        throw ShapeError("dense_combine: got " +
                         std::to_string(skip_states.size()) +
                         " skip states, expected " +
                         std::to_string(params.skip_count));
    }
    Tensor acc = matmul(h_rnn, params.w_rnn);
    // w_skip[i] multiplies h^S_{t-i}; skip_states are ordered oldest first,
    // so h^S_{t-i} sits at index p-1-i.
    const std::size_t p = params.skip_count;
    for (std::size_t i = 0; i < p; ++i) {
        acc = add(acc, matmul(skip_states[p - 1 - i], params.w_skip[i]));
    }
    return add(acc, params.bias);
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

AttentionParams AttentionParams::init(AttnScoreKind score, std::size_t hidden,
                                      std::size_t out, std::mt19937_64& rng) {
    AttentionParams p;
    p.score = score;
    p.hidden = hidden;
    p.w_out = init_weight({2 * hidden, out}, 2 * hidden, rng);
    p.b_out = Tensor::zeros({out}, true);
    if (score == AttnScoreKind::mlp) {
        p.w_score = init_weight({2 * hidden, hidden}, 2 * hidden, rng);
        p.b_score = Tensor::zeros({hidden}, true);
        p.v_score = init_weight({hidden, 1}, hidden, rng);
    }
    return p;
}

namespace {

// Row-wise dot product of two (batch x d) matrices -> (batch x 1).
Tensor rowwise_dot(const Tensor& a, const Tensor& b) {
    Tensor ones = Tensor::full({a.shape()[1], 1}, 1.0);
    return matmul(mul(a, b), ones);
}

Tensor rowwise_norm(const Tensor& a) {
    Tensor ones = Tensor::full({a.shape()[1], 1}, 1.0);
    return sqrt(matmul(square(a), ones));
}

} // namespace

Tensor attention_combine(const AttentionParams& params,
                         std::span<const Tensor> states) {
    if (states.size() < 2) {
        throw ShapeError("attention_combine: needs at least 2 states, got " +
                         std::to_string(states.size()));
    }
    const Tensor& query = states.back();
    const std::size_t q = states.size();
    const std::size_t d = params.hidden;
    if (query.shape()[1] != d) {
        throw ShapeError("attention_combine: state width " +
                         std::to_string(query.shape()[1]) +
                         " does not match params hidden " + std::to_string(d));
    }

    std::vector<Tensor> scores;
    scores.reserve(q);
    for (std::size_t j = 0; j < q; ++j) {
        switch (params.score) {
        case AttnScoreKind::dot:
            scores.push_back(rowwise_dot(states[j], query));
            break;
        case AttnScoreKind::cosine: {
            Tensor denom = add(mul(rowwise_norm(states[j]), rowwise_norm(query)),
                               Tensor::scalar(1e-12));
            scores.push_back(divide(rowwise_dot(states[j], query), denom));
            break;
        }
        case AttnScoreKind::mlp: {
            const Tensor pair[] = {states[j], query};
            Tensor hidden = tanh(add(matmul(concat(pair, 1), params.w_score),
                                     params.b_score));
            scores.push_back(matmul(hidden, params.v_score));
            break;
        }
        }
    }
    Tensor alpha = softmax(concat(scores, 1), 1); // (batch x q), rows sum to 1

    Tensor ones_row = Tensor::full({1, d}, 1.0);
    Tensor context;
    for (std::size_t j = 0; j < q; ++j) {
        Tensor w = matmul(slice(alpha, 1, j, j + 1), ones_row); // (batch x d)
        Tensor term = mul(w, states[j]);
        context = j == 0 ? term : add(context, term);
    }

    const Tensor cat[] = {context, query};
    return add(matmul(concat(cat, 1), params.w_out), params.b_out);
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0, 1), got " +
                          std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    std::bernoulli_distribution survive(keep);
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = survive(rng) ? inv_keep : 0.0;
    return mul(x, Tensor::from_values(x.shape(), std::move(mask)));
}

} // namespace lstnet
