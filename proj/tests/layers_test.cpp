// SPDX-License-Identifier: Apache-2.0
#include "lstnet/layers.hpp"

#include "lstnet/errors.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <random>

using namespace lstnet;

namespace {

ConvLayerParams identity_conv(std::size_t width, std::vector<double> weights,
                              std::size_t vars = 1) {
    ConvLayerParams p;
    p.width = width;
    p.vars = vars;
    p.filters = 1;
    p.weight = Tensor::from_values({width * vars, 1}, std::move(weights));
    p.bias = Tensor::zeros({1});
    return p;
}

/// Oracle-layout copy of a conv weight tensor ((i*vars+j) x filters ->
/// (k*width+i)*vars+j).
std::vector<double> oracle_conv_weight(const ConvLayerParams& p) {
    std::vector<double> w(p.filters * p.width * p.vars);
    for (std::size_t i = 0; i < p.width; ++i) {
        for (std::size_t j = 0; j < p.vars; ++j) {
            for (std::size_t k = 0; k < p.filters; ++k) {
                w[(k * p.width + i) * p.vars + j] =
                    p.weight.at(i * p.vars + j, k);
            }
        }
    }
    return w;
}

oracle::GruWeights extract(const GruParams& g) {
    oracle::GruWeights w;
    w.input = g.input_dim;
    w.hidden = g.hidden;
    auto grab = [](const Tensor& t) {
        return std::vector<double>(t.values().begin(), t.values().end());
    };
    w.w_xr = grab(g.w_xr);
    w.w_xu = grab(g.w_xu);
    w.w_xc = grab(g.w_xc);
    w.w_hr = grab(g.w_hr);
    w.w_hu = grab(g.w_hu);
    w.w_hc = grab(g.w_hc);
    w.b_r = grab(g.b_r);
    w.b_u = grab(g.b_u);
    w.b_c = grab(g.b_c);
    return w;
}

SequenceBatch single_sample_sequence(const std::vector<std::vector<double>>& steps) {
    std::vector<double> packed;
    for (const auto& s : steps) packed.insert(packed.end(), s.begin(), s.end());
    SequenceBatch seq;
    seq.steps = steps.size();
    seq.batch = 1;
    seq.dim = steps.front().size();
    seq.packed = Tensor::from_values({seq.steps, seq.dim}, std::move(packed));
    return seq;
}

GruParams zero_gru(std::size_t input, std::size_t hidden) {
    GruParams g;
    g.input_dim = input;
    g.hidden = hidden;
    g.w_xr = Tensor::zeros({input, hidden});
    g.w_xu = Tensor::zeros({input, hidden});
    g.w_xc = Tensor::zeros({input, hidden});
    g.w_hr = Tensor::zeros({hidden, hidden});
    g.w_hu = Tensor::zeros({hidden, hidden});
    g.w_hc = Tensor::zeros({hidden, hidden});
    g.b_r = Tensor::zeros({hidden});
    g.b_u = Tensor::zeros({hidden});
    g.b_c = Tensor::zeros({hidden});
    return g;
}

} // namespace

TEST_CASE("conv_forward trivial filters") {
    SUBCASE("width-1 identity filter then relu") {
        auto p = identity_conv(1, {1.0});
        Tensor x = Tensor::from_values({1, 3}, {3.0, -1.0, 4.0});
        Tensor y = conv_forward(p, x);
        REQUIRE(y.shape() == Shape{1, 3});
        CHECK(y.values()[0] == 3.0);
        CHECK(y.values()[1] == 0.0);
        CHECK(y.values()[2] == 4.0);
    }
    SUBCASE("width-2 current-column filter with left zero pad") {
        auto p = identity_conv(2, {0.0, 1.0});
        Tensor x = Tensor::from_values({1, 3}, {1.0, 2.0, 3.0});
        Tensor y = conv_forward(p, x);
        CHECK(y.values()[0] == 1.0);
        CHECK(y.values()[1] == 2.0);
        CHECK(y.values()[2] == 3.0);
    }
    SUBCASE("width-2 previous-column filter shows the zero pad") {
        auto p = identity_conv(2, {1.0, 0.0});
        Tensor x = Tensor::from_values({1, 3}, {1.0, 2.0, 3.0});
        Tensor y = conv_forward(p, x);
        CHECK(y.values()[0] == 0.0); // pad column
        CHECK(y.values()[1] == 1.0);
        CHECK(y.values()[2] == 2.0);
    }
    SUBCASE("filter height mismatch") {
        auto p = identity_conv(1, {1.0});
        Tensor x = Tensor::zeros({2, 3});
        CHECK_THROWS_AS(conv_forward(p, x), ShapeError);
    }
}

TEST_CASE("conv_forward matches the sliding-window oracle") {
    std::mt19937_64 rng(42);
    auto p = ConvLayerParams::init(3, 3, 2, rng);
    Tensor x = testutil::random_tensor({3, 5}, rng);
    Tensor y = conv_forward(p, x);
    REQUIRE(y.shape() == Shape{2, 5});

    std::vector<double> window(x.values().begin(), x.values().end());
    std::vector<double> bias(p.bias.values().begin(), p.bias.values().end());
    auto expect = oracle::conv_causal(window, 3, 5, oracle_conv_weight(p), bias,
                                      3, 2);
    CHECK(testutil::max_abs_diff(y.values(), expect) < 1e-14);
}

TEST_CASE("conv batch path agrees with the single-window path") {
    std::mt19937_64 rng(17);
    const std::size_t vars = 3, q = 6, batch = 4;
    auto p = ConvLayerParams::init(3, vars, 5, rng);
    // Batch windows as q x vars time-major samples.
    std::vector<double> inputs(batch * q * vars);
    for (auto& v : inputs) {
        v = std::uniform_real_distribution<double>(-1, 1)(rng);
    }
    SequenceBatch seq = conv_forward_batch(p, inputs.data(), batch, q, vars);
    REQUIRE(seq.steps == q);
    REQUIRE(seq.dim == 5);

    for (std::size_t s = 0; s < batch; ++s) {
        // vars x q single window for sample s
        std::vector<double> win(vars * q);
        for (std::size_t t = 0; t < q; ++t) {
            for (std::size_t j = 0; j < vars; ++j) {
                win[j * q + t] = inputs[(s * q + t) * vars + j];
            }
        }
        Tensor single = conv_forward(p, Tensor::from_values({vars, q}, win));
        for (std::size_t t = 0; t < q; ++t) {
            Tensor step = seq.step(t); // batch x filters
            for (std::size_t k = 0; k < 5; ++k) {
                CHECK(step.at(s, k) ==
                      doctest::Approx(single.at(k, t)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("conv causality: perturbing column j never changes earlier outputs") {
    std::mt19937_64 rng(5);
    auto p = ConvLayerParams::init(3, 2, 3, rng);
    Tensor x = testutil::random_tensor({2, 7}, rng);
    Tensor base = conv_forward(p, x);
    for (std::size_t j = 2; j < 7; j += 2) {
        std::vector<double> bumped(x.values().begin(), x.values().end());
        bumped[0 * 7 + j] += 0.7;
        bumped[1 * 7 + j] -= 0.3;
        Tensor y = conv_forward(p, Tensor::from_values({2, 7}, bumped));
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t t = 0; t < j; ++t) {
                CHECK(y.at(k, t) == base.at(k, t));
            }
        }
    }
}

TEST_CASE("gru_step closed-form cases") {
    SUBCASE("zero weights halve the hidden state") {
        auto g = zero_gru(2, 3);
        Tensor x = Tensor::from_values({1, 2}, {0.3, -0.7});
        Tensor h = Tensor::from_values({1, 3}, {1.0, -2.0, 4.0});
        Tensor out = gru_step(g, x, h);
        CHECK(out.at(0, 0) == doctest::Approx(0.5));
        CHECK(out.at(0, 1) == doctest::Approx(-1.0));
        CHECK(out.at(0, 2) == doctest::Approx(2.0));
    }
    SUBCASE("zero state is a fixed point of the zero-weight cell") {
        auto g = zero_gru(2, 3);
        Tensor x = Tensor::from_values({1, 2}, {0.9, 0.1});
        Tensor h = Tensor::zeros({1, 3});
        Tensor out = gru_step(g, x, h);
        for (double v : out.values()) CHECK(v == 0.0);
    }
    SUBCASE("random instance matches the scalar oracle") {
        std::mt19937_64 rng(99);
        auto g = GruParams::init(3, 4, rng);
        Tensor x = testutil::random_tensor({1, 3}, rng);
        Tensor h = testutil::random_tensor({1, 4}, rng);
        Tensor out = gru_step(g, x, h);

        auto w = extract(g);
        std::vector<double> xs(x.values().begin(), x.values().end());
        std::vector<double> hs(h.values().begin(), h.values().end());
        auto expect = oracle::gru_step(w, xs, hs);
        CHECK(testutil::max_abs_diff(out.values(), expect) < 1e-14);
    }
}

TEST_CASE("gru gates stay strictly inside (0,1) and h is a convex mix") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        auto g = GruParams::init(2, 3, rng);
        auto w = extract(g);
        std::vector<double> x{std::uniform_real_distribution<double>(-3, 3)(rng),
                              std::uniform_real_distribution<double>(-3, 3)(rng)};
        std::vector<double> h{std::uniform_real_distribution<double>(-3, 3)(rng),
                              0.0,
                              std::uniform_real_distribution<double>(-3, 3)(rng)};
        // gate values via the oracle's internals: recompute r,u directly
        for (std::size_t j = 0; j < 3; ++j) {
            double r = w.b_r[j], u = w.b_u[j];
            for (std::size_t i = 0; i < 2; ++i) {
                r += x[i] * w.w_xr[i * 3 + j];
                u += x[i] * w.w_xu[i * 3 + j];
            }
            for (std::size_t i = 0; i < 3; ++i) {
                r += h[i] * w.w_hr[i * 3 + j];
                u += h[i] * w.w_hu[i * 3 + j];
            }
            r = oracle::sigmoid(r);
            u = oracle::sigmoid(u);
            CHECK(r > 0.0);
            CHECK(r < 1.0);
            CHECK(u > 0.0);
            CHECK(u < 1.0);
        }
        // convexity of the library step against its own c_t is implied by
        // h = (1-u)h + uc with u in (0,1); check h lies between h_prev and c.
        Tensor ht = gru_step(g, Tensor::from_values({1, 2}, x),
                             Tensor::from_values({1, 3}, h));
        auto hs = oracle::gru_step(w, x, h);
        CHECK(testutil::max_abs_diff(ht.values(), hs) < 1e-14);
        // recompute c to bound h between h_prev and c
        std::vector<double> c(3);
        {
            std::vector<double> r(3), hh(3, 0.0);
            for (std::size_t j = 0; j < 3; ++j) {
                double rv = w.b_r[j];
                for (std::size_t i = 0; i < 2; ++i) rv += x[i] * w.w_xr[i * 3 + j];
                for (std::size_t i = 0; i < 3; ++i) rv += h[i] * w.w_hr[i * 3 + j];
                r[j] = oracle::sigmoid(rv);
            }
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t j = 0; j < 3; ++j) {
                    hh[j] += h[i] * w.w_hc[i * 3 + j];
                }
            }
            for (std::size_t j = 0; j < 3; ++j) {
                double cv = w.b_c[j];
                for (std::size_t i = 0; i < 2; ++i) cv += x[i] * w.w_xc[i * 3 + j];
                c[j] = oracle::relu(cv + r[j] * hh[j]);
            }
        }
        for (std::size_t j = 0; j < 3; ++j) {
            const double lo = std::min(h[j], c[j]);
            const double hi = std::max(h[j], c[j]);
            CHECK(ht.at(0, j) >= lo - 1e-12);
            CHECK(ht.at(0, j) <= hi + 1e-12);
        }
    }
}

TEST_CASE("gru_unroll") {
    SUBCASE("single step equals gru_step") {
        std::mt19937_64 rng(3);
        auto g = GruParams::init(2, 3, rng);
        auto seq = single_sample_sequence({{0.5, -0.5}});
        auto out = gru_unroll(g, seq);
        Tensor direct = gru_step(g, seq.step(0), Tensor::zeros({1, 3}));
        CHECK(testutil::bitwise_equal(out.final_state().values(),
                                      direct.values()));
    }
    SUBCASE("zero weights decay geometrically from h0") {
        auto g = zero_gru(1, 2);
        auto seq = single_sample_sequence({{1.0}, {2.0}, {3.0}});
        Tensor h0 = Tensor::from_values({1, 2}, {8.0, -16.0});
        auto out = gru_unroll(g, seq, h0);
        CHECK(out.final_state().at(0, 0) == doctest::Approx(1.0));
        CHECK(out.final_state().at(0, 1) == doctest::Approx(-2.0));
    }
    SUBCASE("random instance matches the scalar unroll oracle") {
        std::mt19937_64 rng(31);
        auto g = GruParams::init(3, 4, rng);
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(-1, 1);
        for (int t = 0; t < 5; ++t) {
            steps.push_back({dist(rng), dist(rng), dist(rng)});
        }
        auto out = gru_unroll(g, single_sample_sequence(steps));
        auto states = oracle::gru_unroll(extract(g), steps);
        REQUIRE(out.states.size() == states.size());
        for (std::size_t t = 0; t < states.size(); ++t) {
            CHECK(testutil::max_abs_diff(out.states[t].values(), states[t]) <
                  1e-13);
        }
    }
}

TEST_CASE("skip_gru_unroll structure") {
    std::mt19937_64 rng(55);
    SUBCASE("p=1 equals plain gru bitwise") {
        auto g = GruParams::init(2, 3, rng);
        SkipGruParams sp;
        sp.gru = g;
        sp.skip = 1;
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(-1, 1);
        for (int t = 0; t < 6; ++t) steps.push_back({dist(rng), dist(rng)});
        auto seq = single_sample_sequence(steps);
        auto plain = gru_unroll(g, seq);
        auto skipped = skip_gru_unroll(sp, seq);
        REQUIRE(skipped.size() == 1);
        CHECK(testutil::bitwise_equal(skipped[0].values(),
                                      plain.final_state().values()));
    }
    SUBCASE("p=q gives length-1 chains from zero state") {
        auto g = GruParams::init(2, 3, rng);
        SkipGruParams sp;
        sp.gru = g;
        sp.skip = 4;
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(-1, 1);
        for (int t = 0; t < 4; ++t) steps.push_back({dist(rng), dist(rng)});
        auto seq = single_sample_sequence(steps);
        auto states = skip_gru_unroll(sp, seq);
        REQUIRE(states.size() == 4);
        Tensor zero = Tensor::zeros({1, 3});
        for (std::size_t t = 0; t < 4; ++t) {
            Tensor expect = gru_step(g, seq.step(t), zero);
            CHECK(testutil::bitwise_equal(states[t].values(), expect.values()));
        }
    }
    SUBCASE("p=2 decomposes into strided independent chains") {
        auto g = GruParams::init(2, 3, rng);
        SkipGruParams sp;
        sp.gru = g;
        sp.skip = 2;
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(-1, 1);
        for (int t = 0; t < 6; ++t) steps.push_back({dist(rng), dist(rng)});
        auto seq = single_sample_sequence(steps);
        auto states = skip_gru_unroll(sp, seq); // h4, h5

        std::vector<std::vector<double>> even{steps[0], steps[2], steps[4]};
        std::vector<std::vector<double>> odd{steps[1], steps[3], steps[5]};
        auto even_chain = gru_unroll(g, single_sample_sequence(even));
        auto odd_chain = gru_unroll(g, single_sample_sequence(odd));
        CHECK(testutil::max_abs_diff(states[0].values(),
                                     even_chain.final_state().values()) < 1e-12);
        CHECK(testutil::max_abs_diff(states[1].values(),
                                     odd_chain.final_state().values()) < 1e-12);
    }
    SUBCASE("window shorter than p is rejected") {
        auto g = GruParams::init(2, 3, rng);
        SkipGruParams sp;
        sp.gru = g;
        sp.skip = 9;
        auto seq = single_sample_sequence({{0.1, 0.2}, {0.3, 0.4}});
        CHECK_THROWS_AS(skip_gru_unroll(sp, seq), ShapeError);
    }
}

TEST_CASE("dense_combine") {
    SUBCASE("bias only") {
        DenseCombinerParams p;
        p.skip_count = 1;
        p.w_rnn = Tensor::zeros({3, 2});
        p.w_skip = {Tensor::zeros({2, 2})};
        p.bias = Tensor::from_values({2}, {1.0, 2.0});
        Tensor h = Tensor::from_values({1, 3}, {5.0, 6.0, 7.0});
        std::vector<Tensor> skip{Tensor::from_values({1, 2}, {1.0, 1.0})};
        Tensor out = dense_combine(p, h, skip);
        CHECK(out.at(0, 0) == 1.0);
        CHECK(out.at(0, 1) == 2.0);
    }
    SUBCASE("state count mismatch") {
        DenseCombinerParams p;
        p.skip_count = 2;
        p.w_rnn = Tensor::zeros({3, 2});
        p.w_skip = {Tensor::zeros({2, 2}), Tensor::zeros({2, 2})};
        p.bias = Tensor::zeros({2});
        Tensor h = Tensor::zeros({1, 3});
        std::vector<Tensor> skip{Tensor::zeros({1, 2})};
        CHECK_THROWS_AS(dense_combine(p, h, skip), ShapeError);
    }
    SUBCASE("random instance matches the explicit-sum oracle") {
        std::mt19937_64 rng(8);
        auto p = DenseCombinerParams::init(4, 3, 2, 5, rng);
        Tensor h = testutil::random_tensor({1, 4}, rng);
        std::vector<Tensor> skip{testutil::random_tensor({1, 3}, rng),
                                 testutil::random_tensor({1, 3}, rng)};
        Tensor out = dense_combine(p, h, skip);

        auto grab = [](const Tensor& t) {
            return std::vector<double>(t.values().begin(), t.values().end());
        };
        std::vector<std::vector<double>> skip_vals{grab(skip[0]), grab(skip[1])};
        std::vector<std::vector<double>> w_skip{grab(p.w_skip[0]),
                                                grab(p.w_skip[1])};
        auto expect = oracle::dense_combine(grab(h), 4, skip_vals, 3,
                                            grab(p.w_rnn), w_skip, grab(p.bias));
        CHECK(testutil::max_abs_diff(out.values(), expect) < 1e-14);
    }
}

TEST_CASE("attention_combine") {
    std::mt19937_64 rng(21);
    SUBCASE("identical context columns collapse to that column") {
        auto p = AttentionParams::init(AttnScoreKind::dot, 3, 3, rng);
        // projection = [I; 0] so the output is the context vector itself
        std::vector<double> proj(6 * 3, 0.0);
        proj[0 * 3 + 0] = proj[1 * 3 + 1] = proj[2 * 3 + 2] = 1.0;
        p.w_out = Tensor::from_values({6, 3}, proj);
        p.b_out = Tensor::zeros({3});
        Tensor col = Tensor::from_values({1, 3}, {0.4, -0.2, 0.9});
        std::vector<Tensor> states(5, col);
        Tensor out = attention_combine(p, states);
        CHECK(testutil::max_abs_diff(out.values(), col.values()) < 1e-12);
    }
    SUBCASE("softmax limit selects the dominant column") {
        auto p = AttentionParams::init(AttnScoreKind::dot, 2, 2, rng);
        std::vector<double> proj(4 * 2, 0.0);
        proj[0 * 2 + 0] = proj[1 * 2 + 1] = 1.0;
        p.w_out = Tensor::from_values({4, 2}, proj);
        p.b_out = Tensor::zeros({2});
        // query aligned with states[1], score gap is huge
        Tensor weak = Tensor::from_values({1, 2}, {0.0, 0.01});
        Tensor strong = Tensor::from_values({1, 2}, {30.0, 0.0});
        Tensor query = Tensor::from_values({1, 2}, {30.0, 0.0});
        std::vector<Tensor> states{weak, strong, query};
        Tensor out = attention_combine(p, states);
        CHECK(out.at(0, 0) == doctest::Approx(30.0).epsilon(1e-9));
        CHECK(out.at(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("random instance matches the score-softmax-sum oracle") {
        auto p = AttentionParams::init(AttnScoreKind::dot, 4, 3, rng);
        std::vector<Tensor> states;
        std::vector<std::vector<double>> svals;
        for (int j = 0; j < 5; ++j) {
            Tensor s = testutil::random_tensor({1, 4}, rng);
            states.push_back(s);
            svals.emplace_back(s.values().begin(), s.values().end());
        }
        Tensor out = attention_combine(p, states);
        auto expect = oracle::attention(
            svals, 4,
            std::vector<double>(p.w_out.values().begin(), p.w_out.values().end()),
            std::vector<double>(p.b_out.values().begin(), p.b_out.values().end()));
        CHECK(testutil::max_abs_diff(out.values(), expect) < 1e-13);
    }
    SUBCASE("attention weights are a distribution") {
        // checked through the collapse case plus softmax tests; here assert
        // the q >= 2 precondition
        auto p = AttentionParams::init(AttnScoreKind::dot, 3, 2, rng);
        std::vector<Tensor> one{Tensor::zeros({1, 3})};
        CHECK_THROWS_AS(attention_combine(p, one), ShapeError);
    }
    SUBCASE("cosine and mlp scores run and differentiate") {
        for (auto kind : {AttnScoreKind::cosine, AttnScoreKind::mlp}) {
            auto p = AttentionParams::init(kind, 3, 2, rng);
            std::vector<Tensor> states{testutil::random_tensor({2, 3}, rng),
                                       testutil::random_tensor({2, 3}, rng),
                                       testutil::random_tensor({2, 3}, rng)};
            auto report = grad_check(
                [&](const Tensor& w) {
                    AttentionParams q = p;
                    q.w_out = w;
                    return sum(square(attention_combine(q, states)));
                },
                p.w_out, 1e-5);
            CHECK(report.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(2024);
    Tensor x = Tensor::full({100}, 1.0);
    SUBCASE("rate 0 is the identity in both modes") {
        CHECK(testutil::bitwise_equal(dropout(x, 0.0, true, rng).values(),
                                      x.values()));
        CHECK(testutil::bitwise_equal(dropout(x, 0.0, false, rng).values(),
                                      x.values()));
    }
    SUBCASE("eval mode is the identity at any rate") {
        CHECK(testutil::bitwise_equal(dropout(x, 0.5, false, rng).values(),
                                      x.values()));
    }
    SUBCASE("invalid rates") {
        CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ConfigError);
        CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ConfigError);
    }
    SUBCASE("inverted scaling keeps the mean near 1") {
        Tensor big = Tensor::full({100000}, 1.0);
        Tensor dropped = dropout(big, 0.2, true, rng);
        double acc = 0.0;
        for (double v : dropped.values()) acc += v;
        const double mean = acc / 1e5;
        // sd of the mean is 0.5/sqrt(1e5) ~ 0.00158; 3 sigma band
        CHECK(std::fabs(mean - 1.0) < 0.00475);
    }
}

TEST_CASE("every layer passes gradient checks at smooth points") {
    std::mt19937_64 rng(404);
    const double tol = 1e-4;

    SUBCASE("conv weight and bias") {
        auto p = ConvLayerParams::init(3, 2, 3, rng);
        // keep activations away from relu kinks with a positive bias
        p.bias = Tensor::from_values({3}, {0.9, 1.1, 1.3});
        Tensor x = testutil::random_tensor({2, 5}, rng, 0.1, 1.0);
        auto wrep = grad_check(
            [&](const Tensor& w) {
                ConvLayerParams q = p;
                q.weight = w;
                return sum(square(conv_forward(q, x)));
            },
            p.weight, 1e-5);
        CHECK(wrep.max_rel_error < tol);
        auto brep = grad_check(
            [&](const Tensor& b) {
                ConvLayerParams q = p;
                q.bias = b;
                return sum(square(conv_forward(q, x)));
            },
            p.bias, 1e-5);
        CHECK(brep.max_rel_error < tol);
    }

    SUBCASE("gru unroll wrt every weight family") {
        auto g = GruParams::init(2, 3, rng);
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(0.1, 0.9);
        for (int t = 0; t < 4; ++t) steps.push_back({dist(rng), dist(rng)});
        auto seq = single_sample_sequence(steps);
        auto loss_with = [&](GruParams q) {
            return sum(square(gru_unroll(q, seq).final_state()));
        };
        auto check_member = [&](Tensor GruParams::*member) {
            auto report = grad_check(
                [&](const Tensor& w) {
                    GruParams q = g;
                    q.*member = w;
                    return loss_with(q);
                },
                g.*member, 1e-5);
            CHECK(report.max_rel_error < tol);
        };
        check_member(&GruParams::w_xr);
        check_member(&GruParams::w_xu);
        check_member(&GruParams::w_xc);
        check_member(&GruParams::w_hr);
        check_member(&GruParams::w_hu);
        check_member(&GruParams::w_hc);
        check_member(&GruParams::b_r);
        check_member(&GruParams::b_u);
        check_member(&GruParams::b_c);
    }

    SUBCASE("skip gru and dense combiner") {
        auto sp = SkipGruParams::init(2, 3, 2, rng);
        auto dp = DenseCombinerParams::init(3, 3, 2, 2, rng);
        std::vector<std::vector<double>> steps;
        std::uniform_real_distribution<double> dist(0.1, 0.9);
        for (int t = 0; t < 6; ++t) steps.push_back({dist(rng), dist(rng)});
        auto seq = single_sample_sequence(steps);
        auto gru_for_query = GruParams::init(2, 3, rng);

        auto full_loss = [&](const SkipGruParams& s, const DenseCombinerParams& d) {
            auto rnn = gru_unroll(gru_for_query, seq);
            auto skip_states = skip_gru_unroll(s, seq);
            return sum(square(dense_combine(d, rnn.final_state(), skip_states)));
        };
        auto report = grad_check(
            [&](const Tensor& w) {
                SkipGruParams s = sp;
                s.gru.w_hc = w;
                return full_loss(s, dp);
            },
            sp.gru.w_hc, 1e-5);
        CHECK(report.max_rel_error < tol);
        report = grad_check(
            [&](const Tensor& w) {
                DenseCombinerParams d = dp;
                d.w_skip[1] = w;
                return full_loss(sp, d);
            },
            dp.w_skip[1], 1e-5);
        CHECK(report.max_rel_error < tol);
        report = grad_check(
            [&](const Tensor& w) {
                DenseCombinerParams d = dp;
                d.w_rnn = w;
                return full_loss(sp, d);
            },
            dp.w_rnn, 1e-5);
        CHECK(report.max_rel_error < tol);
    }
}
