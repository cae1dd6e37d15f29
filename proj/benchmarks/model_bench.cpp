// SPDX-License-Identifier: Apache-2.0
#include "lstnet/model.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace lstnet;

namespace {

WindowBatch synth_batch(std::size_t batch, std::size_t window,
                        std::size_t vars, std::mt19937_64& rng) {
    WindowBatch b;
    b.batch = batch;
    b.window = window;
    b.vars = vars;
    b.inputs.resize(batch * window * vars);
    b.targets.resize(batch * vars);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& v : b.inputs) v = dist(rng);
    for (auto& v : b.targets) v = dist(rng);
    return b;
}

LstNetConfig bench_config(std::size_t window) {
    LstNetConfig cfg;
    cfg.variant = Variant::skip;
    cfg.window = window;
    cfg.horizon = 24;
    cfg.conv_width = 6;
    cfg.conv_filters = 32;
    cfg.rnn_hidden = 32;
    cfg.skip_hidden = 16;
    cfg.skip_length = 24;
    cfg.ar_window = 24;
    cfg.dropout = 0.0;
    return cfg;
}

void BM_ForwardInference(benchmark::State& state) {
    const std::size_t window = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(11);
    LstNetModel model(bench_config(window), 20, 1);
    WindowBatch batch = synth_batch(64, window, 20, rng);
    for (auto _ : state) {
        auto y = model.predict(batch);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 64);
}
BENCHMARK(BM_ForwardInference)->Arg(48)->Arg(96)->Arg(168)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
    const std::size_t window = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(12);
    LstNetModel model(bench_config(window), 20, 1);
    WindowBatch batch = synth_batch(64, window, 20, rng);
    Tensor target = Tensor::from_values({batch.batch, batch.vars},
                                        batch.targets);
    std::mt19937_64 dropout_rng(0);
    for (auto _ : state) {
        for (Tensor t : model.parameters()) t.zero_grad();
        Tensor pred = model.forward(batch, /*training=*/true, dropout_rng);
        Tensor loss = loss_l2(pred, target);
        backward(loss);
        benchmark::DoNotOptimize(model.parameters().front().grad().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(48)->Arg(96)->Arg(168)->Unit(benchmark::kMillisecond);

} // namespace
