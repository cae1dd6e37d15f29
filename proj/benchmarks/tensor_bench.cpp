// SPDX-License-Identifier: Apache-2.0
#include "lstnet/layers.hpp"
#include "lstnet/tensor.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace lstnet;

namespace {

void BM_Matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Tensor a = Tensor::uniform({n, n}, -1, 1, rng);
    Tensor b = Tensor::uniform({n, n}, -1, 1, rng);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    for (auto _ : state) {
        state.PauseTiming();
        Tensor a = Tensor::uniform({n, n}, -1, 1, rng, true);
        Tensor b = Tensor::uniform({n, n}, -1, 1, rng, true);
        state.ResumeTiming();
        backward(sum(matmul(a, b)));
        benchmark::DoNotOptimize(a.grad().data());
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_GruStep(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    const std::size_t hidden = static_cast<std::size_t>(state.range(1));
    std::mt19937_64 rng(2);
    auto params = GruParams::init(hidden, hidden, rng);
    Tensor x = Tensor::uniform({batch, hidden}, -1, 1, rng);
    Tensor h = Tensor::uniform({batch, hidden}, -1, 1, rng);
    for (auto _ : state) {
        Tensor next = gru_step(params, x, h);
        benchmark::DoNotOptimize(next.values().data());
    }
}
BENCHMARK(BM_GruStep)->Args({32, 32})->Args({64, 64})->Args({128, 100});

void BM_SkipGruUnroll(benchmark::State& state) {
    const std::size_t steps = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    auto params = SkipGruParams::init(16, 16, 24, rng);
    SequenceBatch seq;
    seq.steps = steps;
    seq.batch = 32;
    seq.dim = 16;
    seq.packed = Tensor::uniform({steps * 32, 16}, -1, 1, rng);
    for (auto _ : state) {
        auto states = skip_gru_unroll(params, seq);
        benchmark::DoNotOptimize(states.back().values().data());
    }
}
BENCHMARK(BM_SkipGruUnroll)->Arg(48)->Arg(96)->Arg(168);

} // namespace
