#include <benchmark/benchmark.h>

#include <vector>

#include "smi/eomi.hpp"
#include "smi/omi.hpp"
#include "smi/reference.hpp"
#include "smi/rng.hpp"
#include "smi/simulate.hpp"

namespace {

void bench_normal_draws(benchmark::State& state) {
    smi::Rng rng(1);
    double acc = 0.0;
    for (auto _ : state) acc += rng.normal();
    benchmark::DoNotOptimize(acc);
}
BENCHMARK(bench_normal_draws);

void bench_sample_T4(benchmark::State& state) {
    const std::vector<double> r = {0.6, 0.4, 0.2, 0.1};
    const std::size_t N = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto draws = smi::sample_T4(r, 20, N, 7);
        benchmark::DoNotOptimize(draws.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(N));
}
BENCHMARK(bench_sample_T4)->Arg(1000)->Arg(10000);

void bench_sample_Q0(benchmark::State& state) {
    const std::size_t N = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        auto draws = smi::sample_Q0(5, 20, N, 7);
        benchmark::DoNotOptimize(draws.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(N));
}
BENCHMARK(bench_sample_Q0)->Arg(1000)->Arg(10000);

void bench_inversion_round_trip(benchmark::State& state) {
    const std::vector<double> r = {0.9, 0.7, 0.5, 0.3, 0.2, 0.1};
    for (auto _ : state) {
        auto rec = smi::m1_inverse(smi::m2_inverse(smi::m2_forward(smi::m1_forward(r))));
        benchmark::DoNotOptimize(rec.data());
    }
}
BENCHMARK(bench_inversion_round_trip);

void bench_moment_pipeline(benchmark::State& state) {
    smi::SimConfig cfg;
    cfg.k = 4;
    cfg.m = static_cast<int>(state.range(0));
    cfg.r = {0.8, 0.6, 0.4, 0.2};
    const auto rule = smi::selection_rule(smi::RuleKind::Jack, cfg.m);
    smi::Rng rng(3);
    for (auto _ : state) {
        auto stats = smi::draw_moment_stats(cfg, rng, rule, cfg.k);
        benchmark::DoNotOptimize(stats.t_hat.data());
    }
}
BENCHMARK(bench_moment_pipeline)->Arg(10)->Arg(30);

}  // namespace

BENCHMARK_MAIN();
