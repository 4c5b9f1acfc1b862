#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tnf/nn/kernels.hpp"

namespace {

using Gemm = void (*)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t, bool);

// Shapes seen in a desk-config step: rows = batch * max_len.
//   projection 2048x64x64, ffn 2048x64x256, tied MLM logits 2048x64x1005.
void run(benchmark::State& state, Gemm f) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto k = static_cast<std::size_t>(state.range(1));
    const auto n = static_cast<std::size_t>(state.range(2));
    std::mt19937_64 rng(42);
    std::normal_distribution<double> nd;
    std::vector<double> a(m * k), b(k * n), c(m * n);
    for (auto& x : a) x = nd(rng);
    for (auto& x : b) x = nd(rng);
    for (auto _ : state) {
        f(a.data(), b.data(), c.data(), m, k, n, false);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
    state.counters["threads"] = tnf::kernels::max_threads();
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({2048, 64, 64})->Args({2048, 64, 256})->Args({2048, 64, 1005})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK_CAPTURE(run, serial_nn, tnf::kernels::serial::gemm_nn)->Apply(shapes);
BENCHMARK_CAPTURE(run, parallel_nn, tnf::kernels::parallel::gemm_nn)->Apply(shapes);
BENCHMARK_CAPTURE(run, serial_nt, tnf::kernels::serial::gemm_nt)->Apply(shapes);
BENCHMARK_CAPTURE(run, parallel_nt, tnf::kernels::parallel::gemm_nt)->Apply(shapes);
BENCHMARK_CAPTURE(run, serial_tn, tnf::kernels::serial::gemm_tn)->Apply(shapes);
BENCHMARK_CAPTURE(run, parallel_tn, tnf::kernels::parallel::gemm_tn)->Apply(shapes);

BENCHMARK_MAIN();
