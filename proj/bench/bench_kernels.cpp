// Serial reference kernels vs the OpenMP kernels at the shapes the desk model
// actually runs (3x3 convolutions of the light FPN and the encoder).
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rcdt/kernels.hpp"

namespace {

std::vector<double> random_buffer(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const int k = static_cast<int>(state.range(1));
    const int n = static_cast<int>(state.range(2));
    const auto a = random_buffer(static_cast<std::size_t>(m) * k, 1);
    const auto b = random_buffer(static_cast<std::size_t>(k) * n, 2);
    std::vector<double> c(static_cast<std::size_t>(m) * n);
    const rcdt::kernels::MatView av{a, m, k};
    const rcdt::kernels::MatView bv{b, k, n};
    for (auto _ : state) {
        if constexpr (Parallel)
            rcdt::kernels::gemm(av, bv, c);
        else
            rcdt::kernels::serial::gemm(av, bv, c);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOPS"] = benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate,
                                                  benchmark::Counter::kIs1000);
}

template <bool Parallel>
void BM_Im2col(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    const auto x = random_buffer(static_cast<std::size_t>(ch) * hw * hw, 3);
    std::vector<double> col(static_cast<std::size_t>(ch) * 9 * hw * hw);
    for (auto _ : state) {
        if constexpr (Parallel)
            rcdt::kernels::im2col(x, ch, hw, hw, 3, 1, 1, col);
        else
            rcdt::kernels::serial::im2col(x, ch, hw, hw, 3, 1, 1, col);
        benchmark::DoNotOptimize(col.data());
    }
}

}  // namespace

// {C_out, C_in*9, H*W}: FPN smoothing conv at stride 4, encoder stage conv, attention.
BENCHMARK(BM_Gemm<false>)->Args({64, 576, 256})->Args({32, 288, 64})->Args({64, 64, 64});
BENCHMARK(BM_Gemm<true>)->Args({64, 576, 256})->Args({32, 288, 64})->Args({64, 64, 64});
BENCHMARK(BM_Im2col<false>)->Args({64, 16})->Args({16, 32});
BENCHMARK(BM_Im2col<true>)->Args({64, 16})->Args({16, 32});

BENCHMARK_MAIN();
