#include <benchmark/benchmark.h>

#include "hetreg/gaussian.hpp"
#include "hetreg/verify.hpp"

namespace {

void bench_sym_eig(benchmark::State &state) {
    std::mt19937_64 rng(3);
    const auto dim = static_cast<std::size_t>(state.range(0));
    const hetreg::SPDMatrix a{hetreg::verify::random_spd_matrix(dim, rng)};
    for (auto _ : state) {
        auto pair = hetreg::sym_eig(a);
        benchmark::DoNotOptimize(pair.eigenvalues.data());
    }
}

void bench_cholesky(benchmark::State &state) {
    std::mt19937_64 rng(4);
    const auto dim = static_cast<std::size_t>(state.range(0));
    const hetreg::SPDMatrix a{hetreg::verify::random_spd_matrix(dim, rng)};
    for (auto _ : state) {
        auto l = hetreg::cholesky(a);
        benchmark::DoNotOptimize(l.data().data());
    }
}

void bench_w2_exact(benchmark::State &state) {
    std::mt19937_64 rng(5);
    const auto dim = static_cast<std::size_t>(state.range(0));
    const hetreg::Gaussian a = hetreg::verify::random_gaussian(dim, rng);
    const hetreg::Gaussian b = hetreg::verify::random_gaussian(dim, rng);
    for (auto _ : state) {
        double w = hetreg::w2_exact(a, b);
        benchmark::DoNotOptimize(w);
    }
}

void bench_w2_bound(benchmark::State &state) {
    std::mt19937_64 rng(6);
    const auto dim = static_cast<std::size_t>(state.range(0));
    const hetreg::Gaussian a = hetreg::verify::random_gaussian(dim, rng);
    const hetreg::Gaussian b = hetreg::verify::random_gaussian(dim, rng);
    const hetreg::SqrtGaussian sa(a.mean, hetreg::spd_sqrt(a.cov).matrix());
    const hetreg::SqrtGaussian sb(b.mean, hetreg::spd_sqrt(b.cov).matrix());
    for (auto _ : state) {
        double w = hetreg::w2_bound(sa, sb);
        benchmark::DoNotOptimize(w);
    }
}

} // namespace

BENCHMARK(bench_sym_eig)->Arg(8)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(bench_cholesky)->Arg(8)->Arg(16)->Arg(32)->Arg(64);
BENCHMARK(bench_w2_exact)->Arg(2)->Arg(8)->Arg(32);
BENCHMARK(bench_w2_bound)->Arg(2)->Arg(8)->Arg(32);

BENCHMARK_MAIN();
