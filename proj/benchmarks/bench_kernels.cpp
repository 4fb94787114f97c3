#include <benchmark/benchmark.h>

#include "wuneng/attention.hpp"
#include "wuneng/autodiff.hpp"
#include "wuneng/numerics.hpp"
#include "wuneng/rng.hpp"
#include "wuneng/state.hpp"

namespace {

using wuneng::Rng;
using wuneng::TensorD;

TensorD random(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng rng(seed);
  TensorD t({r, c}, 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const TensorD a = random(m, k, 1), b = random(k, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wuneng::numerics::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}
BENCHMARK(BM_Matmul)->Args({1024, 64, 16})->Args({1024, 64, 64})->Args({1024, 64, 256})->Args({1024, 256, 64});

void BM_MatmulTn(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const TensorD a = random(k, m, 3), b = random(k, n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(wuneng::numerics::matmul_tn(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}
BENCHMARK(BM_MatmulTn)->Args({1024, 64, 16})->Args({1024, 64, 64})->Args({1024, 256, 64});

void BM_CausalHead(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TensorD q = random(n, 16, 5), k = random(n, 16, 6), v = random(n, 16, 7);
  for (auto _ : state) benchmark::DoNotOptimize(wuneng::attention::causal_head(q, k, v));
}
BENCHMARK(BM_CausalHead)->Arg(32)->Arg(128);

void BM_DeltaRuleUpdate(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(d * d, 0.1);
  const TensorD w = random(1, d, 8, 0.5, 1), kh = random(1, d, 9), k = random(1, d, 10),
                v = random(1, d, 11), a = random(1, d, 12, 0, 1);
  for (auto _ : state) {
    wuneng::state::delta_rule_update(s, w.data(), kh.data(), k.data(), v.data(), a.data());
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_DeltaRuleUpdate)->Arg(16)->Arg(64);

void BM_ScanForwardBackward(benchmark::State& state) {
  const std::size_t rows = 1024, d = 16;
  const TensorD w = random(rows, d, 13, 0.5, 1), kh = random(rows, d, 14),
                k = random(rows, d, 15), v = random(rows, d, 16), a = random(rows, d, 17, 0, 1);
  for (auto _ : state) {
    wuneng::ad::Graph g(true);
    auto s = wuneng::state::scan(g.parameter(w), g.parameter(kh), g.parameter(k),
                                 g.parameter(v), g.parameter(a), 32);
    g.backward(wuneng::ad::sum(s));
  }
}
BENCHMARK(BM_ScanForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
