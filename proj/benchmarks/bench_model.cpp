#include <benchmark/benchmark.h>

#include "wuneng/model.hpp"
#include "wuneng/train.hpp"

namespace {

wuneng::ModelConfig copy_config() {
  wuneng::ModelConfig c;
  c.vocab_size = 16;
  c.d_model = 64;
  c.n_heads = 4;
  c.n_layers = 2;
  c.d_ffn = 256;
  return c;
}

void BM_ModelForward(benchmark::State& state) {
  const wuneng::ModelParams p = wuneng::init_model(copy_config());
  wuneng::Rng rng(1);
  std::vector<int> tokens(32);
  for (auto& t : tokens) t = static_cast<int>(rng.uniform_int(16));
  for (auto _ : state) benchmark::DoNotOptimize(wuneng::model_forward(tokens, p));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

// One optimizer step at the copy-task acceptance size (batch 32 x 32 tokens).
void BM_TrainStep(benchmark::State& state) {
  wuneng::TrainConfig t;
  t.steps = 1;
  t.batch = static_cast<std::size_t>(state.range(0));
  const wuneng::ModelParams p = wuneng::init_model(copy_config());
  for (auto _ : state) benchmark::DoNotOptimize(wuneng::train::run(p, t));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
