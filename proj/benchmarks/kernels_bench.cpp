#include <benchmark/benchmark.h>

#include "bendr/model.hpp"
#include "bendr/ops.hpp"
#include "bendr/preprocess.hpp"

namespace {

using namespace bendr;

Tensor noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(shape);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void bm_conv1d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const Tensor x = noise({c, 1024}, 1);
  const Tensor w = noise({c, c, 2}, 2);
  const Tensor b = noise({c}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, b, Conv1dOptions{2, 0, 1}));
}
BENCHMARK(bm_conv1d)->Arg(64)->Arg(256)->Arg(512);

void bm_attention(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Tensor x = noise({22, d}, 1);
  const Tensor wq = noise({d, d}, 2), wk = noise({d, d}, 3), wv = noise({d, d}, 4), wo = noise({d, d}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(multi_head_attention(x, 4, wq, wk, wv, wo));
}
BENCHMARK(bm_attention)->Arg(64)->Arg(512);

void bm_filter(benchmark::State& state) {
  const SosFilter sos = design_butterworth_bandpass(FilterSpec{});
  Rng rng(4);
  std::vector<double> x(256 * 60);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(apply_filter(sos, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(bm_filter);

void bm_encode(benchmark::State& state) {
  const ModelConfig cfg = ModelConfig{}.scaled(static_cast<std::size_t>(state.range(0)));
  Rng rng(5);
  const Model model(cfg, Model::init_random(cfg, rng));
  const Tensor window = noise({20, 2048}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(window));
}
BENCHMARK(bm_encode)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
