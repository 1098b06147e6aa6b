#include <benchmark/benchmark.h>

#include "noisebench/fcnet.hpp"
#include "noisebench/perturb.hpp"
#include "noisebench/rng.hpp"

namespace nb = noisebench;

namespace {

// Digit-like 28x28 grid: a bright ring on black.
nb::LogicalGrid digit_grid() {
  nb::LogicalGrid g(28, 28);
  for (int r = 0; r < 28; ++r)
    for (int c = 0; c < 28; ++c) {
      const int dr = r - 14, dc = c - 14;
      const int d2 = dr * dr + dc * dc;
      g.set({r, c}, d2 >= 36 && d2 <= 64 ? 255 : 0);
    }
  return g;
}

void BM_PerturbCanvas(benchmark::State& state) {
  const auto kind = static_cast<nb::AttackKind>(state.range(0));
  const auto canvas = digit_grid().to_canvas();
  const auto spec = nb::AttackSpec::with_default_constant(kind, static_cast<std::uint32_t>(state.range(1)));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto out = nb::perturb_image(canvas, spec, seed++);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_PerturbCanvas)->ArgsProduct({{0, 1, 2, 3}, {10, 200}});

void BM_EdgeBlocks(benchmark::State& state) {
  const auto grid = digit_grid();
  for (auto _ : state) benchmark::DoNotOptimize(nb::edge_blocks(grid));
}
BENCHMARK(BM_EdgeBlocks);

void BM_Predict(benchmark::State& state) {
  const auto params = nb::init_params(1, nb::FcShape{3136, 3136, 10});
  const auto count = static_cast<std::size_t>(state.range(0));
  nb::SplitMix64 rng(2);
  std::vector<std::uint8_t> pixels(count * 3136);
  for (auto& p : pixels) p = static_cast<std::uint8_t>(rng.next() % 256);
  for (auto _ : state) benchmark::DoNotOptimize(nb::predict(params, pixels, count));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * count));
}
BENCHMARK(BM_Predict)->Arg(1)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
