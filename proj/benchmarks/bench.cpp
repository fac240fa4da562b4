#include <benchmark/benchmark.h>

#include "skelfont/attention.hpp"
#include "skelfont/networks.hpp"
#include "skelfont/skeleton.hpp"
#include "skelfont/synth.hpp"

using namespace skelfont;

namespace {

BinaryGrid glyph(int canvas, int index) {
  const SynthSpec spec;
  const RasterImage img = render_glyph(make_glyph(spec.seed, index), spec.target_style, canvas, spec.seed, index);
  return binarize(img, 0.5f, Ink::kDark).grid;
}

Var<float> noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return Var<float>(std::move(t));
}

void BM_Thin(benchmark::State& state) {
  const BinaryGrid g = glyph(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(thin(g));
}
BENCHMARK(BM_Thin)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ExtractSkeleton(benchmark::State& state) {
  const SynthSpec spec;
  const RasterImage img = render_glyph(make_glyph(spec.seed, 3), spec.target_style, 256, spec.seed, 3);
  for (auto _ : state) benchmark::DoNotOptimize(extract_skeleton(img));
}
BENCHMARK(BM_ExtractSkeleton)->Unit(benchmark::kMillisecond);

void BM_Sram(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
  Rng rng(1);
  const auto p = RefinedAttentionParams<float>::make(c, rng);
  const auto head = ClassifierHead<float>::make(c);
  const Var<float> f = noise({c, hw, hw}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sram(f, head, p));
}
BENCHMARK(BM_Sram)->Args({64, 16})->Args({256, 64})->Unit(benchmark::kMillisecond);

void BM_GeneratorForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Generator<float> g(NetConfig{}, 1);
  const Var<float> x = noise({1, size, size}, 3), s = noise({1, size, size}, 4);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(generate(g, x, s));
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_GeneratorBackward(benchmark::State& state) {
  Generator<float> g(NetConfig{}, 1);
  const Var<float> x = noise({1, 64, 64}, 3), s = noise({1, 64, 64}, 4);
  for (auto _ : state) {
    g.params().zero_grad();
    generate(g, x, s).backward();
  }
}
BENCHMARK(BM_GeneratorBackward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
