#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "advsr/attacks.h"
#include "advsr/corpus.h"
#include "advsr/ctc.h"
#include "advsr/dsp.h"
#include "advsr/metrics.h"
#include "advsr/model.h"

namespace {

using namespace advsr;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

model::TrainedModel untrained(model::Arch arch) {
  model::TrainedModel m;
  m.id = std::string(model::arch_name(arch));
  m.arch = arch;
  m.params = model::init_params(arch, m.feat.n_bins, m.vocab.size(), 1);
  return m;
}

void BM_Rfft(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::rfft(x));
  state.SetComplexityN(state.range(0));
}
// Powers of two take the radix-2 path, the others Bluestein.
BENCHMARK(BM_Rfft)->Arg(128)->Arg(1024)->Arg(4096)->Arg(1000)->Arg(4099)->Arg(8000);

void BM_CtcLoss(benchmark::State& state) {
  const std::size_t t = static_cast<std::size_t>(state.range(0)), v = 9;
  auto raw = noise(t * v, 2);
  for (std::size_t r = 0; r < t; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(raw[r * v + c]);
    for (std::size_t c = 0; c < v; ++c) raw[r * v + c] -= std::log(z);
  }
  const grad::Matrix lp({t, v}, raw);
  const auto label = model::Vocabulary::standard().encode("a b c d e");
  for (auto _ : state) benchmark::DoNotOptimize(model::ctc_loss(lp, label));
}
BENCHMARK(BM_CtcLoss)->Arg(50)->Arg(200)->Arg(800);

// One second of audio at 8 kHz.
void BM_Transcribe(benchmark::State& state) {
  const auto m = untrained(static_cast<model::Arch>(state.range(0)));
  const signal::Waveform w(noise(8000, 3), 8000);
  for (auto _ : state) benchmark::DoNotOptimize(model::transcribe(m, w));
  state.SetLabel(m.id);
}
BENCHMARK(BM_Transcribe)
    ->Arg(static_cast<int>(model::Arch::kFfCtc))
    ->Arg(static_cast<int>(model::Arch::kRnnCtc))
    ->Arg(static_cast<int>(model::Arch::kEncHead));

// Forward plus backward to the waveform: the inner loop of every white-box attack.
void BM_WaveformGradient(benchmark::State& state) {
  const auto m = untrained(static_cast<model::Arch>(state.range(0)));
  const corpus::Utterance u{"bench", signal::Waveform(noise(8000, 4), 8000), "a b c"};
  attacks::PgdConfig config;
  config.steps = 1;
  for (auto _ : state) benchmark::DoNotOptimize(attacks::pgd(m, u, config));
  state.SetLabel(m.id);
}
BENCHMARK(BM_WaveformGradient)
    ->Arg(static_cast<int>(model::Arch::kFfCtc))
    ->Arg(static_cast<int>(model::Arch::kRnnCtc))
    ->Arg(static_cast<int>(model::Arch::kEncHead));

void BM_EditDistance(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> sym(0, 7);
  std::vector<int> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (auto& v : a) v = sym(rng);
  for (auto& v : b) v = sym(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        metrics::edit_distance(std::span<const int>(a), std::span<const int>(b)));
  }
}
BENCHMARK(BM_EditDistance)->Arg(10)->Arg(100)->Arg(1000);

void BM_Kenansville(benchmark::State& state) {
  const corpus::Utterance u{"bench", signal::Waveform(noise(8000, 6), 8000), "a"};
  for (auto _ : state) benchmark::DoNotOptimize(attacks::kenansville_attack(u, {}));
}
BENCHMARK(BM_Kenansville);

}  // namespace

BENCHMARK_MAIN();
