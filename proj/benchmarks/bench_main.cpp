#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "deer/confidence.hpp"
#include "deer/controller.hpp"
#include "deer/noise_lab.hpp"
#include "deer/script_gen.hpp"
#include "deer/scripted_backend.hpp"
#include "deer/stop_matcher.hpp"

namespace {

std::vector<double> random_probs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(1e-4, 1.0);
  std::vector<double> probs(n);
  for (auto& p : probs) p = unit(rng);
  return probs;
}

void BM_ConfidenceGeomean(benchmark::State& state) {
  const auto probs = random_probs(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deer::confidence_geomean(probs));
  }
}
BENCHMARK(BM_ConfidenceGeomean)->Arg(8)->Arg(64)->Arg(512);

void BM_Calibrate(benchmark::State& state) {
  const auto confs = random_probs(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(deer::calibrate(confs, 1.0));
  }
}
BENCHMARK(BM_Calibrate)->Arg(4)->Arg(16);

void BM_StopMatcherScan(benchmark::State& state) {
  std::string text;
  std::mt19937_64 rng(3);
  const char* words[] = {"therefore ", "compute ", "verify ", "expand "};
  for (int i = 0; i < state.range(0); ++i) text += words[rng() % 4];
  text += "Wait";
  for (auto _ : state) {
    deer::StopMatcher matcher{{"Wait", "Alternatively"}};
    // Feed in token-sized slices to exercise the window handling.
    for (std::size_t pos = 0; pos < text.size(); pos += 7) {
      if (matcher.feed(std::string_view(text).substr(pos, 7))) break;
    }
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_StopMatcherScan)->Arg(256)->Arg(4096);

void BM_McFalsePositive(benchmark::State& state) {
  deer::noise::NoiseScenario scenario;
  scenario.trials = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        deer::noise::mc_false_positive(scenario, deer::noise::Strategy::mad_exact));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McFalsePositive)->Arg(10'000)->Arg(100'000);

void BM_ControllerRun(benchmark::State& state) {
  deer::ScenarioSpec spec;
  spec.chunks = static_cast<int>(state.range(0));
  spec.pearl = spec.chunks - 1;
  deer::Script script = deer::generate_script(spec);
  deer::ScriptedBackend backend(script);
  deer::ControllerConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deer::run_deer("q", spec.question, cfg, backend));
  }
}
BENCHMARK(BM_ControllerRun)->Arg(3)->Arg(6);

}  // namespace

BENCHMARK_MAIN();
