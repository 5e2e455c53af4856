#pragma once

#include <random>
#include <vector>

#include "deer/script_gen.hpp"

namespace deer::testing {

/// A counting wrapper so tests can total the tokens a backend truly consumed.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  GenerationResult generate(const GenerationRequest& request, CancelToken cancel) override {
    auto res = inner_.generate(request, cancel);
    consumed_ += res.consumed_tokens;
    ++calls_;
    return res;
  }
  using Backend::generate;

  bool deterministic() const override { return inner_.deterministic(); }
  bool virtual_time() const override { return inner_.virtual_time(); }

  std::uint64_t consumed() const { return consumed_; }
  int calls() const { return calls_; }

 private:
  Backend& inner_;
  std::atomic<std::uint64_t> consumed_{0};
  std::atomic<int> calls_{0};
};

/// Deterministic spread of oracle scenarios: varying chunk counts, staircase
/// confidences (so different thresholds exit at different chunks), explicit
/// pearls, never-exiting runs, and varied latency models.
inline std::vector<ScenarioSpec> oracle_scenarios(int count, std::uint64_t seed = 2024) {
  static const double kLevels[] = {0.30, 0.55, 0.80, 0.92, 0.96, 0.98, 0.999};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> chunks_dist(2, 6);
  std::uniform_int_distribution<int> words_dist(1, 5);
  std::uniform_int_distribution<std::uint64_t> base_dist(1, 3);
  std::uniform_int_distribution<std::uint64_t> per_dist(1, 2);
  std::uniform_int_distribution<std::size_t> level_dist(0, 6);

  std::vector<ScenarioSpec> specs;
  for (int i = 0; i < count; ++i) {
    ScenarioSpec spec;
    spec.chunks = chunks_dist(rng);
    spec.chunk_words = words_dist(rng);
    spec.base_latency_ticks = base_dist(rng);
    spec.per_token_ticks = per_dist(rng);
    spec.answer = (i % 3 == 0) ? "42" : (i % 3 == 1 ? "7" : "1/2");
    spec.question = "scenario question " + std::to_string(i);

    switch (i % 4) {
      case 0: {  // explicit pearl with defaulted confidences
        spec.pearl = 1 + (i % (spec.chunks - 1));
        break;
      }
      case 1: {  // staircase: lambda sweep exits at different chunks
        for (int t = 0; t + 1 < spec.chunks; ++t)
          spec.confidences.push_back(kLevels[std::min<std::size_t>(
              1 + static_cast<std::size_t>(t) * 2, 6)]);
        break;
      }
      case 2: {  // never exits at any tested threshold
        for (int t = 0; t + 1 < spec.chunks; ++t) spec.confidences.push_back(0.3);
        break;
      }
      default: {  // random confidence levels
        for (int t = 0; t + 1 < spec.chunks; ++t)
          spec.confidences.push_back(kLevels[level_dist(rng)]);
        break;
      }
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace deer::testing
