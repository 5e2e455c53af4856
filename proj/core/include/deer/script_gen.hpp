#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deer/scripted_backend.hpp"

namespace deer {

/**
 * Declarative description of a scripted early-exit scenario, from which a
 * full backend script is generated: `chunks` thought chunks separated by a
 * transition marker, trial-answer branches at every transition with the given
 * confidences, per-exit conclusion branches, and the natural end-of-thinking
 * continuation.
 *
 * A controller run over the generated script exits at chunk `pearl` exactly
 * when confidences[pearl-1] clears the threshold and no earlier confidence
 * does. With pearl unset, every confidence stays low and the run matches
 * vanilla decoding.
 */
struct ScenarioSpec {
  int chunks = 3;
  std::optional<int> pearl;  // 1-based chunk index; must be < chunks

  /// Confidence of the trial answer at transition i (after chunk i+1...).
  /// Missing entries default to 0.3; the pearl entry defaults to 0.99.
  std::vector<double> confidences;

  std::string marker = "Wait";
  std::string question = "What is 6 times 7?";
  std::string answer = "42";

  /// Words of filler text per chunk (token count scales with this).
  int chunk_words = 3;

  std::uint64_t base_latency_ticks = 2;
  std::uint64_t per_token_ticks = 1;

  /// Inducer prompts to script trial branches for; defaults to the
  /// controller's default prompt set.
  std::vector<std::string> inducer_prompts;

  std::string think_close = "</think>";

  void validate() const;  // throws DomainError (e.g. pearl beyond chunks)
};

/// Build the script for a scenario.
Script generate_script(const ScenarioSpec& spec);

/// The confidence a controller attempt at transition index i (0-based)
/// will observe on this scenario's script.
double scenario_confidence(const ScenarioSpec& spec, int transition_index);

}  // namespace deer
