#include "deer/script_gen.hpp"

#include <string>

#include "deer/controller.hpp"
#include "deer/errors.hpp"

namespace deer {

void ScenarioSpec::validate() const {
  if (chunks < 1) throw DomainError("scenario: chunks must be >= 1");
  if (pearl && (*pearl < 1 || *pearl >= chunks))
    throw DomainError("scenario: pearl " + std::to_string(*pearl) +
                      " beyond the " + std::to_string(chunks > 0 ? chunks - 1 : 0) +
                      " transition(s) of a " + std::to_string(chunks) + "-chunk scenario");
  for (double c : confidences)
    if (!(c > 0.0) || c > 1.0) throw DomainError("scenario: confidence outside (0,1]");
  if (marker.empty()) throw DomainError("scenario: marker must be non-empty");
  if (chunk_words < 1) throw DomainError("scenario: chunk_words must be >= 1");
  if (answer.empty()) throw DomainError("scenario: answer must be non-empty");
}

double scenario_confidence(const ScenarioSpec& spec, int transition_index) {
  if (transition_index >= 0 &&
      static_cast<std::size_t>(transition_index) < spec.confidences.size())
    return spec.confidences[static_cast<std::size_t>(transition_index)];
  if (spec.pearl && transition_index == *spec.pearl - 1) return 0.99;
  return 0.3;
}

Script generate_script(const ScenarioSpec& spec) {
  spec.validate();

  static const char* kWords[] = {"consider", "therefore", "compute", "verify",
                                 "expand",   "simplify",  "combine", "check"};
  constexpr std::size_t kWordCount = sizeof(kWords) / sizeof(kWords[0]);

  Script script;
  script.base_latency_ticks = spec.base_latency_ticks;
  script.per_token_ticks = spec.per_token_ticks;
  script.question = spec.question;
  script.gold_answer = spec.answer;

  std::size_t offset = 0;
  std::vector<std::size_t> marker_offsets;
  auto push = [&](std::string text, double prob = 0.995) {
    offset += text.size();
    script.main.push_back(ScriptToken{std::move(text), prob, {}});
  };

  for (int i = 1; i <= spec.chunks; ++i) {
    push(i == 1 ? "chunk 1:" : " chunk " + std::to_string(i) + ":");
    for (int w = 0; w < spec.chunk_words; ++w) {
      const std::size_t pick =
          (static_cast<std::size_t>(i) * 7 + static_cast<std::size_t>(w)) % kWordCount;
      push(std::string(" ") + kWords[pick]);
    }
    push(".");
    if (i < spec.chunks) {
      push(" ");
      marker_offsets.push_back(offset);
      push(spec.marker);
      push(",");
    }
  }
  push("\n");
  push(spec.think_close);
  push("\nThe final answer is ");
  push("\\boxed{");
  push(spec.answer);
  push("}");
  push(".");

  const std::vector<std::string>& inducers =
      spec.inducer_prompts.empty() ? default_inducer_prompts() : spec.inducer_prompts;

  for (std::size_t t = 0; t < marker_offsets.size(); ++t) {
    const double conf = scenario_confidence(spec, static_cast<int>(t));
    for (const auto& inducer : inducers) {
      BranchScript trial;
      trial.key = inducer;
      trial.offset = marker_offsets[t];
      trial.tokens.push_back(ScriptToken{"{", 0.98, {}});
      trial.tokens.push_back(ScriptToken{spec.answer, conf, {}});
      trial.tokens.push_back(ScriptToken{"}", 0.98, {}});
      script.branches.push_back(std::move(trial));
    }
    BranchScript conclusion;
    conclusion.key = spec.think_close;
    conclusion.offset = marker_offsets[t];
    conclusion.tokens.push_back(ScriptToken{"\nGiven the reasoning so far, ", 0.99, {}});
    conclusion.tokens.push_back(ScriptToken{"the answer is ", 0.99, {}});
    conclusion.tokens.push_back(ScriptToken{"\\boxed{", 0.99, {}});
    conclusion.tokens.push_back(ScriptToken{spec.answer, 0.99, {}});
    conclusion.tokens.push_back(ScriptToken{"}", 0.99, {}});
    conclusion.tokens.push_back(ScriptToken{".", 0.99, {}});
    script.branches.push_back(std::move(conclusion));
  }

  script.validate();
  return script;
}

}  // namespace deer
