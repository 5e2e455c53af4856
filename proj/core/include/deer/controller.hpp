#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deer/backend.hpp"
#include "deer/confidence.hpp"
#include "deer/errors.hpp"
#include "deer/monitor.hpp"

namespace deer {

enum class RunMode { vanilla, deer, deer_pro, deer_parallel };

std::string_view to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(std::string_view name);

/// The default answer-inducer prompts. The first is the standard inducer;
/// the remaining three are the additional multi-prompt variants.
const std::vector<std::string>& default_inducer_prompts();

/// Everything one controller run needs to know.
struct ControllerConfig {
  std::string system_prompt =
      "Please reason step by step, and put your final answer within \\boxed{}.";

  /// Answer-inducer prompts, used verbatim (they embed their own leading
  /// newlines). n_prompts of them are used per attempt in deer_pro mode;
  /// other modes use only the first.
  std::vector<std::string> inducer_prompts = default_inducer_prompts();

  std::string think_open = "<think>";
  std::string think_close = "</think>";

  /// Main-branch token budget for one question.
  int max_total_tokens = 16384;

  RunMode mode = RunMode::deer;
  MonitorConfig monitor{};

  /// Exit threshold: exit iff confidence > lambda, strictly.
  double lambda = 0.95;

  /// Deviation penalty for deer_pro calibration.
  double alpha = 1.0;

  /// Number of inducer prompts aggregated per attempt in deer_pro mode.
  int n_prompts = 4;

  /// Token cap for one trial-answer induction.
  int trial_max_tokens = 512;

  /// Conclusion budget: remaining budget after exit, capped at this.
  int conclusion_max_tokens = 2048;

  /// When > 0, trial generation stops after this many tokens and confidence
  /// uses at most that many answer tokens. 0 = unlimited (math tasks);
  /// 50 is the working setting for code tasks, where trial answers run long.
  int confidence_token_cap = 0;

  /// Experiment flag mirroring the arithmetic-mean aggregation variant.
  bool arithmetic_mean = false;

  /// Count induced (trial-branch) tokens against max_total_tokens. Off by
  /// default: only main-branch tokens consume the budget.
  bool count_induced_in_budget = false;

  /// Top-k alternatives requested per token (confidence + entropy need them).
  int top_k = 5;

  /// Sampling temperature for every backend call. 0 = greedy, the working
  /// setting for reproducible confidence estimates.
  double temperature = 0.0;

  /// Seed forwarded to the backend (meaningful only when sampling).
  std::optional<std::uint64_t> seed;

  void validate() const;  // throws ConfigError naming the offending field
};

/// Scheduling metadata for one induction attempt. Timing fields differ
/// between sequential and branch-parallel modes; everything else matches.
struct AttemptTiming {
  std::uint64_t induction_ms = 0;     // trial-answer branch duration
  std::uint64_t continuation_ms = 0;  // continuation branch duration (0 if none ran)
  bool overlapped = false;            // true when both branches ran concurrently
  std::uint64_t cancelled_tokens = 0; // continuation tokens discarded on exit
};

/// One trial-answer induction at one transition point.
struct InductionAttempt {
  TransitionPoint transition;
  std::vector<TrialAnswer> trials;                 // 1, or n_prompts in deer_pro
  std::optional<CalibratedConfidence> calibrated;  // deer_pro only
  ExitDecision decision;
  AttemptTiming timing;
};

/**
 * Full accounting of one question.
 *
 * Token conventions: reasoning_tokens covers the thinking phase: generated
 * chunk tokens, each transition marker that re-enters the context, and the
 * model-generated end-of-thinking delimiter. The delimiter a controller exit
 * injects costs zero tokens (injected text is not generation).
 * conclusion_tokens covers the conclusion. induced_tokens is everything
 * generated and then discarded: trial-answer branches, markers consumed at an
 * exit, and cancelled continuation partials in branch-parallel mode. Backend
 * tokens consumed = reasoning_tokens + induced_tokens + conclusion_tokens.
 */
struct RunRecord {
  std::string question_id;
  RunMode mode = RunMode::deer;

  /// Generated text only (prompt context removed): thoughts, then the
  /// end-of-thinking delimiter, then the conclusion.
  std::string transcript;

  std::vector<std::string> thought_chunks;
  std::vector<InductionAttempt> induction_attempts;

  bool exited_early = false;
  std::optional<int> exit_chunk_index;  // 1-based chunk after which exit fired

  std::uint64_t reasoning_tokens = 0;
  std::uint64_t induced_tokens = 0;
  std::uint64_t conclusion_tokens = 0;

  std::optional<std::string> final_answer;  // last balanced box in transcript
  std::uint64_t wall_time_ms = 0;  // virtual ticks on simulated backends
  bool hit_token_budget = false;   // thought generation ran out of budget
};

/// A controller failure carrying whatever was recorded before it.
struct RunError : Error {
  RunError(const std::string& what, RunRecord partial_record)
      : Error(what), partial(std::move(partial_record)) {}
  RunRecord partial;
};

/**
 * Run one question through the early-exit control loop.
 *
 * Generate thoughts until a transition point, induce a trial answer, score
 * it, and either finish thinking (append think_close, generate the
 * conclusion) or re-append the transition marker and resume on the original
 * path. Until an exit fires, the generated thought text is byte-identical to
 * what vanilla decoding would produce against the same backend.
 */
RunRecord run_deer(const std::string& question_id, const std::string& question,
                   const ControllerConfig& config, Backend& backend);

/// No intervention: generate thoughts to their natural end, then the
/// conclusion. Zero induction attempts.
RunRecord run_vanilla(const std::string& question_id, const std::string& question,
                      const ControllerConfig& config, Backend& backend);

/// Multi-prompt variant: at each transition, n_prompts inductions run and the
/// exit decision uses the deviation-calibrated score. With n_prompts == 1
/// this degenerates to run_deer.
RunRecord run_deer_pro(const std::string& question_id, const std::string& question,
                       const ControllerConfig& config, Backend& backend);

/**
 * Branch-parallel variant: at each transition the continuation request and
 * the induction request run concurrently; on exit the continuation is
 * cancelled and its tokens discarded. Produces a transcript byte-identical
 * to run_deer's on a deterministic backend, at lower wall time whenever an
 * attempt does not exit. Virtual-time backends are scheduled on the
 * simulated clock, so their records stay fully reproducible.
 */
RunRecord run_parallel_branch(const std::string& question_id,
                              const std::string& question,
                              const ControllerConfig& config, Backend& backend);

/// Dispatch on config.mode.
RunRecord run_question(const std::string& question_id, const std::string& question,
                       const ControllerConfig& config, Backend& backend);

}  // namespace deer
