#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deer {

/// One candidate token with its natural-log probability.
struct TokenAlt {
  std::string text;
  double logprob = 0.0;
};

/**
 * One generated token.
 *
 * Invariants:
 * - logprob <= 0, and every alternative logprob <= 0
 * - the emitted token appears among top_alternatives (so k >= 1)
 * - entropy, when present, is in [0, ln k] and equals the entropy of the
 *   renormalized top-k distribution (a lower bound of the true full-vocabulary
 *   entropy, since only the top alternatives travel over the wire)
 */
struct TokenEvent {
  std::string text;
  double logprob = 0.0;
  std::vector<TokenAlt> top_alternatives;
  std::optional<double> entropy;  // nats
};

/// Entropy of the renormalized distribution over `alts`, in nats.
double renormalized_entropy(std::span<const TokenAlt> alts);

enum class FinishReason {
  stop_sequence_hit,
  budget_exhausted,
  end_of_text,
  cancelled,
};

std::string_view to_string(FinishReason reason);

/// Parameters of one backend call.
struct GenerationRequest {
  std::string prompt;
  int max_tokens = 1;
  std::vector<std::string> stop_sequences;
  bool want_logprobs = true;
  int top_k = 5;  // alternatives per position when want_logprobs
  double temperature = 0.0;
  std::optional<uint64_t> seed;

  /// Halt right after the first balanced `\boxed{...}` closes. Trial-answer
  /// calls set this so induction does not run past the answer span. The
  /// matcher is seeded with the prompt tail because inducer prompts end in
  /// `\boxed` and the opening brace is the first generated character.
  bool halt_after_boxed = false;

  /// Virtual-time cancellation for simulated backends: stop once this many
  /// ticks have elapsed, reporting FinishReason::cancelled. Ignored by
  /// wall-clock backends.
  std::optional<uint64_t> tick_budget;

  /// Throws DomainError when the request violates its preconditions.
  void validate() const;
};

/// Outcome of one backend call.
struct GenerationResult {
  std::vector<TokenEvent> tokens;
  FinishReason finish_reason = FinishReason::end_of_text;

  /// Present iff finish_reason == stop_sequence_hit. The matched stop text is
  /// excluded from `tokens`; callers re-append it when they resume.
  std::optional<std::string> matched_stop;

  /// Characters the backend had already consumed past the end of the matched
  /// stop text before halting (e.g. the tail of a token that contained the
  /// marker: stopping "Waiting" on "Wait" leaves "ing" here). Empty when the
  /// match ended exactly at the consumed boundary. Lets the controller check
  /// word boundaries around a matched marker.
  std::string text_after_stop;

  /// Wall-clock milliseconds for live backends; simulated ticks for
  /// virtual-time backends (see Backend::virtual_time()).
  uint64_t duration_ms = 0;

  /// Tokens the backend actually consumed to produce this result, including
  /// tokens swallowed by stop-sequence matching. >= tokens.size().
  uint64_t consumed_tokens = 0;

  /// Concatenated token text.
  std::string text() const;
};

}  // namespace deer
