#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deer/generation.hpp"

namespace deer {

enum class MonitorStrategy { marker, entropy };

std::string_view to_string(MonitorStrategy strategy);

/// How reasoning-transition points are detected in the thought stream.
struct MonitorConfig {
  MonitorStrategy strategy = MonitorStrategy::marker;

  /// Linguistic action-transition markers. "Alternatively" is a common
  /// second choice; it fires less often and yields longer chunks.
  std::vector<std::string> markers = {"Wait"};

  /// Require non-word characters (or text edges) on both sides of a marker
  /// match: "Wait" inside "Waiting" is not a transition.
  bool word_boundary = true;

  /// Reasoning-step delimiter for the entropy strategy.
  std::string step_delimiter = "\n\n";

  /// Entropy threshold in nats for the first token after a step delimiter.
  /// An even binary split (ln 2 ~ 0.693) clears the default.
  double entropy_threshold = 0.672;

  void validate() const;  // throws DomainError
};

enum class TransitionKind { marker_hit, high_entropy_step };

/// A candidate early-exit position in the thought text.
struct TransitionPoint {
  std::size_t char_offset = 0;  // position within the thought text
  TransitionKind kind = TransitionKind::marker_hit;
  std::string trigger_marker;     // set when kind == marker_hit
  double trigger_entropy = 0.0;   // set when kind == high_entropy_step
};

/**
 * Stateful marker scanner over a growing text stream. Pure function of the
 * text fed so far: for any segmentation into deltas, the reported transitions
 * equal those of a single whole-text scan. Matches are consumed
 * non-overlapping, earliest first.
 *
 * A match that ends flush with the fed text is held back until the next
 * delta (or finish()) resolves its right word boundary.
 */
class MarkerScanner {
 public:
  explicit MarkerScanner(MonitorConfig config);

  /// Scan the next delta; returns the earliest new transition, if any.
  std::optional<TransitionPoint> scan(std::string_view delta);

  /// Scan any remaining deltas' worth of held-back state at end of stream.
  std::optional<TransitionPoint> finish();

  /// Transitions found after the current scan position, exhaustively.
  std::vector<TransitionPoint> drain(std::string_view delta);

 private:
  std::optional<TransitionPoint> emit_from(std::size_t search_from);

  MonitorConfig config_;
  std::string text_;        // full text seen so far (desk-scale streams)
  std::size_t search_pos_ = 0;
  bool finished_ = false;
};

/// Single-shot convenience: earliest marker transition in `text` at or after
/// `from`, with both word boundaries decidable (end of text is a boundary).
std::optional<TransitionPoint> scan_marker(std::string_view text,
                                           const MonitorConfig& config,
                                           std::size_t from = 0);

/**
 * Entropy strategy: decide whether the first token generated after a step
 * delimiter marks a transition. Fires iff event.entropy > entropy_threshold.
 * The delimiter itself is never a transition; only this token's entropy
 * matters. Throws DomainError when the event carries no entropy (callers
 * must request top-k logprobs).
 */
std::optional<TransitionPoint> scan_entropy(const TokenEvent& step_boundary_event,
                                            const MonitorConfig& config,
                                            std::size_t char_offset = 0);

}  // namespace deer
