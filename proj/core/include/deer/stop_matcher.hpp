#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deer {

/**
 * Incremental multi-pattern substring matcher.
 *
 * Stop sequences are matched on detokenized text with a sliding window that
 * spans token boundaries, because markers like "Wait" may split across
 * tokens. Feed text in arbitrary chunks; the matcher reports the earliest
 * match (by start offset in the whole stream), breaking ties by longest
 * pattern, then by pattern order.
 */
class StopMatcher {
 public:
  struct Match {
    std::size_t pattern_index = 0;
    std::size_t start = 0;  // offset in the full fed stream
    std::size_t end = 0;    // one past the last matched character
  };

  StopMatcher() = default;
  explicit StopMatcher(std::vector<std::string> patterns);

  bool empty() const { return patterns_.empty(); }
  const std::string& pattern(std::size_t i) const { return patterns_[i]; }

  /// Feed the next chunk. Returns the first match once one completes; after
  /// that the matcher is exhausted and further feeds return nothing.
  std::optional<Match> feed(std::string_view chunk);

  /// Total characters fed so far.
  std::size_t offset() const { return offset_; }

 private:
  std::vector<std::string> patterns_;
  std::size_t max_len_ = 0;
  std::string window_;          // tail of the stream, at most max_len_-1 chars between feeds
  std::size_t window_start_ = 0;  // stream offset of window_[0]
  std::size_t offset_ = 0;
  bool done_ = false;
};

/**
 * Incremental detector for the first balanced `\boxed{...}` span.
 *
 * Tracks brace depth from the first `\boxed{` onward and reports the stream
 * offset one past the balancing close brace. Seed it with the prompt tail via
 * `prime` so a `\boxed` that ends the prompt still opens the span.
 */
class BoxedMatcher {
 public:
  BoxedMatcher() = default;

  /// Pre-feed prompt text. Offsets reported by feed() remain relative to the
  /// generated stream only (primed text counts negatively).
  void prime(std::string_view prompt_tail);

  /// Returns one past the close brace, relative to generated text, once the
  /// first boxed span balances. May be reported while feeding the chunk that
  /// closes it.
  std::optional<std::size_t> feed(std::string_view chunk);

 private:
  std::optional<std::size_t> scan(std::string_view chunk, bool generated);

  std::string tail_;       // last few chars while searching for "\boxed{"
  bool in_box_ = false;
  int depth_ = 0;
  std::size_t generated_offset_ = 0;
  bool done_ = false;
};

}  // namespace deer
