#include "deer/stop_matcher.hpp"

#include <algorithm>

namespace deer {

StopMatcher::StopMatcher(std::vector<std::string> patterns)
    : patterns_(std::move(patterns)) {
  std::erase_if(patterns_, [](const std::string& p) { return p.empty(); });
  for (const auto& p : patterns_) max_len_ = std::max(max_len_, p.size());
}

std::optional<StopMatcher::Match> StopMatcher::feed(std::string_view chunk) {
  if (done_ || patterns_.empty()) {
    offset_ += chunk.size();
    return std::nullopt;
  }

  // Search text = retained tail + new chunk. Matches wholly inside the tail
  // were already ruled out, so every hit here either spans the boundary or
  // lies in the chunk.
  const std::size_t base = window_start_;
  std::string text = window_;
  text.append(chunk);
  offset_ += chunk.size();

  std::optional<Match> best;
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    const std::size_t pos = text.find(patterns_[i]);
    if (pos == std::string::npos) continue;
    Match m{i, base + pos, base + pos + patterns_[i].size()};
    if (!best || m.start < best->start ||
        (m.start == best->start && patterns_[i].size() > patterns_[best->pattern_index].size())) {
      best = m;
    }
  }
  if (best) {
    done_ = true;
    return best;
  }

  // Retain max_len-1 trailing chars so a pattern split across feeds still matches.
  const std::size_t keep = std::min(text.size(), max_len_ > 0 ? max_len_ - 1 : 0);
  window_.assign(text.end() - static_cast<std::ptrdiff_t>(keep), text.end());
  window_start_ = base + text.size() - keep;
  return std::nullopt;
}

namespace {
constexpr std::string_view kBoxedOpen = "\\boxed{";
}

void BoxedMatcher::prime(std::string_view prompt_tail) {
  scan(prompt_tail, /*generated=*/false);
}

std::optional<std::size_t> BoxedMatcher::feed(std::string_view chunk) {
  return scan(chunk, /*generated=*/true);
}

std::optional<std::size_t> BoxedMatcher::scan(std::string_view chunk, bool generated) {
  std::optional<std::size_t> result;
  for (std::size_t i = 0; i < chunk.size() && !done_; ++i) {
    const char c = chunk[i];
    if (!in_box_) {
      tail_.push_back(c);
      if (tail_.size() > kBoxedOpen.size()) tail_.erase(0, tail_.size() - kBoxedOpen.size());
      if (std::string_view(tail_).ends_with(kBoxedOpen)) {
        in_box_ = true;
        depth_ = 1;
        tail_.clear();
      }
    } else if (c == '{') {
      ++depth_;
    } else if (c == '}' && --depth_ == 0) {
      done_ = true;
      if (generated) result = generated_offset_ + i + 1;  // one past '}'
    }
  }
  if (generated) generated_offset_ += chunk.size();
  return result;
}

}  // namespace deer
