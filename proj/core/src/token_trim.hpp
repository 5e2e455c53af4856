#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deer/generation.hpp"

namespace deer::detail {

/// Trim a token stream at a stop match: keep text strictly before
/// `match_start` (truncating the boundary token if the match begins inside
/// it) and return the text that had been consumed past `match_end`.
inline std::string trim_tokens_at(std::vector<TokenEvent>& tokens,
                                  std::size_t match_start, std::size_t match_end) {
  std::string after;
  std::vector<TokenEvent> kept;
  std::size_t pos = 0;
  for (auto& e : tokens) {
    const std::size_t begin = pos;
    const std::size_t end = pos + e.text.size();
    pos = end;
    if (end > match_end) {
      const std::size_t from = std::max(begin, match_end);
      after.append(e.text, from - begin, end - from);
    }
    if (end <= match_start) {
      kept.push_back(std::move(e));
    } else if (begin < match_start) {
      e.text = e.text.substr(0, match_start - begin);
      kept.push_back(std::move(e));
    }
  }
  tokens = std::move(kept);
  return after;
}

}  // namespace deer::detail
