#include "deer/boxed.hpp"

namespace deer {

std::vector<BoxedSpan> find_boxed_spans(std::string_view text) {
  static constexpr std::string_view kBoxed = "\\boxed";
  std::vector<BoxedSpan> spans;
  std::size_t pos = 0;
  while ((pos = text.find(kBoxed, pos)) != std::string_view::npos) {
    std::size_t open = pos + kBoxed.size();
    // Tolerate whitespace between \boxed and its brace.
    while (open < text.size() && (text[open] == ' ' || text[open] == '\t')) ++open;
    if (open >= text.size() || text[open] != '{') {
      pos += kBoxed.size();
      continue;
    }
    int depth = 0;
    std::size_t close = std::string_view::npos;
    for (std::size_t i = open; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      else if (text[i] == '}' && --depth == 0) {
        close = i;
        break;
      }
    }
    if (close == std::string_view::npos) {
      pos += kBoxed.size();  // unbalanced; skip this occurrence
      continue;
    }
    spans.push_back(BoxedSpan{open, close});
    pos = close + 1;
  }
  return spans;
}

std::optional<BoxedSpan> first_boxed_span(std::string_view text) {
  auto spans = find_boxed_spans(text);
  if (spans.empty()) return std::nullopt;
  return spans.front();
}

std::optional<std::string> extract_boxed(std::string_view text) {
  auto spans = find_boxed_spans(text);
  if (spans.empty()) return std::nullopt;
  return std::string(spans.back().interior(text));
}

}  // namespace deer
