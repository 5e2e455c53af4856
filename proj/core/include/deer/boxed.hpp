#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deer {

/// A balanced `\boxed{...}` span. Offsets index into the searched text.
struct BoxedSpan {
  std::size_t open_brace = 0;   // offset of '{'
  std::size_t close_brace = 0;  // offset of the balancing '}'

  std::size_t interior_begin() const { return open_brace + 1; }
  std::size_t interior_end() const { return close_brace; }

  std::string_view interior(std::string_view text) const {
    return text.substr(interior_begin(), interior_end() - interior_begin());
  }
};

/// Every balanced `\boxed{...}` span in order of appearance. Braces balance
/// across nesting, so `\boxed{\frac{1}{2}}` is one span with interior
/// `\frac{1}{2}`. Unbalanced boxes are skipped.
std::vector<BoxedSpan> find_boxed_spans(std::string_view text);

std::optional<BoxedSpan> first_boxed_span(std::string_view text);

/// Content of the last balanced box, the answer extractor used for grading.
/// Empty optional when the text has no balanced box.
std::optional<std::string> extract_boxed(std::string_view text);

}  // namespace deer
