#include "deer/monitor.hpp"

#include <algorithm>
#include <cctype>

#include "deer/errors.hpp"

namespace deer {

std::string_view to_string(MonitorStrategy strategy) {
  return strategy == MonitorStrategy::marker ? "marker" : "entropy";
}

void MonitorConfig::validate() const {
  if (strategy == MonitorStrategy::marker) {
    if (markers.empty())
      throw DomainError("monitor config: markers must be non-empty for the marker strategy");
    for (const auto& m : markers)
      if (m.empty()) throw DomainError("monitor config: empty marker string");
  } else {
    if (!(entropy_threshold > 0.0))
      throw DomainError("monitor config: entropy_threshold must be > 0");
    if (step_delimiter.empty())
      throw DomainError("monitor config: step_delimiter must be non-empty");
  }
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

struct RawMatch {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t marker_index = 0;
};

// Earliest marker occurrence in text at or after `from`; ties broken by
// longest marker. Boundary filtering happens in the caller.
std::optional<RawMatch> find_next(std::string_view text, const std::vector<std::string>& markers,
                                  std::size_t from) {
  std::optional<RawMatch> best;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (markers[i].empty()) continue;
    const std::size_t pos = text.find(markers[i], from);
    if (pos == std::string_view::npos) continue;
    RawMatch m{pos, pos + markers[i].size(), i};
    if (!best || m.start < best->start ||
        (m.start == best->start && markers[i].size() > markers[best->marker_index].size())) {
      best = m;
    }
  }
  return best;
}

bool left_boundary_ok(std::string_view text, std::size_t start) {
  return start == 0 || !is_word_char(text[start - 1]);
}

// Right boundary against the char after the match; `known_end` is how much
// text exists. Returns nullopt when undecidable (match flush with the end of
// a still-growing stream).
std::optional<bool> right_boundary_ok(std::string_view text, std::size_t end, bool stream_final) {
  if (end < text.size()) return !is_word_char(text[end]);
  return stream_final ? std::optional<bool>(true) : std::nullopt;
}

}  // namespace

MarkerScanner::MarkerScanner(MonitorConfig config) : config_(std::move(config)) {
  if (config_.strategy != MonitorStrategy::marker)
    throw DomainError("MarkerScanner requires the marker strategy");
  config_.validate();
}

std::optional<TransitionPoint> MarkerScanner::emit_from(std::size_t search_from) {
  std::size_t from = search_from;
  while (true) {
    auto m = find_next(text_, config_.markers, from);
    if (!m) return std::nullopt;
    if (config_.word_boundary) {
      if (!left_boundary_ok(text_, m->start)) {
        from = m->start + 1;
        continue;
      }
      auto right = right_boundary_ok(text_, m->end, finished_);
      if (!right.has_value()) return std::nullopt;  // held back until more text
      if (!*right) {
        from = m->start + 1;
        continue;
      }
    }
    search_pos_ = m->end;  // transitions are consumed, non-overlapping
    TransitionPoint tp;
    tp.char_offset = m->start;
    tp.kind = TransitionKind::marker_hit;
    tp.trigger_marker = config_.markers[m->marker_index];
    return tp;
  }
}

std::optional<TransitionPoint> MarkerScanner::scan(std::string_view delta) {
  text_.append(delta);
  return emit_from(search_pos_);
}

std::optional<TransitionPoint> MarkerScanner::finish() {
  finished_ = true;
  return emit_from(search_pos_);
}

std::vector<TransitionPoint> MarkerScanner::drain(std::string_view delta) {
  std::vector<TransitionPoint> out;
  if (auto t = scan(delta)) {
    out.push_back(*t);
    while (auto more = emit_from(search_pos_)) out.push_back(*more);
  }
  return out;
}

std::optional<TransitionPoint> scan_marker(std::string_view text, const MonitorConfig& config,
                                           std::size_t from) {
  if (config.strategy != MonitorStrategy::marker)
    throw DomainError("scan_marker requires the marker strategy");
  config.validate();
  std::size_t search = from;
  while (true) {
    auto m = find_next(text, config.markers, search);
    if (!m) return std::nullopt;
    if (config.word_boundary &&
        (!left_boundary_ok(text, m->start) || !*right_boundary_ok(text, m->end, true))) {
      search = m->start + 1;
      continue;
    }
    TransitionPoint tp;
    tp.char_offset = m->start;
    tp.kind = TransitionKind::marker_hit;
    tp.trigger_marker = config.markers[m->marker_index];
    return tp;
  }
}

std::optional<TransitionPoint> scan_entropy(const TokenEvent& step_boundary_event,
                                            const MonitorConfig& config,
                                            std::size_t char_offset) {
  if (config.strategy != MonitorStrategy::entropy)
    throw DomainError("scan_entropy requires the entropy strategy");
  config.validate();
  if (!step_boundary_event.entropy.has_value())
    throw DomainError(
        "scan_entropy: token carries no entropy; request top-k logprobs from the backend");
  if (*step_boundary_event.entropy > config.entropy_threshold) {
    TransitionPoint tp;
    tp.char_offset = char_offset;
    tp.kind = TransitionKind::high_entropy_step;
    tp.trigger_entropy = *step_boundary_event.entropy;
    return tp;
  }
  return std::nullopt;
}

}  // namespace deer
