#include "deer/scripted_backend.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deer/errors.hpp"
#include "deer/stop_matcher.hpp"
#include "token_trim.hpp"

namespace deer {

using nlohmann::json;

std::string Script::main_text() const {
  std::string out;
  for (const auto& t : main) out += t.text;
  return out;
}

namespace {

void validate_token(const ScriptToken& t, const char* where) {
  if (t.text.empty()) throw ScriptError(std::string(where) + ": empty token text");
  if (!(t.prob > 0.0) || t.prob > 1.0)
    throw ScriptError(std::string(where) + ": token prob outside (0,1]: " + t.text);
  bool has_emitted = t.top.empty();
  for (const auto& [text, p] : t.top) {
    if (!(p > 0.0) || p > 1.0)
      throw ScriptError(std::string(where) + ": alternative prob outside (0,1]");
    if (text == t.text) has_emitted = true;
  }
  if (!has_emitted)
    throw ScriptError(std::string(where) + ": emitted token missing from alternatives: " + t.text);
}

}  // namespace

void Script::validate() const {
  if (main.empty() && branches.empty()) throw ScriptError("script: no tokens");
  for (const auto& t : main) validate_token(t, "main");
  const std::string text = main_text();
  for (const auto& b : branches) {
    if (b.key.empty()) throw ScriptError("branch: empty key");
    if (b.offset > text.size())
      throw ScriptError("branch: offset " + std::to_string(b.offset) +
                        " beyond main text length " + std::to_string(text.size()));
    for (const auto& t : b.tokens) validate_token(t, "branch");
  }
}

// ---------------------------------------------------------------------------
// Script file format (line-delimited JSON; see README for the schema)
// ---------------------------------------------------------------------------

namespace {

ScriptToken token_from_json(const json& j) {
  ScriptToken t;
  if (j.is_string()) {
    t.text = j.get<std::string>();
    t.prob = 1.0;
    return t;
  }
  t.text = j.at("text").get<std::string>();
  t.prob = j.value("prob", 1.0);
  if (j.contains("top")) {
    for (const auto& alt : j.at("top")) {
      t.top.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
    }
  }
  return t;
}

json token_to_json(const ScriptToken& t) {
  json j;
  j["text"] = t.text;
  j["prob"] = t.prob;
  if (!t.top.empty()) {
    json top = json::array();
    for (const auto& [text, p] : t.top) top.push_back(json::array({text, p}));
    j["top"] = top;
  }
  return j;
}

// Occurrence offsets of any marker in `text`, earliest-first, non-overlapping.
std::vector<std::size_t> occurrence_offsets(const std::string& text,
                                            const std::vector<std::string>& needles) {
  std::vector<std::size_t> out;
  std::size_t from = 0;
  while (true) {
    std::size_t best = std::string::npos;
    std::size_t best_len = 0;
    for (const auto& n : needles) {
      if (n.empty()) continue;
      const std::size_t pos = text.find(n, from);
      if (pos == std::string::npos) continue;
      if (pos < best || (pos == best && n.size() > best_len)) {
        best = pos;
        best_len = n.size();
      }
    }
    if (best == std::string::npos) break;
    out.push_back(best);
    from = best + best_len;
  }
  return out;
}

}  // namespace

Script parse_script(std::string_view jsonl_contents) {
  Script script;
  std::vector<std::string> meta_markers = {"Wait"};
  std::string meta_delimiter = "\n\n";

  struct PendingBranch {
    BranchScript branch;
    std::optional<int> at_marker;
    std::optional<int> at_step;
  };
  std::vector<PendingBranch> pending;

  std::istringstream in{std::string(jsonl_contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ScriptError("script line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    try {
      if (type == "meta") {
        script.base_latency_ticks = j.value("base_latency_ticks", script.base_latency_ticks);
        script.per_token_ticks = j.value("per_token_ticks", script.per_token_ticks);
        if (j.contains("markers")) meta_markers = j.at("markers").get<std::vector<std::string>>();
        if (j.contains("step_delimiter")) meta_delimiter = j.at("step_delimiter").get<std::string>();
        if (j.contains("question")) script.question = j.at("question").get<std::string>();
        if (j.contains("gold_answer")) script.gold_answer = j.at("gold_answer").get<std::string>();
      } else if (type == "main") {
        if (j.contains("tokens")) {
          for (const auto& tj : j.at("tokens")) script.main.push_back(token_from_json(tj));
        } else {
          script.main.push_back(token_from_json(j));
        }
      } else if (type == "branch") {
        PendingBranch pb;
        pb.branch.key = j.at("key").get<std::string>();
        if (j.contains("offset")) pb.branch.offset = j.at("offset").get<std::size_t>();
        if (j.contains("at_marker")) pb.at_marker = j.at("at_marker").get<int>();
        if (j.contains("at_step")) pb.at_step = j.at("at_step").get<int>();
        for (const auto& tj : j.at("tokens")) pb.branch.tokens.push_back(token_from_json(tj));
        pending.push_back(std::move(pb));
      } else {
        throw ScriptError("script line " + std::to_string(line_no) +
                          ": unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ScriptError("script line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  // Resolve at_marker / at_step positions to char offsets into the main text.
  const std::string text = script.main_text();
  const auto marker_offsets = occurrence_offsets(text, meta_markers);
  const auto step_offsets = occurrence_offsets(text, {meta_delimiter});
  for (auto& pb : pending) {
    if (pb.at_marker) {
      const int i = *pb.at_marker;
      if (i < 0 || static_cast<std::size_t>(i) >= marker_offsets.size())
        throw ScriptError("branch at_marker " + std::to_string(i) + " out of range (" +
                          std::to_string(marker_offsets.size()) + " marker occurrences)");
      pb.branch.offset = marker_offsets[static_cast<std::size_t>(i)];
    } else if (pb.at_step) {
      const int i = *pb.at_step;
      if (i < 0 || static_cast<std::size_t>(i) >= step_offsets.size())
        throw ScriptError("branch at_step " + std::to_string(i) + " out of range");
      pb.branch.offset = step_offsets[static_cast<std::size_t>(i)] + meta_delimiter.size();
    }
    script.branches.push_back(std::move(pb.branch));
  }

  script.validate();
  return script;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open script file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str());
}

std::string script_to_jsonl(const Script& script) {
  std::ostringstream out;
  json meta;
  meta["type"] = "meta";
  meta["version"] = 1;
  meta["base_latency_ticks"] = script.base_latency_ticks;
  meta["per_token_ticks"] = script.per_token_ticks;
  if (script.question) meta["question"] = *script.question;
  if (script.gold_answer) meta["gold_answer"] = *script.gold_answer;
  out << meta.dump() << '\n';
  for (const auto& t : script.main) {
    json j = token_to_json(t);
    j["type"] = "main";
    out << j.dump() << '\n';
  }
  for (const auto& b : script.branches) {
    json j;
    j["type"] = "branch";
    j["key"] = b.key;
    j["offset"] = b.offset;
    json tokens = json::array();
    for (const auto& t : b.tokens) tokens.push_back(token_to_json(t));
    j["tokens"] = tokens;
    out << j.dump() << '\n';
  }
  return out.str();
}

void write_script(const std::filesystem::path& path, const Script& script) {
  std::ofstream out(path);
  if (!out) throw ScriptError("cannot write script file: " + path.string());
  out << script_to_jsonl(script);
}

// ---------------------------------------------------------------------------
// Playback
// ---------------------------------------------------------------------------

struct ScriptedBackend::Playback {
  const std::vector<ScriptToken>* tokens = nullptr;
  std::size_t token_index = 0;
  std::size_t intra_offset = 0;  // chars of tokens[token_index] already covered
};

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {
  script_.validate();
  main_text_ = script_.main_text();
  std::size_t off = 0;
  main_offsets_.reserve(script_.main.size());
  for (const auto& t : script_.main) {
    main_offsets_.push_back(off);
    off += t.text.size();
  }
}

std::size_t ScriptedBackend::align_main(std::string_view text) const {
  const std::size_t limit = std::min(main_text_.size(), text.size());
  for (std::size_t k = limit; k > 0; --k) {
    if (text.ends_with(std::string_view(main_text_).substr(0, k))) return k;
  }
  return 0;
}

ScriptedBackend::Playback ScriptedBackend::route(const std::string& prompt) const {
  // Longest branch key that suffixes the prompt wins.
  const BranchScript* best = nullptr;
  std::size_t best_key_len = 0;
  std::string_view prompt_view{prompt};
  bool any_key_matched = false;
  std::optional<std::size_t> matched_remainder_offset;

  for (const auto& b : script_.branches) {
    if (!prompt_view.ends_with(b.key)) continue;
    any_key_matched = true;
    const std::string_view remainder = prompt_view.substr(0, prompt_view.size() - b.key.size());
    const std::size_t k = align_main(remainder);
    matched_remainder_offset = k;
    if (b.offset == k && b.key.size() >= best_key_len) {
      best = &b;
      best_key_len = b.key.size();
    }
  }

  Playback pb;
  if (best) {
    pb.tokens = &best->tokens;
    return pb;
  }

  const std::size_t k = align_main(prompt_view);
  if (any_key_matched && k == 0) {
    throw ScriptError("no branch script for matched key at offset " +
                      std::to_string(matched_remainder_offset.value_or(0)));
  }

  pb.tokens = &script_.main;
  // Map char offset k to (token index, intra-token offset).
  auto it = std::upper_bound(main_offsets_.begin(), main_offsets_.end(), k);
  const std::size_t idx = static_cast<std::size_t>(it - main_offsets_.begin());
  pb.token_index = idx == 0 ? 0 : idx - 1;
  pb.intra_offset = k - (idx == 0 ? 0 : main_offsets_[idx - 1]);
  if (pb.token_index < script_.main.size() &&
      pb.intra_offset == script_.main[pb.token_index].text.size()) {
    ++pb.token_index;
    pb.intra_offset = 0;
  }
  return pb;
}

namespace {

TokenEvent make_event(const ScriptToken& t, std::string text_override, bool want_logprobs) {
  TokenEvent e;
  e.text = text_override.empty() ? t.text : std::move(text_override);
  if (!want_logprobs) return e;
  e.logprob = std::log(t.prob);
  if (!t.top.empty()) {
    for (const auto& [text, p] : t.top) e.top_alternatives.push_back({text, std::log(p)});
  } else {
    // The backend models a greedy decoder, so the emitted token must stay the
    // argmax: spread the remaining mass over alternatives no heavier than it.
    e.top_alternatives.push_back({t.text, e.logprob});
    if (t.prob < 1.0) {
      const int extras = static_cast<int>(std::ceil((1.0 - t.prob) / t.prob));
      const double each = (1.0 - t.prob) / extras;
      for (int i = 0; i < extras; ++i)
        e.top_alternatives.push_back({"<alt" + std::to_string(i) + ">", std::log(each)});
    }
  }
  e.entropy = renormalized_entropy(e.top_alternatives);
  return e;
}

}  // namespace

GenerationResult ScriptedBackend::generate(const GenerationRequest& request,
                                           CancelToken cancel) {
  request.validate();
  Playback pb = route(request.prompt);

  StopMatcher stops{request.stop_sequences};
  BoxedMatcher boxed;
  if (request.halt_after_boxed) {
    const std::size_t prime_len = std::min<std::size_t>(request.prompt.size(), 64);
    boxed.prime(std::string_view(request.prompt).substr(request.prompt.size() - prime_len));
  }

  GenerationResult result;
  std::uint64_t consumed = 0;

  auto ticks_spent = [&](std::uint64_t n_consumed) {
    return script_.base_latency_ticks + script_.per_token_ticks * n_consumed;
  };
  auto finish = [&](FinishReason reason) {
    result.finish_reason = reason;
    result.duration_ms = ticks_spent(consumed);
    result.consumed_tokens = consumed;
    return result;
  };

  while (pb.token_index < pb.tokens->size()) {
    if (cancel.cancel_requested()) return finish(FinishReason::cancelled);
    if (request.tick_budget && ticks_spent(consumed + 1) > *request.tick_budget) {
      // The call ran on the simulated clock until the budget expired.
      result.finish_reason = FinishReason::cancelled;
      result.duration_ms = *request.tick_budget;
      result.consumed_tokens = consumed;
      return result;
    }

    const ScriptToken& tok = (*pb.tokens)[pb.token_index];
    std::string text = tok.text.substr(pb.intra_offset);
    pb.intra_offset = 0;
    ++pb.token_index;
    ++consumed;
    result.tokens.push_back(make_event(tok, std::move(text), request.want_logprobs));
    const std::string& fed = result.tokens.back().text;

    // Stop sequences win over the token budget and the boxed cutoff.
    if (auto match = stops.feed(fed)) {
      result.matched_stop = stops.pattern(match->pattern_index);
      result.text_after_stop = detail::trim_tokens_at(result.tokens, match->start, match->end);
      return finish(FinishReason::stop_sequence_hit);
    }
    if (request.halt_after_boxed) {
      if (auto cut = boxed.feed(fed)) {
        // Keep text through the balancing brace, drop the rest.
        (void)detail::trim_tokens_at(result.tokens, *cut, *cut);
        return finish(FinishReason::end_of_text);
      }
    }
    if (result.tokens.size() >= static_cast<std::size_t>(request.max_tokens)) {
      return finish(FinishReason::budget_exhausted);
    }
  }

  return finish(FinishReason::end_of_text);
}

}  // namespace deer
