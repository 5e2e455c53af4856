#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deer/backend.hpp"

namespace deer {

/// One scripted token: text, linear probability of the emitted token, and
/// optional explicit top alternatives as (text, prob) pairs. When `top` is
/// empty the backend synthesizes {emitted: prob, "<other>": 1-prob}.
struct ScriptToken {
  std::string text;
  double prob = 1.0;
  std::vector<std::pair<std::string, double>> top;
};

/**
 * A branch script: tokens to play when a generation request's prompt ends
 * with `key` (typically an answer-inducer prompt, or the end-of-thinking
 * delimiter for early-exit conclusions) and the text before the key aligns
 * with the main script at char offset `offset`.
 */
struct BranchScript {
  std::string key;
  std::size_t offset = 0;
  std::vector<ScriptToken> tokens;
};

/**
 * A complete deterministic generation script.
 *
 * The main token list is the model's uninterrupted ("vanilla") output for one
 * question: thought chunks separated by transition markers, the end-of-
 * thinking delimiter, then the conclusion. Branch scripts supply the answers
 * to trial-answer inductions and early-exit conclusions, keyed by prompt
 * suffix so every call is reproducible.
 *
 * Latency is simulated: a call costs base_latency_ticks plus per_token_ticks
 * per consumed token; ticks are reported via GenerationResult::duration_ms.
 */
struct Script {
  std::vector<ScriptToken> main;
  std::vector<BranchScript> branches;
  std::uint64_t base_latency_ticks = 1;
  std::uint64_t per_token_ticks = 1;

  /// Optional single-question convenience metadata.
  std::optional<std::string> question;
  std::optional<std::string> gold_answer;

  std::string main_text() const;

  /// Throws ScriptError on invalid probabilities or malformed branches.
  void validate() const;
};

/// Parse / serialize the line-delimited script format (see README for the
/// schema). `load_script` resolves `at_marker` / `at_step` branch positions
/// into char offsets using the meta line's marker list and step delimiter.
Script parse_script(std::string_view jsonl_contents);
Script load_script(const std::filesystem::path& path);
std::string script_to_jsonl(const Script& script);
void write_script(const std::filesystem::path& path, const Script& script);

/**
 * Deterministic backend driven by a Script. A pure function of
 * (script, request): identical requests yield identical results, so
 * controller runs against it are byte-reproducible.
 *
 * Request routing:
 * 1. If the prompt ends with a branch key (longest key wins) and the prompt
 *    text before the key aligns with a prefix of the main text at an offset
 *    for which a branch exists, that branch is played.
 * 2. Otherwise the longest prefix of the main text that is a suffix of the
 *    prompt determines where main-script playback resumes. A fresh prompt
 *    aligns at offset 0.
 * 3. A matched key without a branch at the aligned offset is a ScriptError
 *    unless the full prompt itself aligns into the main text (the natural
 *    end-of-thinking continuation).
 */
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(Script script);

  GenerationResult generate(const GenerationRequest& request,
                            CancelToken cancel) override;
  using Backend::generate;

  bool deterministic() const override { return true; }
  bool virtual_time() const override { return true; }

  const Script& script() const { return script_; }

 private:
  struct Playback;  // token source + position

  Playback route(const std::string& prompt) const;
  std::size_t align_main(std::string_view text) const;

  Script script_;
  std::string main_text_;
  std::vector<std::size_t> main_offsets_;  // char offset of each main token
};

}  // namespace deer
