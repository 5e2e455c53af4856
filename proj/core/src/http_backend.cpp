#include "deer/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "deer/errors.hpp"
#include "deer/stop_matcher.hpp"
#include "token_trim.hpp"

namespace deer {

using nlohmann::json;

struct HttpBackend::Impl {};

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig cfg;
  if (const char* endpoint = std::getenv("DEER_ENDPOINT")) cfg.endpoint = endpoint;
  if (const char* model = std::getenv("DEER_MODEL")) cfg.model = model;
  return cfg;
}

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {}

HttpBackend::~HttpBackend() = default;

namespace {

struct Collected {
  std::vector<TokenEvent> tokens;
  std::optional<std::string> finish_reason;
  std::optional<std::string> stop_reason;
};

double clamp_logprob(double lp) {
  if (lp > 0.01) throw ProtocolError("backend returned a positive logprob");
  return lp > 0.0 ? 0.0 : lp;
}

// One choice object's token/logprob arrays -> TokenEvents. Plain text without
// logprob arrays becomes a single bare token (only legal when logprobs were
// not requested).
void collect_choice(const json& choice, bool want_logprobs, Collected& out) {
  if (choice.contains("finish_reason") && choice.at("finish_reason").is_string())
    out.finish_reason = choice.at("finish_reason").get<std::string>();
  if (choice.contains("stop_reason") && choice.at("stop_reason").is_string())
    out.stop_reason = choice.at("stop_reason").get<std::string>();

  const bool has_logprobs = choice.contains("logprobs") && choice.at("logprobs").is_object();
  if (!has_logprobs) {
    if (want_logprobs) {
      const std::string text = choice.value("text", "");
      if (!text.empty())
        throw ProtocolError("backend response is missing logprobs that were requested");
      return;  // bare finish chunk
    }
    const std::string text = choice.value("text", "");
    if (!text.empty()) out.tokens.push_back(TokenEvent{text, 0.0, {}, std::nullopt});
    return;
  }

  const json& lp = choice.at("logprobs");
  const json& tokens = lp.at("tokens");
  const json& token_logprobs = lp.at("token_logprobs");
  const json* top = lp.contains("top_logprobs") ? &lp.at("top_logprobs") : nullptr;
  if (!tokens.is_array() || !token_logprobs.is_array() ||
      tokens.size() != token_logprobs.size())
    throw ProtocolError("backend logprobs arrays are malformed");

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    TokenEvent e;
    e.text = tokens[i].get<std::string>();
    e.logprob = token_logprobs[i].is_null() ? 0.0 : clamp_logprob(token_logprobs[i].get<double>());
    if (top && i < top->size() && (*top)[i].is_object()) {
      for (const auto& [alt_text, alt_lp] : (*top)[i].items()) {
        e.top_alternatives.push_back({alt_text, clamp_logprob(alt_lp.get<double>())});
      }
    }
    bool emitted_present = false;
    for (const auto& a : e.top_alternatives)
      if (a.text == e.text) emitted_present = true;
    if (!emitted_present) e.top_alternatives.push_back({e.text, e.logprob});
    e.entropy = renormalized_entropy(e.top_alternatives);
    out.tokens.push_back(std::move(e));
  }
}

}  // namespace

GenerationResult HttpBackend::generate(const GenerationRequest& request, CancelToken cancel) {
  request.validate();

  int backoff = config_.retry_backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      const auto start = std::chrono::steady_clock::now();

      json body;
      body["model"] = config_.model;
      body["prompt"] = request.prompt;
      body["max_tokens"] = request.max_tokens;
      body["temperature"] = request.temperature;
      body["echo"] = false;
      if (request.want_logprobs) body["logprobs"] = request.top_k;
      if (request.seed) body["seed"] = *request.seed;
      if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
      body["stream"] = config_.stream;

      httplib::Client client(config_.endpoint);
      client.set_connection_timeout(std::chrono::milliseconds(config_.connect_timeout_ms));
      client.set_read_timeout(std::chrono::milliseconds(config_.read_timeout_ms));
      if (config_.api_key)
        client.set_default_headers({{"Authorization", "Bearer " + *config_.api_key}});

      Collected collected;
      StopMatcher stops{request.stop_sequences};
      BoxedMatcher boxed;
      if (request.halt_after_boxed) {
        const std::size_t prime_len = std::min<std::size_t>(request.prompt.size(), 64);
        boxed.prime(std::string_view(request.prompt).substr(request.prompt.size() - prime_len));
      }

      std::optional<StopMatcher::Match> client_match;
      std::optional<std::size_t> box_cut;
      bool was_cancelled = false;
      bool done_marker = false;
      std::string sse_buffer;

      auto handle_choice_json = [&](const json& payload) {
        if (!payload.contains("choices") || payload.at("choices").empty()) return true;
        const json& choice = payload.at("choices")[0];
        const std::size_t before = collected.tokens.size();
        collect_choice(choice, request.want_logprobs, collected);
        for (std::size_t i = before; i < collected.tokens.size(); ++i) {
          const std::string& text = collected.tokens[i].text;
          if (!client_match) {
            if (auto m = stops.feed(text)) client_match = m;
          }
          if (request.halt_after_boxed && !box_cut && !client_match) {
            if (auto cut = boxed.feed(text)) box_cut = cut;
          }
        }
        // Stop pulling once a client-side condition fired.
        return !client_match && !box_cut;
      };

      bool http_ok = false;
      int http_status = 0;
      std::string error_body;

      if (config_.stream) {
        auto receiver = [&](const char* data, std::size_t len) {
          if (cancel.cancel_requested()) {
            was_cancelled = true;
            return false;
          }
          sse_buffer.append(data, len);
          std::size_t pos;
          while ((pos = sse_buffer.find("\n\n")) != std::string::npos) {
            std::string event = sse_buffer.substr(0, pos);
            sse_buffer.erase(0, pos + 2);
            const std::size_t data_pos = event.find("data:");
            if (data_pos == std::string::npos) continue;
            std::string payload = event.substr(data_pos + 5);
            while (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
            if (payload == "[DONE]") {
              done_marker = true;
              return false;
            }
            json pj = json::parse(payload, nullptr, false);
            if (pj.is_discarded()) throw ProtocolError("malformed streaming payload");
            if (!handle_choice_json(pj)) return false;
          }
          return true;
        };
        httplib::Request hreq;
        hreq.method = "POST";
        hreq.path = config_.completions_path;
        hreq.body = body.dump();
        hreq.set_header("Content-Type", "application/json");
        hreq.set_header("Accept", "text/event-stream");
        if (config_.api_key) hreq.set_header("Authorization", "Bearer " + *config_.api_key);
        hreq.content_receiver = [&](const char* data, std::size_t len, std::uint64_t,
                                    std::uint64_t) { return receiver(data, len); };
        httplib::Result res = client.send(hreq);
        if (res) {
          http_ok = true;
          http_status = res->status;
          error_body = res->body;
        } else if (client_match || box_cut || was_cancelled || done_marker) {
          http_ok = true;  // we aborted the stream on purpose
          http_status = 200;
        } else {
          throw TransportError("completion request failed: " + httplib::to_string(res.error()));
        }
      } else {
        httplib::Result res =
            client.Post(config_.completions_path, body.dump(), "application/json");
        if (!res)
          throw TransportError("completion request failed: " + httplib::to_string(res.error()));
        http_ok = true;
        http_status = res->status;
        if (http_status == 200) {
          json pj = json::parse(res->body, nullptr, false);
          if (pj.is_discarded()) throw ProtocolError("malformed completion response");
          handle_choice_json(pj);
        } else {
          error_body = res->body;
        }
      }

      if (http_ok && http_status != 200) {
        const std::string what =
            "completion endpoint returned status " + std::to_string(http_status);
        if (http_status >= 500) throw TransportError(what);
        throw ProtocolError(what + ": " + error_body);
      }

      GenerationResult result;
      result.consumed_tokens = collected.tokens.size();
      result.tokens = std::move(collected.tokens);

      if (was_cancelled) {
        result.finish_reason = FinishReason::cancelled;
      } else if (client_match) {
        const std::string matched = stops.pattern(client_match->pattern_index);
        result.text_after_stop =
            detail::trim_tokens_at(result.tokens, client_match->start, client_match->end);
        result.finish_reason = FinishReason::stop_sequence_hit;
        result.matched_stop = matched;
      } else if (box_cut) {
        // Trim just past the balancing brace; the cut is a natural end.
        (void)detail::trim_tokens_at(result.tokens, *box_cut, *box_cut);
        result.finish_reason = FinishReason::end_of_text;
      } else {
        const std::string reason = collected.finish_reason.value_or("stop");
        if (reason == "length") {
          result.finish_reason = FinishReason::budget_exhausted;
        } else if (collected.stop_reason) {
          // vLLM-style explicit stop attribution.
          result.finish_reason = FinishReason::stop_sequence_hit;
          result.matched_stop = *collected.stop_reason;
        } else {
          result.finish_reason = FinishReason::end_of_text;
        }
      }

      const auto elapsed = std::chrono::steady_clock::now() - start;
      result.duration_ms = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count());
      if (result.tokens.size() > static_cast<std::size_t>(request.max_tokens)) {
        result.tokens.resize(static_cast<std::size_t>(request.max_tokens));
        result.finish_reason = FinishReason::budget_exhausted;
      }
      return result;
    } catch (const TransportError&) {
      if (attempt >= config_.max_retries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

}  // namespace deer
