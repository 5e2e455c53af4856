#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "deer/backend.hpp"

namespace deer {

/// Connection settings for an OpenAI-compatible completion endpoint.
struct HttpBackendConfig {
  std::string endpoint = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string model;
  std::string completions_path = "/v1/completions";
  std::optional<std::string> api_key;  // sent as a bearer token when set

  /// Stream tokens (server-sent events) and match stop sequences client-side,
  /// aborting the connection on a match or cancellation. When false, a plain
  /// JSON response is requested and stops rely on the server.
  bool stream = true;

  /// Transport errors (connect/read failures, 5xx) are retried up to this
  /// many times with exponential backoff. Protocol errors never retry.
  int max_retries = 3;
  int retry_backoff_ms = 100;  // doubled per retry

  int connect_timeout_ms = 5000;
  int read_timeout_ms = 300000;

  /// Reads DEER_ENDPOINT / DEER_MODEL when set.
  static HttpBackendConfig from_env();
};

/**
 * HTTP client for OpenAI-compatible `/v1/completions` endpoints with
 * logprobs. Prompt echo is disabled; temperature-0 requests yield greedy
 * logprobs. Every generate() call uses its own connection, so calls may run
 * concurrently from any number of threads.
 */
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;

  GenerationResult generate(const GenerationRequest& request,
                            CancelToken cancel) override;
  using Backend::generate;

  const HttpBackendConfig& config() const { return config_; }

 private:
  struct Impl;
  HttpBackendConfig config_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace deer
