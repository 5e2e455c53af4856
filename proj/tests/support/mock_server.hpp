#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "deer/scripted_backend.hpp"

namespace deer::testing {

/**
 * In-process OpenAI-compatible completion server backed by a Script.
 * Speaks both the plain-JSON and the server-sent-events form of
 * /v1/completions with logprobs, including vLLM-style stop_reason
 * attribution, so the HTTP client can be exercised without a live model.
 */
class MockCompletionServer {
 public:
  explicit MockCompletionServer(Script script);
  ~MockCompletionServer();

  MockCompletionServer(const MockCompletionServer&) = delete;
  MockCompletionServer& operator=(const MockCompletionServer&) = delete;

  std::string endpoint() const;  // http://127.0.0.1:<port>
  int port() const { return port_; }

  /// Respond with HTTP 500 to the next `n` requests (retry testing).
  void fail_next(int n) { fail_countdown_ = n; }

  /// Serve `n` requests normally, then fail every later one (mid-run outages).
  void fail_after(int n) { fail_after_ = n; }

  /// Milliseconds of delay between streamed tokens (cancellation testing).
  void set_token_delay_ms(int ms) { token_delay_ms_ = ms; }

  /// Ignore the request's stop sequences, like a server that streams the stop
  /// text instead of cutting at it; clients must then match stops themselves.
  void set_ignore_stops(bool ignore) { ignore_stops_ = ignore; }

  /// Omit logprobs from responses even when requested (protocol-error testing).
  void set_strip_logprobs(bool strip) { strip_logprobs_ = strip; }

  int requests_served() const { return requests_served_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<int> fail_countdown_{0};
  std::atomic<int> fail_after_{-1};
  std::atomic<int> token_delay_ms_{0};
  std::atomic<bool> ignore_stops_{false};
  std::atomic<bool> strip_logprobs_{false};
  std::atomic<int> requests_served_{0};
};

}  // namespace deer::testing
