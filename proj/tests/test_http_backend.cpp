#include <chrono>
#include <cmath>
#include <thread>

#include <doctest.h>

#include "deer/errors.hpp"
#include "deer/http_backend.hpp"
#include "mock_server.hpp"

using namespace deer;
using deer::testing::MockCompletionServer;

namespace {

Script wait_script() {
  Script s;
  s.main = {{"a", 0.5, {}},  {"b", 0.98, {}}, {" ", 0.9, {}},
            {"Wait", 0.7, {}}, {"c", 0.9, {}},  {"d", 0.9, {}}};
  return s;
}

HttpBackendConfig config_for(const MockCompletionServer& server, bool stream) {
  HttpBackendConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "mock-model";
  cfg.stream = stream;
  cfg.retry_backoff_ms = 5;
  return cfg;
}

GenerationRequest basic_request(std::string prompt, int max_tokens = 32,
                                std::vector<std::string> stops = {}) {
  GenerationRequest req;
  req.prompt = std::move(prompt);
  req.max_tokens = max_tokens;
  req.stop_sequences = std::move(stops);
  req.want_logprobs = true;
  req.top_k = 4;
  return req;
}

}  // namespace

TEST_CASE("http backend parses logprobs in both wire modes") {
  MockCompletionServer server(wait_script());
  for (bool stream : {false, true}) {
    CAPTURE(stream);
    HttpBackend backend(config_for(server, stream));
    auto res = backend.generate(basic_request("Q:", 2));
    CHECK(res.finish_reason == FinishReason::budget_exhausted);
    REQUIRE(res.tokens.size() == 2);
    CHECK(res.text() == "ab");
    CHECK(res.tokens[0].logprob == doctest::Approx(std::log(0.5)).epsilon(1e-9));
    CHECK(res.tokens[1].logprob == doctest::Approx(std::log(0.98)).epsilon(1e-9));
    for (const auto& tok : res.tokens) {
      REQUIRE(tok.entropy.has_value());
      bool emitted_in_alts = false;
      for (const auto& alt : tok.top_alternatives)
        if (alt.text == tok.text) emitted_in_alts = true;
      CHECK(emitted_in_alts);
    }
  }
}

TEST_CASE("http backend: server-side stop attribution via stop_reason") {
  MockCompletionServer server(wait_script());
  HttpBackend backend(config_for(server, /*stream=*/false));
  auto res = backend.generate(basic_request("Q:", 32, {"Wait"}));
  CHECK(res.finish_reason == FinishReason::stop_sequence_hit);
  CHECK(res.matched_stop == "Wait");
  CHECK(res.text() == "ab ");
  CHECK(res.text().find("Wait") == std::string::npos);
}

TEST_CASE("http backend: client-side match when the server streams stop text") {
  MockCompletionServer server(wait_script());
  server.set_ignore_stops(true);
  for (bool stream : {false, true}) {
    CAPTURE(stream);
    HttpBackend backend(config_for(server, stream));
    auto res = backend.generate(basic_request("Q:", 32, {"Wait"}));
    CHECK(res.finish_reason == FinishReason::stop_sequence_hit);
    CHECK(res.matched_stop == "Wait");
    CHECK(res.text() == "ab ");
    CHECK(res.text().find("Wait") == std::string::npos);
  }
}

TEST_CASE("http backend: end of text maps cleanly") {
  MockCompletionServer server(wait_script());
  for (bool stream : {false, true}) {
    HttpBackend backend(config_for(server, stream));
    auto res = backend.generate(basic_request("Q:", 32));
    CHECK(res.finish_reason == FinishReason::end_of_text);
    CHECK(res.text() == "ab Waitcd");
    CHECK_FALSE(res.matched_stop.has_value());
  }
}

TEST_CASE("http backend retries transport failures then succeeds") {
  MockCompletionServer server(wait_script());
  server.fail_next(2);
  auto cfg = config_for(server, /*stream=*/false);
  cfg.max_retries = 3;
  HttpBackend backend(cfg);
  auto res = backend.generate(basic_request("Q:", 2));
  CHECK(res.text() == "ab");
  CHECK(server.requests_served() == 3);
}

TEST_CASE("http backend gives up after max retries") {
  MockCompletionServer server(wait_script());
  server.fail_next(10);
  auto cfg = config_for(server, /*stream=*/false);
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.generate(basic_request("Q:", 2)), TransportError);
  CHECK(server.requests_served() == 3);  // initial try + 2 retries
}

TEST_CASE("http backend: unreachable endpoint is a transport error") {
  HttpBackendConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1";  // nothing listens there
  cfg.model = "mock";
  cfg.max_retries = 1;
  cfg.retry_backoff_ms = 1;
  cfg.connect_timeout_ms = 200;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.generate(basic_request("Q:", 2)), TransportError);
}

TEST_CASE("http backend: missing logprobs is a protocol error, never retried") {
  MockCompletionServer server(wait_script());
  server.set_strip_logprobs(true);
  auto cfg = config_for(server, /*stream=*/false);
  cfg.max_retries = 3;
  HttpBackend backend(cfg);
  CHECK_THROWS_AS(backend.generate(basic_request("Q:", 2)), ProtocolError);
  CHECK(server.requests_served() == 1);  // no retry on protocol errors
}

TEST_CASE("http backend: request validation fires before any request") {
  MockCompletionServer server(wait_script());
  HttpBackend backend(config_for(server, /*stream=*/false));
  GenerationRequest bad = basic_request("x", 0);  // zero budget
  CHECK_THROWS_AS(backend.generate(bad), DomainError);
  CHECK(server.requests_served() == 0);
}

TEST_CASE("http backend: cancellation aborts a slow stream") {
  MockCompletionServer server(wait_script());
  server.set_token_delay_ms(30);
  HttpBackend backend(config_for(server, /*stream=*/true));

  CancelToken token;
  std::thread canceller([&token] {
    std::this_thread::sleep_for(std::chrono::milliseconds(45));
    token.request_cancel();
  });
  auto res = backend.generate(basic_request("Q:", 32), token);
  canceller.join();
  CHECK(res.finish_reason == FinishReason::cancelled);
  CHECK(res.tokens.size() < 6);  // stopped well before the script ran out
}

TEST_CASE("http backend: concurrent in-flight calls") {
  MockCompletionServer server(wait_script());
  HttpBackend backend(config_for(server, /*stream=*/true));

  auto call1 = InflightCall::start(backend, basic_request("Q:", 2));
  auto call2 = InflightCall::start(backend, basic_request("Q:", 3));
  auto r1 = call1.wait();
  auto r2 = call2.wait();
  CHECK(r1.text() == "ab");
  CHECK(r2.text() == "ab ");
  // Cancelling a completed call is a no-op.
  call1.cancel();
  CHECK(call1.done());
}

TEST_CASE("http backend: halt_after_boxed trims the trial answer") {
  Script s;
  BranchScript b;
  b.key = "\\boxed";
  b.offset = 0;
  b.tokens = {{"{", 0.9, {}}, {"42", 0.8, {}}, {"}", 0.9, {}}, {" trailing", 0.9, {}}};
  s.branches.push_back(b);
  MockCompletionServer server(s);

  for (bool stream : {false, true}) {
    CAPTURE(stream);
    HttpBackend backend(config_for(server, stream));
    auto req = basic_request("please \\boxed", 16);
    req.halt_after_boxed = true;
    auto res = backend.generate(req);
    CHECK(res.text() == "{42}");
  }
}
