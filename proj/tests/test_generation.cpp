#include <cmath>

#include <doctest.h>

#include "deer/errors.hpp"
#include "deer/generation.hpp"

using namespace deer;

TEST_CASE("renormalized entropy: hand values") {
  std::vector<TokenAlt> even = {{"a", std::log(0.5)}, {"b", std::log(0.5)}};
  CHECK(renormalized_entropy(even) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<TokenAlt> sure = {{"a", 0.0}};
  CHECK(renormalized_entropy(sure) == doctest::Approx(0.0));

  // Renormalization: {0.2, 0.2} behaves like {0.5, 0.5}.
  std::vector<TokenAlt> scaled = {{"a", std::log(0.2)}, {"b", std::log(0.2)}};
  CHECK(renormalized_entropy(scaled) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(renormalized_entropy(std::vector<TokenAlt>{}), DomainError);
}

TEST_CASE("finish reasons have stable names") {
  CHECK(to_string(FinishReason::stop_sequence_hit) == "stop_sequence_hit");
  CHECK(to_string(FinishReason::budget_exhausted) == "budget_exhausted");
  CHECK(to_string(FinishReason::end_of_text) == "end_of_text");
  CHECK(to_string(FinishReason::cancelled) == "cancelled");
}

TEST_CASE("result text concatenates token text") {
  GenerationResult res;
  res.tokens = {{"a", 0, {}, {}}, {"bc", 0, {}, {}}};
  CHECK(res.text() == "abc");
}
