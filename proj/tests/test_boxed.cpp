#include <doctest.h>

#include "deer/boxed.hpp"

using namespace deer;

TEST_CASE("extract_boxed: flat case") {
  CHECK(extract_boxed("... the answer is \\boxed{42}.") == "42");
}

TEST_CASE("extract_boxed: nested braces balance") {
  CHECK(extract_boxed("\\boxed{\\frac{1}{2}}") == "\\frac{1}{2}");
  CHECK(extract_boxed("\\boxed{a{b{c}}d}") == "a{b{c}}d");
}

TEST_CASE("extract_boxed: absence is a value") {
  CHECK_FALSE(extract_boxed("no box anywhere").has_value());
  CHECK_FALSE(extract_boxed("\\boxed{unbalanced").has_value());
  CHECK_FALSE(extract_boxed("").has_value());
}

TEST_CASE("extract_boxed: the last balanced box wins") {
  CHECK(extract_boxed("\\boxed{first} then \\boxed{second}") == "second");
  // A trailing unbalanced box does not shadow an earlier balanced one.
  CHECK(extract_boxed("\\boxed{good} then \\boxed{bad") == "good");
}

TEST_CASE("first_boxed_span maps interior offsets") {
  const std::string text = "pre \\boxed{42} post";
  auto span = first_boxed_span(text);
  REQUIRE(span.has_value());
  CHECK(span->interior(text) == "42");
  CHECK(text[span->open_brace] == '{');
  CHECK(text[span->close_brace] == '}');
}

TEST_CASE("boxed spans tolerate space before the brace") {
  CHECK(extract_boxed("\\boxed {7}") == "7");
}

TEST_CASE("find_boxed_spans returns every balanced span in order") {
  auto spans = find_boxed_spans("\\boxed{1} mid \\boxed{2} end \\boxed{3}");
  REQUIRE(spans.size() == 3);
}
