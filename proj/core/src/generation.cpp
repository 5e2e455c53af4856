#include "deer/generation.hpp"

#include <cmath>

#include "deer/errors.hpp"

namespace deer {

double renormalized_entropy(std::span<const TokenAlt> alts) {
  if (alts.empty()) throw DomainError("entropy over an empty alternative list");
  double max_lp = alts[0].logprob;
  for (const auto& a : alts) max_lp = std::max(max_lp, a.logprob);
  double z = 0.0;
  double weighted_lp = 0.0;  // sum of q_i * logprob_i, scaled by z
  for (const auto& a : alts) {
    const double w = std::exp(a.logprob - max_lp);
    z += w;
    weighted_lp += w * a.logprob;
  }
  // H = -sum q ln q with q_i = exp(lp_i - max)/z; simplifies to
  // ln z + max - (sum w lp)/z.
  const double h = std::log(z) + max_lp - weighted_lp / z;
  return h < 0.0 ? 0.0 : h;  // clamp -0.0 / rounding fuzz
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop_sequence_hit: return "stop_sequence_hit";
    case FinishReason::budget_exhausted: return "budget_exhausted";
    case FinishReason::end_of_text: return "end_of_text";
    case FinishReason::cancelled: return "cancelled";
  }
  return "unknown";
}

void GenerationRequest::validate() const {
  if (prompt.empty()) throw DomainError("generation request: prompt is empty");
  if (max_tokens < 1) throw DomainError("generation request: max_tokens must be >= 1");
  if (want_logprobs && top_k < 1)
    throw DomainError("generation request: top_k must be >= 1 when logprobs are requested");
  if (temperature < 0.0)
    throw DomainError("generation request: temperature must be >= 0");
}

std::string GenerationResult::text() const {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

}  // namespace deer
