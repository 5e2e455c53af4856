#include "deer/confidence.hpp"

#include <cmath>

#include "deer/errors.hpp"

namespace deer {

namespace {

void check_probs(std::span<const double> probs, const char* op) {
  if (probs.empty()) throw DomainError(std::string(op) + ": empty probability list");
  for (double p : probs) {
    if (!(p > 0.0) || p > 1.0)
      throw DomainError(std::string(op) + ": probability outside (0,1]");
  }
}

}  // namespace

double confidence_geomean(std::span<const double> token_max_probs) {
  check_probs(token_max_probs, "confidence_geomean");
  double log_sum = 0.0;
  for (double p : token_max_probs) log_sum += std::log(p);
  const double c = std::exp(log_sum / static_cast<double>(token_max_probs.size()));
  return c > 1.0 ? 1.0 : c;  // guard rounding just above 1
}

double confidence_arithmetic_mean(std::span<const double> token_max_probs) {
  check_probs(token_max_probs, "confidence_arithmetic_mean");
  double sum = 0.0;
  for (double p : token_max_probs) sum += p;
  return sum / static_cast<double>(token_max_probs.size());
}

CalibratedConfidence calibrate(std::span<const double> per_prompt, double alpha) {
  if (per_prompt.empty()) throw DomainError("calibrate: empty confidence list");
  if (alpha < 0.0) throw DomainError("calibrate: alpha must be >= 0");

  CalibratedConfidence cc;
  cc.per_prompt.assign(per_prompt.begin(), per_prompt.end());
  cc.alpha = alpha;

  const double n = static_cast<double>(per_prompt.size());
  double sum = 0.0;
  for (double c : per_prompt) sum += c;
  cc.c_avg = sum / n;

  double dev = 0.0;
  for (double c : per_prompt) dev += std::abs(c - cc.c_avg);
  cc.c_mad = dev / n;

  cc.c_cali = cc.c_avg - alpha * cc.c_mad;
  return cc;
}

ExitDecision decide_exit(double score, double lambda, TransitionPoint transition) {
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw DomainError("decide_exit: lambda must lie in (0,1)");
  ExitDecision d;
  d.exit = score > lambda;  // strictly greater; the boundary never exits
  d.score = score;
  d.threshold = lambda;
  d.transition = std::move(transition);
  return d;
}

}  // namespace deer
