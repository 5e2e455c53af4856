#pragma once

#include <span>
#include <string>
#include <vector>

#include "deer/monitor.hpp"

namespace deer {

/**
 * Geometric mean of per-token maximum probabilities, computed in log space
 * to avoid underflow on long answers.
 *
 * Throws DomainError on an empty list or any value outside (0, 1].
 */
double confidence_geomean(std::span<const double> token_max_probs);

/// Arithmetic mean with the same domain checks. Experiment-only aggregation;
/// it dilutes low-probability tokens and tends to inflate confidence.
double confidence_arithmetic_mean(std::span<const double> token_max_probs);

/// An induced trial answer and the confidence evidence extracted from it.
struct TrialAnswer {
  std::string answer_text;             // content of the induced \boxed{} span
  std::vector<double> token_max_probs;  // per answer token, in (0,1]
  double confidence = 0.0;             // geometric mean; 0 when no tokens parsed
  int inducer_id = 0;                  // index of the inducer prompt used
};

/// Multi-prompt confidence calibration: c_cali = c_avg - alpha * c_mad.
struct CalibratedConfidence {
  std::vector<double> per_prompt;
  double c_avg = 0.0;
  double c_mad = 0.0;   // mean absolute deviation around c_avg
  double alpha = 0.0;
  double c_cali = 0.0;
};

/**
 * Aggregate N per-prompt confidences into a calibrated score. The deviation
 * penalty biases the score downward, so noisy prompt sensitivity cannot
 * inflate it: c_cali <= c_avg for every alpha >= 0, with equality at zero
 * deviation. N = 1 degenerates to c_cali = c_avg.
 *
 * Throws DomainError on an empty list or alpha < 0.
 */
CalibratedConfidence calibrate(std::span<const double> per_prompt, double alpha);

/// Continue-vs-exit verdict for one transition point.
struct ExitDecision {
  bool exit = false;
  double score = 0.0;
  double threshold = 0.0;
  TransitionPoint transition;
};

/// exit iff score > lambda, strictly. Throws DomainError unless lambda in (0,1).
ExitDecision decide_exit(double score, double lambda, TransitionPoint transition);

}  // namespace deer
