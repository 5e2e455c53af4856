#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace deer::noise {

/**
 * One noise scenario for false-positive analysis: the observed confidence of
 * prompt i is mu + eps_i with eps_i ~ N(0, sigma^2) i.i.d., and an exit fires
 * when the aggregated score exceeds lambda. Risk scenarios have mu < lambda,
 * so every exit is a false positive.
 */
struct NoiseScenario {
  double mu = 0.9;        // true confidence, in (0,1)
  double lambda = 0.95;   // decision threshold, in (0,1), mu < lambda
  double sigma = 0.05;    // noise standard deviation, > 0
  int n = 4;              // prompts per decision, >= 1
  double alpha = 1.0;     // deviation penalty, >= 0
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 0;

  void validate() const;  // throws DomainError
};

enum class Strategy { single, avg, mad_approx, mad_exact };

std::string_view to_string(Strategy strategy);

/// Monte Carlo estimate of a false-positive rate.
struct FpEstimate {
  double empirical_rate = 0.0;
  double standard_error = 0.0;  // sqrt(rate * (1-rate) / trials)
  std::optional<double> analytic_rate;  // attached when a closed form exists
  Strategy strategy = Strategy::single;
  std::uint64_t trials = 0;
};

/// Standard normal CDF, accurate to ~1e-15 (erfc-based).
double normal_cdf(double x);

/// P(mu + eps_1 > lambda) = 1 - Phi((lambda - mu) / sigma).
double analytic_fp_single(const NoiseScenario& s);

/// P(mean > lambda) = 1 - Phi(sqrt(N) (lambda - mu) / sigma).
double analytic_fp_avg(const NoiseScenario& s);

/**
 * Closed form for the deviation-calibrated rule under the E[MAD] ~ 0.8 sigma
 * large-N approximation: 1 - Phi(sqrt(N) ((lambda - mu)/sigma + 0.8 alpha)).
 * In the high-noise limit (lambda - mu)/sigma -> 0 this tends to
 * 1 - Phi(0.8 alpha sqrt(N)), independent of sigma.
 */
double analytic_fp_mad_approx(const NoiseScenario& s);

/**
 * Monte Carlo false-positive rate for one strategy. Decision rules:
 *   single:     mu + eps_1 > lambda
 *   avg:        mu + mean(eps) > lambda
 *   mad_exact:  mu + mean(eps) - alpha * MAD(eps) > lambda, sample MAD
 *   mad_approx: mu + mean(eps) - alpha * 0.8 * sigma > lambda
 *
 * Noise draws are split per trial from the scenario seed, so every strategy
 * sees the same eps vectors (paired comparison) and the estimate is
 * independent of how trials are distributed over worker threads.
 */
FpEstimate mc_false_positive(const NoiseScenario& s, Strategy strategy);

/// Mean over `trials` of the sample MAD of n draws from N(0, sigma^2),
/// with its standard error. E[MAD_n] = sigma * sqrt(2/pi) * sqrt(1 - 1/n);
/// the finite-n bias vanishes as n grows.
struct MadEstimate {
  double mean_mad = 0.0;
  double standard_error = 0.0;
};

MadEstimate mc_expected_mad(double sigma, int n, std::uint64_t trials,
                            std::uint64_t seed);

/// A scenario grid, expanded as a cartesian product.
struct SweepGrid {
  std::vector<double> mu = {0.5, 0.7, 0.9};
  std::vector<double> lambda = {0.95};
  std::vector<double> sigma = {0.01, 0.05, 0.2, 1.0};
  std::vector<int> n = {1, 2, 4, 8};
  std::vector<double> alpha = {0.0, 0.5, 1.0};
};

struct SweepRow {
  NoiseScenario scenario;
  std::vector<FpEstimate> estimates;  // one per requested strategy
};

/// Run every scenario in the grid for the given strategies. Trials are
/// parallelized internally; results do not depend on thread count.
std::vector<SweepRow> run_sweep(const SweepGrid& grid,
                                const std::vector<Strategy>& strategies,
                                std::uint64_t trials, std::uint64_t seed);

}  // namespace deer::noise
