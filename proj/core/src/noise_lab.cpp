#include "deer/noise_lab.hpp"

#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "deer/errors.hpp"

namespace deer::noise {

void NoiseScenario::validate() const {
  if (!(mu > 0.0) || !(mu < 1.0)) throw DomainError("noise scenario: mu must lie in (0,1)");
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw DomainError("noise scenario: lambda must lie in (0,1)");
  if (!(mu < lambda)) throw DomainError("noise scenario: risk scenarios require mu < lambda");
  if (!(sigma > 0.0)) throw DomainError("noise scenario: sigma must be > 0");
  if (n < 1) throw DomainError("noise scenario: n must be >= 1");
  if (alpha < 0.0) throw DomainError("noise scenario: alpha must be >= 0");
  if (trials == 0) throw DomainError("noise scenario: trials must be > 0");
}

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::single: return "single";
    case Strategy::avg: return "avg";
    case Strategy::mad_approx: return "mad_approx";
    case Strategy::mad_exact: return "mad_exact";
  }
  return "unknown";
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double analytic_fp_single(const NoiseScenario& s) {
  s.validate();
  return 1.0 - normal_cdf((s.lambda - s.mu) / s.sigma);
}

double analytic_fp_avg(const NoiseScenario& s) {
  s.validate();
  return 1.0 - normal_cdf(std::sqrt(static_cast<double>(s.n)) * (s.lambda - s.mu) / s.sigma);
}

double analytic_fp_mad_approx(const NoiseScenario& s) {
  s.validate();
  const double z = (s.lambda - s.mu) / s.sigma + 0.8 * s.alpha;
  return 1.0 - normal_cdf(std::sqrt(static_cast<double>(s.n)) * z);
}

namespace {

// SplitMix64: mixes (seed, stream id) into an independent substream and
// serves as the per-trial bit generator. Per-trial streams make sweeps
// reproducible and worker-count independent, and let all strategies share
// the same draws for paired comparisons. A full-state generator would cost
// more to seed per trial than the handful of draws each trial needs.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4ecda023f10bdULL;
  return x ^ (x >> 31);
}

struct SplitMix64Engine {
  using result_type = std::uint64_t;
  std::uint64_t state;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }
  result_type operator()() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d4ecda023f10bdULL;
    return x ^ (x >> 31);
  }
};

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return splitmix64(splitmix64(seed) ^ splitmix64(trial + 0x51ed270b4d0fb3e1ULL));
}

// Draw the trial's noise vector into eps (size n).
void draw_noise(std::vector<double>& eps, double sigma, std::uint64_t seed,
                std::uint64_t trial) {
  SplitMix64Engine rng{trial_seed(seed, trial)};
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& e : eps) e = normal(rng);
}

// Run `body(trial)` over [0, trials) on a worker pool, summing the hit counts.
template <typename Body>
std::uint64_t parallel_count(std::uint64_t trials, Body&& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const unsigned workers = std::max(1u, std::min(hw == 0 ? 4u : hw, 16u));
  if (workers == 1 || trials < 10'000) {
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) hits += body(t) ? 1 : 0;
    return hits;
  }
  std::vector<std::uint64_t> partial(workers, 0);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      std::uint64_t hits = 0;
      for (std::uint64_t t = w; t < trials; t += workers) hits += body(t) ? 1 : 0;
      partial[w] = hits;
    });
  }
  for (auto& th : pool) th.join();
  std::uint64_t hits = 0;
  for (auto h : partial) hits += h;
  return hits;
}

}  // namespace

FpEstimate mc_false_positive(const NoiseScenario& s, Strategy strategy) {
  s.validate();
  const double gap = s.lambda - s.mu;
  const std::size_t n = static_cast<std::size_t>(s.n);

  const std::uint64_t hits = parallel_count(s.trials, [&](std::uint64_t trial) {
    thread_local std::vector<double> eps;
    eps.resize(n);
    draw_noise(eps, s.sigma, s.seed, trial);
    switch (strategy) {
      case Strategy::single:
        return eps[0] > gap;
      case Strategy::avg: {
        double sum = 0.0;
        for (double e : eps) sum += e;
        return sum / static_cast<double>(n) > gap;
      }
      case Strategy::mad_approx: {
        double sum = 0.0;
        for (double e : eps) sum += e;
        return sum / static_cast<double>(n) - s.alpha * 0.8 * s.sigma > gap;
      }
      case Strategy::mad_exact: {
        double sum = 0.0;
        for (double e : eps) sum += e;
        const double mean = sum / static_cast<double>(n);
        double dev = 0.0;
        for (double e : eps) dev += std::abs(e - mean);
        const double mad = dev / static_cast<double>(n);
        return mean - s.alpha * mad > gap;
      }
    }
    return false;
  });

  FpEstimate est;
  est.strategy = strategy;
  est.trials = s.trials;
  est.empirical_rate = static_cast<double>(hits) / static_cast<double>(s.trials);
  est.standard_error = std::sqrt(est.empirical_rate * (1.0 - est.empirical_rate) /
                                 static_cast<double>(s.trials));
  switch (strategy) {
    case Strategy::single: est.analytic_rate = analytic_fp_single(s); break;
    case Strategy::avg: est.analytic_rate = analytic_fp_avg(s); break;
    case Strategy::mad_approx: est.analytic_rate = analytic_fp_mad_approx(s); break;
    case Strategy::mad_exact: break;  // no closed form
  }
  return est;
}

MadEstimate mc_expected_mad(double sigma, int n, std::uint64_t trials, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw DomainError("mc_expected_mad: sigma must be > 0");
  if (n < 1) throw DomainError("mc_expected_mad: n must be >= 1");
  if (trials == 0) throw DomainError("mc_expected_mad: trials must be > 0");

  // Small trial counts: accumulate mean and variance of the per-trial MAD.
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> eps(static_cast<std::size_t>(n));
  for (std::uint64_t t = 0; t < trials; ++t) {
    draw_noise(eps, sigma, seed, t);
    double mean = 0.0;
    for (double e : eps) mean += e;
    mean /= static_cast<double>(n);
    double dev = 0.0;
    for (double e : eps) dev += std::abs(e - mean);
    const double mad = dev / static_cast<double>(n);
    sum += mad;
    sum_sq += mad * mad;
  }
  MadEstimate est;
  est.mean_mad = sum / static_cast<double>(trials);
  if (trials > 1) {
    const double var =
        (sum_sq - sum * sum / static_cast<double>(trials)) / static_cast<double>(trials - 1);
    est.standard_error = std::sqrt(std::max(0.0, var) / static_cast<double>(trials));
  }
  return est;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid,
                                const std::vector<Strategy>& strategies,
                                std::uint64_t trials, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  for (double mu : grid.mu) {
    for (double lambda : grid.lambda) {
      if (!(mu < lambda)) continue;  // only risk scenarios
      for (double sigma : grid.sigma) {
        for (int n : grid.n) {
          for (double alpha : grid.alpha) {
            SweepRow row;
            row.scenario = NoiseScenario{mu, lambda, sigma, n, alpha, trials, seed};
            for (Strategy s : strategies) {
              row.estimates.push_back(mc_false_positive(row.scenario, s));
            }
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

}  // namespace deer::noise
