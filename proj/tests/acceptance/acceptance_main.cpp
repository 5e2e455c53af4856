// Acceptance suite: one binary, one pass/fail line per criterion.
//
// Criteria are pinned in code: every tolerance below is fixed here, not
// calibrated at runtime. Criterion 8 needs a live OpenAI-compatible endpoint
// (DEER_LIVE_ENDPOINT) and is skipped, not failed, when none is configured.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "deer/bench.hpp"
#include "deer/boxed.hpp"
#include "deer/confidence.hpp"
#include "deer/controller.hpp"
#include "deer/noise_lab.hpp"
#include "deer/record_io.hpp"
#include "deer/script_gen.hpp"
#include "deer/scripted_backend.hpp"
#include "reference_sim.hpp"
#include "scenarios.hpp"

#include "app.hpp"

using namespace deer;
using deer::testing::CountingBackend;
using deer::testing::oracle_scenarios;
using deer::testing::simulate_reference;

namespace {

struct Criterion {
  int number;
  const char* name;
  bool (*run)(std::string& detail);
  bool optional = false;
};

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

#define EXPECT(cond, message)                \
  do {                                       \
    if (!(cond)) {                           \
      detail = (message);                    \
      return false;                          \
    }                                        \
  } while (0)

// --------------------------------------------------------------------------
// 1. Confidence math property suite
// --------------------------------------------------------------------------
bool criterion_confidence(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(1e-6, 1.0);
  std::uniform_int_distribution<int> len(1, 16);

  const int kLists = 10'000;
  for (int i = 0; i < kLists; ++i) {
    std::vector<double> probs(static_cast<std::size_t>(len(rng)));
    for (auto& p : probs) p = unit(rng);

    const double c = confidence_geomean(probs);
    const double lo = *std::min_element(probs.begin(), probs.end());
    const double hi = *std::max_element(probs.begin(), probs.end());
    EXPECT(c >= lo - 1e-12 && c <= hi + 1e-12, "geometric mean escaped [min, max]");
    EXPECT(c <= confidence_arithmetic_mean(probs) + 1e-12,
           "geometric mean exceeded the arithmetic mean");

    std::vector<double> shuffled = probs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT(std::abs(confidence_geomean(shuffled) - c) <= 1e-12 * std::max(1.0, c),
           "geometric mean is not permutation-invariant");

    double direct = 1.0;
    for (double p : probs) direct *= p;
    const double direct_mean = std::pow(direct, 1.0 / static_cast<double>(probs.size()));
    EXPECT(std::abs(c - direct_mean) < 1e-9,
           "log-space result deviates from the direct product");
  }
  const double secs = elapsed_s(start);
  EXPECT(secs < 5.0, "property suite exceeded the 5 s budget");
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d lists, %.2f s", kLists, secs);
  detail = buf;
  return true;
}

// --------------------------------------------------------------------------
// 2. Calibration exactness
// --------------------------------------------------------------------------
bool criterion_calibration(std::string& detail) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unit(1e-3, 1.0);
  std::uniform_real_distribution<double> alpha_dist(0.0, 3.0);
  std::uniform_int_distribution<int> len(1, 8);

  for (int i = 0; i < 1'000; ++i) {
    std::vector<double> confs(static_cast<std::size_t>(len(rng)));
    for (auto& c : confs) c = unit(rng);
    const double alpha = alpha_dist(rng);
    const auto cc = calibrate(confs, alpha);

    double sum = 0.0;
    for (double c : confs) sum += c;
    const double avg = sum / static_cast<double>(confs.size());
    double dev = 0.0;
    for (double c : confs) dev += std::abs(c - avg);
    const double mad = dev / static_cast<double>(confs.size());

    EXPECT(cc.c_cali == avg - alpha * mad, "calibrated score is not exactly avg - alpha*mad");
    EXPECT(cc.c_cali <= cc.c_avg, "calibration failed to be conservative");
  }

  const auto hand = calibrate(std::vector<double>{1.0, 0.8}, 1.0);
  EXPECT(std::abs(hand.c_cali - 0.8) < 1e-12, "hand case [1.0, 0.8], alpha=1 != 0.8");
  const auto flat = calibrate(std::vector<double>{0.9, 0.9, 0.9, 0.9}, 1.0);
  EXPECT(flat.c_mad == 0.0 && std::abs(flat.c_cali - 0.9) < 1e-12,
         "zero-deviation identity failed");
  detail = "1000 draws exact, hand cases hold";
  return true;
}

// --------------------------------------------------------------------------
// 3. Analytic vs Monte Carlo false-positive rates
// --------------------------------------------------------------------------
bool criterion_noise(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();

  noise::NoiseScenario headline;
  headline.mu = 0.9;
  headline.lambda = 0.95;
  headline.sigma = 0.05;
  headline.n = 4;
  headline.alpha = 1.0;
  headline.trials = 1'000'000;
  headline.seed = 31;

  EXPECT(std::abs(noise::analytic_fp_single(headline) - 0.158655) < 1e-6,
         "analytic single rate drifted from 0.158655");
  EXPECT(std::abs(noise::analytic_fp_avg(headline) - 0.022750) < 1e-6,
         "analytic averaged rate drifted from 0.022750");

  const auto single = noise::mc_false_positive(headline, noise::Strategy::single);
  EXPECT(std::abs(single.empirical_rate - *single.analytic_rate) <=
             3.0 * single.standard_error,
         "single-prompt MC disagrees with the closed form beyond 3 SE");

  const auto avg = noise::mc_false_positive(headline, noise::Strategy::avg);
  EXPECT(std::abs(avg.empirical_rate - *avg.analytic_rate) <= 3.0 * avg.standard_error,
         "averaged MC disagrees with the closed form beyond 3 SE");

  // Ordering across the full sweep grid, per seed.
  noise::SweepGrid grid;  // mu {0.5,0.7,0.9} x sigma {0.01,0.05,0.2,1.0} x
                          // N {1,2,4,8} x alpha {0,0.5,1} at lambda 0.95
  const auto rows = noise::run_sweep(
      grid, {noise::Strategy::mad_exact, noise::Strategy::avg, noise::Strategy::single},
      100'000, 31);
  for (const auto& row : rows) {
    const double mad = row.estimates[0].empirical_rate;
    const double avg_rate = row.estimates[1].empirical_rate;
    const double single_rate = row.estimates[2].empirical_rate;
    EXPECT(mad <= avg_rate, "ordering violated: mad_exact > avg on the grid");
    EXPECT(avg_rate <= single_rate, "ordering violated: avg > single on the grid");
  }

  const auto mad_est = noise::mc_expected_mad(1.0, 10'000, 100, 31);
  EXPECT(std::abs(mad_est.mean_mad - 0.7979) < 0.002,
         "E[MAD] estimate outside 0.7979 +/- 0.002");

  const double secs = elapsed_s(start);
  EXPECT(secs < 120.0, "noise verification exceeded the 2 min budget");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu grid cells ordered, E[MAD]=%.4f, %.1f s",
                rows.size(), mad_est.mean_mad, secs);
  detail = buf;
  return true;
}

// --------------------------------------------------------------------------
// 4. Controller vs hand-written reference simulation
// --------------------------------------------------------------------------
bool criterion_controller(std::string& detail) {
  const auto specs = oracle_scenarios(24, 2024);
  const std::vector<double> lambdas = {0.5, 0.9, 0.95, 0.97, 0.999};
  int checked = 0;

  for (const auto& spec : specs) {
    Script script = generate_script(spec);
    ScriptedBackend inner(script);

    // Prefix preservation + monotonicity state.
    ControllerConfig vanilla_cfg;
    const auto vanilla_rec = run_vanilla("q", spec.question, vanilla_cfg, inner);
    const std::string vanilla_thought =
        vanilla_rec.transcript.substr(0, vanilla_rec.transcript.find(vanilla_cfg.think_close));
    int prev_exit = 0;
    std::uint64_t prev_reasoning = 0;

    for (double lambda : lambdas) {
      const auto expected = simulate_reference(script, spec, lambda);
      CountingBackend backend(inner);
      ControllerConfig cfg;
      cfg.lambda = lambda;
      const auto rec = run_deer("q", spec.question, cfg, backend);
      ++checked;

      EXPECT(rec.exited_early == expected.exited_early, "exit flag mismatch vs reference");
      EXPECT(rec.exit_chunk_index == expected.exit_chunk_index,
             "exit chunk mismatch vs reference");
      EXPECT(rec.transcript == expected.transcript, "transcript mismatch vs reference");
      EXPECT(static_cast<int>(rec.induction_attempts.size()) == expected.attempts,
             "attempt count mismatch vs reference");
      EXPECT(rec.reasoning_tokens == expected.reasoning_tokens,
             "reasoning token accounting mismatch");
      EXPECT(rec.induced_tokens == expected.induced_tokens,
             "induced token accounting mismatch");
      EXPECT(rec.conclusion_tokens == expected.conclusion_tokens,
             "conclusion token accounting mismatch");
      EXPECT(backend.consumed() ==
                 rec.reasoning_tokens + rec.induced_tokens + rec.conclusion_tokens,
             "backend-consumed tokens not fully accounted");

      const std::string thought =
          rec.transcript.substr(0, rec.transcript.find(cfg.think_close));
      EXPECT(vanilla_thought.compare(0, thought.size(), thought) == 0,
             "thought section is not a prefix of the vanilla thought");

      const int exit_index = rec.exit_chunk_index ? *rec.exit_chunk_index : spec.chunks + 1;
      EXPECT(exit_index >= prev_exit, "exit chunk decreased as lambda rose");
      EXPECT(rec.reasoning_tokens >= prev_reasoning, "reasoning tokens fell as lambda rose");
      prev_exit = exit_index;
      prev_reasoning = rec.reasoning_tokens;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu scenarios x %zu thresholds, %d runs exact",
                specs.size(), std::size_t{5}, checked);
  detail = buf;
  return true;
}

// --------------------------------------------------------------------------
// 5. Branch-parallel equivalence and overlap gains
// --------------------------------------------------------------------------
bool criterion_parallel(std::string& detail) {
  const auto specs = oracle_scenarios(20, 555);
  const std::vector<double> lambdas = {0.5, 0.95, 0.999};
  int overlapped_transitions = 0;

  for (const auto& spec : specs) {
    Script script = generate_script(spec);
    ScriptedBackend backend(script);
    for (double lambda : lambdas) {
      ControllerConfig seq_cfg;
      seq_cfg.lambda = lambda;
      ControllerConfig par_cfg = seq_cfg;
      par_cfg.mode = RunMode::deer_parallel;

      const auto seq = run_deer("q", spec.question, seq_cfg, backend);
      const auto par = run_parallel_branch("q", spec.question, par_cfg, backend);

      EXPECT(par.transcript == seq.transcript, "parallel transcript differs from sequential");
      EXPECT(par.exited_early == seq.exited_early, "parallel exit decision differs");
      EXPECT(par.exit_chunk_index == seq.exit_chunk_index, "parallel exit chunk differs");
      EXPECT(par.reasoning_tokens == seq.reasoning_tokens, "parallel reasoning tokens differ");
      EXPECT(par.conclusion_tokens == seq.conclusion_tokens, "parallel conclusion tokens differ");

      const auto expected = simulate_reference(script, spec, lambda);
      EXPECT(par.wall_time_ms == expected.wall_parallel, "parallel wall time off the model");
      EXPECT(seq.wall_time_ms == expected.wall_sequential, "sequential wall time off the model");

      // Strict per-transition gain wherever the attempt did not exit.
      for (std::size_t i = 0; i < par.induction_attempts.size(); ++i) {
        const auto& pa = par.induction_attempts[i].timing;
        const auto& sa = seq.induction_attempts[i].timing;
        if (par.induction_attempts[i].decision.exit) continue;
        EXPECT(pa.overlapped, "non-exit attempt did not overlap in parallel mode");
        EXPECT(std::max(pa.induction_ms, pa.continuation_ms) <
                   sa.induction_ms + sa.continuation_ms,
               "no strict wall-time gain at a non-exit transition");
        ++overlapped_transitions;
      }
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "byte-identical on %zu scenarios; %d overlapped transitions",
                specs.size(), overlapped_transitions);
  detail = buf;
  return true;
}

// --------------------------------------------------------------------------
// 6. Metrics golden fixture
// --------------------------------------------------------------------------
bool criterion_metrics(std::string& detail) {
  std::vector<BenchItem> items;
  std::vector<RunRecord> method, baseline;
  const std::uint64_t tokens[] = {80, 90, 100, 110, 120, 100, 100, 100, 100, 100};
  for (int i = 1; i <= 10; ++i) {
    BenchItem item;
    item.id = "q" + std::to_string(i);
    item.question = "?";
    item.gold_answer = std::to_string(i);
    item.task_kind = TaskKind::math;
    items.push_back(item);

    RunRecord rec;
    rec.question_id = item.id;
    const bool correct = i <= 7;  // hand count: 7 of 10 correct
    rec.transcript = "t</think>\\boxed{" + std::to_string(correct ? i : 99) + "}";
    rec.final_answer = extract_boxed(rec.transcript);
    rec.reasoning_tokens = tokens[i - 1] - 20;
    rec.conclusion_tokens = 20;
    rec.exited_early = i <= 4;  // hand count: 4 exited, all of them correct
    method.push_back(rec);

    RunRecord base = rec;
    base.exited_early = false;
    base.reasoning_tokens = 2 * tokens[i - 1] - 20;  // exactly double the total
    baseline.push_back(base);
  }

  const auto report = compute_metrics(method, items, &baseline);
  EXPECT(std::abs(report.accuracy - 0.7) < 1e-12, "accuracy != hand-computed 0.7");
  EXPECT(std::abs(report.avg_tokens - 100.0) < 1e-12, "avg tokens != hand-computed 100");
  EXPECT(report.compression_rate.has_value(), "compression rate missing");
  EXPECT(std::abs(*report.compression_rate - 0.5) < 1e-12,
         "CR != 0.5 with method tokens exactly half of baseline");
  EXPECT(std::abs(report.early_exit_rate - 0.4) < 1e-12, "early-exit rate != 0.4");
  EXPECT(std::abs(report.early_exit_accuracy - 1.0) < 1e-12, "early-exit accuracy != 1.0");
  detail = "Acc 0.7, Tok 100, CR 0.5, exit 0.4/1.0 all exact";
  return true;
}

// --------------------------------------------------------------------------
// 7. Grading normalization table
// --------------------------------------------------------------------------
bool criterion_grading(std::string& detail) {
  struct Pair {
    const char* gold;
    const char* predicted;
    TaskKind kind;
    bool equal;
  };
  const Pair table[20] = {
      {"1/2", "\\frac{1}{2}", TaskKind::math, true},
      {"1/2", "\\dfrac{1}{2}", TaskKind::math, true},
      {"1/2", "2/4", TaskKind::math, true},
      {"-1/2", "\\frac{-1}{2}", TaskKind::math, true},
      {"3/4", "\\tfrac{3}{4}", TaskKind::math, true},
      {"2", "4/2", TaskKind::math, true},
      {"42", "{42}", TaskKind::math, true},
      {"42", "$42$", TaskKind::math, true},
      {"7", "007", TaskKind::math, true},
      {"7", "+7", TaskKind::math, true},
      {"0", "-0", TaskKind::math, true},
      {"0.5", ".5", TaskKind::math, true},
      {"12.25", " 12.25 ", TaskKind::math, true},
      {"x+1", "x + 1", TaskKind::math, true},
      {"A", "a", TaskKind::choice, true},
      {"B", "(b)", TaskKind::choice, true},
      {"C", "C.", TaskKind::choice, true},
      {"3", "4", TaskKind::math, false},
      {"1/2", "1/3", TaskKind::math, false},
      {"A", "B", TaskKind::choice, false},
  };

  int passed = 0;
  for (const auto& p : table) {
    BenchItem item{"id", "?", p.gold, p.kind};
    if (grade(item, p.predicted) == p.equal) ++passed;
  }
  EXPECT(passed == 20, "normalization table not 20/20");
  detail = "20/20 pairs";
  return true;
}

// --------------------------------------------------------------------------
// 8. Live smoke (optional)
// --------------------------------------------------------------------------
bool criterion_live(std::string& detail) {
  const char* endpoint = std::getenv("DEER_LIVE_ENDPOINT");
  if (!endpoint) {
    detail = "set DEER_LIVE_ENDPOINT (and DEER_LIVE_MODEL) to enable";
    return true;  // reported as SKIP by the caller
  }
  const char* model = std::getenv("DEER_LIVE_MODEL");

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "deer-live-smoke";
  fs::create_directories(dir);
  const std::string dataset = (dir / "dataset.jsonl").string();
  {
    std::ofstream out(dataset);
    out << R"({"id":"s1","question":"What is 17 + 25?","answer":"42","task":"math"})" << "\n"
        << R"({"id":"s2","question":"What is 9 times 8?","answer":"72","task":"math"})" << "\n"
        << R"({"id":"s3","question":"What is the remainder of 29 divided by 5?","answer":"4","task":"math"})"
        << "\n"
        << R"({"id":"s4","question":"What is 2 to the power 10?","answer":"1024","task":"math"})"
        << "\n"
        << R"({"id":"s5","question":"How many primes are smaller than 12?","answer":"5","task":"math"})"
        << "\n";
  }
  const std::string deer_records = (dir / "deer.jsonl").string();
  const std::string vanilla_records = (dir / "vanilla.jsonl").string();

  auto run_mode = [&](const char* mode, const std::string& out_path) {
    std::vector<std::string> args = {"run",     "--mode",  mode,
                                     "--endpoint", endpoint, "--dataset", dataset,
                                     "--out",   out_path,  "--workers", "1"};
    if (model) {
      args.push_back("--model");
      args.push_back(model);
    }
    std::vector<const char*> argv = {"deer"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return deer::cli::run(static_cast<int>(argv.size()), argv.data());
  };

  EXPECT(run_mode("deer", deer_records) == 0, "live deer run failed");
  EXPECT(run_mode("vanilla", vanilla_records) == 0, "live vanilla run failed");

  const auto deer_recs = read_records(deer_records);
  const auto vanilla_recs = read_records(vanilla_records);
  EXPECT(deer_recs.size() == 5 && vanilla_recs.size() == 5, "expected 5 records per mode");

  std::size_t attempts = 0;
  std::uint64_t deer_tokens = 0, vanilla_tokens = 0;
  for (const auto& r : deer_recs) {
    attempts += r.induction_attempts.size();
    deer_tokens += r.reasoning_tokens + r.conclusion_tokens;
  }
  for (const auto& r : vanilla_recs) vanilla_tokens += r.reasoning_tokens + r.conclusion_tokens;
  EXPECT(attempts >= 1, "no induction attempts against the live server");

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%zu attempts; avg tokens %.0f (deer) vs %.0f (vanilla)%s", attempts,
                static_cast<double>(deer_tokens) / 5.0,
                static_cast<double>(vanilla_tokens) / 5.0,
                deer_tokens <= vanilla_tokens ? "" : " [directional check not met]");
  detail = buf;
  return true;
}

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "confidence math properties", criterion_confidence},
      {2, "calibration exactness", criterion_calibration},
      {3, "analytic vs Monte Carlo false-positive rates", criterion_noise},
      {4, "controller vs reference simulation", criterion_controller},
      {5, "branch-parallel equivalence and overlap", criterion_parallel},
      {6, "metrics golden fixture", criterion_metrics},
      {7, "grading normalization table", criterion_grading},
      {8, "live endpoint smoke", criterion_live, /*optional=*/true},
  };

  int passed = 0, failed = 0, skipped = 0;
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const bool is_skip = c.optional && !std::getenv("DEER_LIVE_ENDPOINT");
    const char* verdict = is_skip ? "SKIP" : ok ? "PASS" : "FAIL";
    std::printf("[%s] criterion %d: %s%s%s\n", verdict, c.number, c.name,
                detail.empty() ? "" : " - ", detail.c_str());
    if (is_skip) ++skipped;
    else if (ok) ++passed;
    else ++failed;
  }
  std::printf("acceptance: %d passed, %d failed, %d skipped\n", passed, failed, skipped);
  return failed == 0 ? 0 : 1;
}
