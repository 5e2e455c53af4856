#include "app.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "deer/bench.hpp"
#include "deer/controller.hpp"
#include "deer/errors.hpp"
#include "deer/http_backend.hpp"
#include "deer/noise_lab.hpp"
#include "deer/record_io.hpp"
#include "deer/script_gen.hpp"
#include "deer/scripted_backend.hpp"
#include "deer/version.hpp"

namespace deer::cli {

using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

/// Everything a run needs, merged from config file < environment < flags.
struct AppConfig {
  ControllerConfig controller;
  std::string endpoint;
  std::string model;
  std::string script_path;
  int workers = 4;
  int rounds = 1;
  bool stream = true;
};

const char* kKnownKeys[] = {
    "version",        "endpoint",          "model",
    "mode",           "lambda",            "alpha",
    "n_prompts",      "monitor",           "markers",
    "word_boundary",  "entropy_threshold", "step_delimiter",
    "max_total_tokens", "confidence_token_cap", "trial_max_tokens",
    "conclusion_max_tokens", "top_k",      "temperature",
    "seed",           "workers",           "rounds",
    "stream",         "system_prompt",     "inducer_prompts",
    "think_open",     "think_close",       "arithmetic_mean",
    "count_induced_in_budget", "script",
};

void apply_config_file(AppConfig& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  // Fail closed: an unknown key is an error, not a silent no-op.
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kKnownKeys)
      if (key == k) known = true;
    if (!known) throw ConfigError("config file: unknown key '" + key + "'");
    (void)value;
  }
  if (j.contains("version") && j.at("version").get<int>() != 1)
    throw ConfigError("config file: unsupported version (schema version 1 expected)");

  ControllerConfig& c = app.controller;
  try {
    app.endpoint = j.value("endpoint", app.endpoint);
    app.model = j.value("model", app.model);
    app.script_path = j.value("script", app.script_path);
    app.workers = j.value("workers", app.workers);
    app.rounds = j.value("rounds", app.rounds);
    app.stream = j.value("stream", app.stream);
    if (j.contains("mode")) {
      auto mode = parse_run_mode(j.at("mode").get<std::string>());
      if (!mode) throw ConfigError("config file: unknown mode");
      c.mode = *mode;
    }
    c.lambda = j.value("lambda", c.lambda);
    c.alpha = j.value("alpha", c.alpha);
    c.n_prompts = j.value("n_prompts", c.n_prompts);
    if (j.contains("monitor")) {
      const std::string m = j.at("monitor").get<std::string>();
      if (m == "marker") c.monitor.strategy = MonitorStrategy::marker;
      else if (m == "entropy") c.monitor.strategy = MonitorStrategy::entropy;
      else throw ConfigError("config file: key 'monitor' must be marker or entropy");
    }
    if (j.contains("markers"))
      c.monitor.markers = j.at("markers").get<std::vector<std::string>>();
    c.monitor.word_boundary = j.value("word_boundary", c.monitor.word_boundary);
    c.monitor.entropy_threshold = j.value("entropy_threshold", c.monitor.entropy_threshold);
    c.monitor.step_delimiter = j.value("step_delimiter", c.monitor.step_delimiter);
    c.max_total_tokens = j.value("max_total_tokens", c.max_total_tokens);
    c.confidence_token_cap = j.value("confidence_token_cap", c.confidence_token_cap);
    c.trial_max_tokens = j.value("trial_max_tokens", c.trial_max_tokens);
    c.conclusion_max_tokens = j.value("conclusion_max_tokens", c.conclusion_max_tokens);
    c.top_k = j.value("top_k", c.top_k);
    c.temperature = j.value("temperature", c.temperature);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.system_prompt = j.value("system_prompt", c.system_prompt);
    if (j.contains("inducer_prompts"))
      c.inducer_prompts = j.at("inducer_prompts").get<std::vector<std::string>>();
    c.think_open = j.value("think_open", c.think_open);
    c.think_close = j.value("think_close", c.think_close);
    c.arithmetic_mean = j.value("arithmetic_mean", c.arithmetic_mean);
    c.count_induced_in_budget = j.value("count_induced_in_budget", c.count_induced_in_budget);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

void apply_env(AppConfig& app) {
  if (const char* endpoint = std::getenv("DEER_ENDPOINT")) app.endpoint = endpoint;
  if (const char* model = std::getenv("DEER_MODEL")) app.model = model;
}

/// Register the flags shared by `run` on a subcommand, bound to `app`.
/// Called after config-file and env merging so flags win.
void add_run_flags(CLI::App& cmd, AppConfig& app, std::string& mode_name,
                   std::string& monitor_name) {
  cmd.add_option("--endpoint", app.endpoint,
                 "OpenAI-compatible completions endpoint, e.g. http://127.0.0.1:8000");
  cmd.add_option("--model", app.model, "Model name sent to the endpoint");
  cmd.add_option("--script", app.script_path,
                 "Scripted-backend file (deterministic offline runs)");
  cmd.add_option("--mode", mode_name,
                 "Decoding mode: vanilla | deer | deer-pro | deer-parallel");
  cmd.add_option("--lambda", app.controller.lambda,
                 "Exit-confidence threshold (default 0.95)");
  cmd.add_option("--alpha", app.controller.alpha,
                 "Deviation penalty for deer-pro calibration (default 1)");
  cmd.add_option("--n-prompts", app.controller.n_prompts,
                 "Inducer prompts aggregated per attempt in deer-pro (default 4)");
  cmd.add_option("--monitor", monitor_name, "Transition monitor: marker | entropy");
  cmd.add_option("--markers", app.controller.monitor.markers,
                 "Transition marker strings (default: Wait)")
      ->delimiter(',');
  cmd.add_option("--entropy-threshold", app.controller.monitor.entropy_threshold,
                 "Entropy threshold in nats for the entropy monitor (default 0.672)");
  cmd.add_option("--step-delimiter", app.controller.monitor.step_delimiter,
                 "Reasoning-step delimiter for the entropy monitor (default \"\\n\\n\")");
  cmd.add_option("--max-tokens", app.controller.max_total_tokens,
                 "Main-branch token budget per question (default 16384)");
  cmd.add_option("--confidence-token-cap", app.controller.confidence_token_cap,
                 "Cap on trial-answer tokens used for confidence; 0 = unlimited, 50 "
                 "works well for code tasks");
  cmd.add_option("--top-k", app.controller.top_k,
                 "Logprob alternatives requested per token (default 5)");
  cmd.add_option("--temperature", app.controller.temperature,
                 "Sampling temperature (default 0: greedy)");
  cmd.add_option("--workers", app.workers, "Concurrent questions (default 4)");
  cmd.add_option("--rounds", app.rounds,
                 "Sampling rounds per question, averaged downstream (default 1)");
  cmd.add_flag("--arithmetic-mean", app.controller.arithmetic_mean,
               "Experimental: aggregate token probabilities with the arithmetic mean");
  cmd.add_flag("--count-induced-in-budget", app.controller.count_induced_in_budget,
               "Count trial-answer tokens against the token budget");
  cmd.add_flag("!--no-word-boundary", app.controller.monitor.word_boundary,
               "Disable word-boundary checks around markers");
  cmd.add_flag("!--no-stream", app.stream, "Disable HTTP streaming mode");
}

void resolve_names(AppConfig& app, const std::string& mode_name,
                   const std::string& monitor_name) {
  if (!mode_name.empty()) {
    auto mode = parse_run_mode(mode_name);
    if (!mode) throw ConfigError("config key 'mode': unknown value '" + mode_name + "'");
    app.controller.mode = *mode;
  }
  if (!monitor_name.empty()) {
    if (monitor_name == "marker") app.controller.monitor.strategy = MonitorStrategy::marker;
    else if (monitor_name == "entropy") app.controller.monitor.strategy = MonitorStrategy::entropy;
    else throw ConfigError("config key 'monitor': unknown value '" + monitor_name + "'");
  }
}

std::unique_ptr<Backend> make_backend(const AppConfig& app) {
  if (!app.script_path.empty()) {
    return std::make_unique<ScriptedBackend>(load_script(app.script_path));
  }
  if (app.endpoint.empty())
    throw ConfigError(
        "config key 'endpoint': required (flag --endpoint, env DEER_ENDPOINT, or config "
        "file) unless --script is given");
  HttpBackendConfig http;
  http.endpoint = app.endpoint;
  http.model = app.model;
  http.stream = app.stream;
  return std::make_unique<HttpBackend>(http);
}

// ---------------------------------------------------------------------------
// deer run
// ---------------------------------------------------------------------------

int cmd_run(const AppConfig& app, const std::string& dataset_path,
            const std::string& out_path) {
  app.controller.validate();

  std::unique_ptr<Backend> backend = make_backend(app);

  std::vector<BenchItem> items;
  if (!dataset_path.empty()) {
    items = load_dataset(dataset_path);
  } else if (!app.script_path.empty()) {
    // Single embedded question.
    const Script& script = static_cast<ScriptedBackend&>(*backend).script();
    if (!script.question)
      throw ConfigError("config key 'dataset': required (the script embeds no question)");
    items.push_back(BenchItem{"q0", *script.question, script.gold_answer.value_or(""),
                              TaskKind::math});
  } else {
    throw ConfigError("config key 'dataset': required");
  }

  struct Task {
    std::string id;
    std::string question;
    std::optional<std::uint64_t> seed;
  };
  std::vector<Task> tasks;
  for (int round = 0; round < app.rounds; ++round) {
    for (const auto& item : items) {
      Task t;
      t.id = app.rounds > 1 ? item.id + "#r" + std::to_string(round) : item.id;
      t.question = item.question;
      if (app.controller.seed) t.seed = *app.controller.seed + static_cast<std::uint64_t>(round);
      tasks.push_back(std::move(t));
    }
  }

  std::vector<std::optional<RunRecord>> results(tasks.size());
  std::vector<std::string> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  const int workers = std::max(1, std::min<int>(app.workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!abort.load() && !g_interrupted.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) break;
        ControllerConfig cfg = app.controller;
        cfg.seed = tasks[i].seed ? tasks[i].seed : cfg.seed;
        try {
          results[i] = run_question(tasks[i].id, tasks[i].question, cfg, *backend);
        } catch (const RunError& e) {
          failures[i] = e.what();
          abort.store(true);
        } catch (const Error& e) {
          failures[i] = e.what();
          abort.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();

  std::ofstream out(out_path);
  if (!out) throw ConfigError("config key 'out': cannot write " + out_path);
  std::size_t written = 0;
  for (const auto& rec : results) {
    if (rec) {
      append_record(out, *rec, app.controller);
      ++written;
    }
  }

  std::string failure_note;
  for (const auto& f : failures)
    if (!f.empty() && failure_note.empty()) failure_note = f;

  if (g_interrupted.load() || !failure_note.empty()) {
    json trailer;
    trailer["incomplete"] = true;
    trailer["reason"] = g_interrupted.load() ? "interrupted" : failure_note;
    trailer["completed"] = written;
    trailer["total"] = tasks.size();
    out << trailer.dump() << '\n';
    out.flush();
    std::cerr << "deer run: incomplete (" << trailer["reason"].get<std::string>() << "); "
              << written << "/" << tasks.size() << " records written\n";
    return g_interrupted.load() ? 130 : 1;
  }

  std::cerr << "deer run: " << written << " records -> " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// deer bench
// ---------------------------------------------------------------------------

/// Strip a "#r<N>" round suffix; returns the round index.
std::pair<std::string, int> split_round(const std::string& id) {
  const std::size_t pos = id.rfind("#r");
  if (pos == std::string::npos) return {id, 0};
  const std::string tail = id.substr(pos + 2);
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
    return {id, 0};
  return {id.substr(0, pos), std::stoi(tail)};
}

json report_to_json(const MetricsReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["avg_tokens"] = r.avg_tokens;
  if (r.compression_rate) j["compression_rate"] = *r.compression_rate;
  j["n_items"] = r.n_items;
  j["early_exit_rate"] = r.early_exit_rate;
  j["early_exit_accuracy"] = r.early_exit_accuracy;
  json items = json::array();
  for (const auto& item : r.items) {
    items.push_back({{"id", item.id},
                     {"correct", item.correct},
                     {"normalization_applied", item.normalization_applied},
                     {"exited_early", item.exited_early},
                     {"tokens", item.tokens},
                     {"predicted", item.predicted}});
  }
  j["items"] = items;
  return j;
}

int cmd_bench(const std::string& dataset_path, const std::string& records_path,
              const std::string& baseline_path, const std::string& out_path) {
  auto items = load_dataset(dataset_path);
  auto records = read_records(records_path);

  // Group by sampling round; metrics are averaged across rounds.
  std::map<int, std::vector<RunRecord>> rounds;
  for (auto& rec : records) {
    auto [id, round] = split_round(rec.question_id);
    rec.question_id = id;
    rounds[round].push_back(std::move(rec));
  }
  if (rounds.empty()) throw ConfigError("records file: no records");

  std::optional<std::vector<RunRecord>> baseline;
  if (!baseline_path.empty()) {
    baseline = read_records(baseline_path);
    for (auto& rec : *baseline) rec.question_id = split_round(rec.question_id).first;
    // Multi-round baselines: keep the first round only.
    std::map<std::string, RunRecord> dedup;
    for (auto& rec : *baseline) dedup.emplace(rec.question_id, std::move(rec));
    baseline->clear();
    for (auto& [id, rec] : dedup) baseline->push_back(std::move(rec));
  }

  std::vector<MetricsReport> per_round;
  for (auto& [round, recs] : rounds) {
    per_round.push_back(compute_metrics(recs, items, baseline ? &*baseline : nullptr));
  }

  MetricsReport mean = per_round.front();
  if (per_round.size() > 1) {
    mean.accuracy = 0.0;
    mean.avg_tokens = 0.0;
    mean.early_exit_rate = 0.0;
    mean.early_exit_accuracy = 0.0;
    double cr = 0.0;
    bool has_cr = true;
    for (const auto& r : per_round) {
      mean.accuracy += r.accuracy;
      mean.avg_tokens += r.avg_tokens;
      mean.early_exit_rate += r.early_exit_rate;
      mean.early_exit_accuracy += r.early_exit_accuracy;
      if (r.compression_rate) cr += *r.compression_rate;
      else has_cr = false;
    }
    const double n = static_cast<double>(per_round.size());
    mean.accuracy /= n;
    mean.avg_tokens /= n;
    mean.early_exit_rate /= n;
    mean.early_exit_accuracy /= n;
    if (has_cr) mean.compression_rate = cr / n;
  }

  json out_json;
  out_json["version"] = version_string();
  out_json["rounds"] = per_round.size();
  out_json["report"] = report_to_json(mean);
  if (per_round.size() > 1) {
    json rounds_json = json::array();
    for (const auto& r : per_round) rounds_json.push_back(report_to_json(r));
    out_json["per_round"] = rounds_json;
  }

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("config key 'out': cannot write " + out_path);
    out << out_json.dump(2) << '\n';
  }
  std::cout << format_metrics_table(mean);
  return 0;
}

// ---------------------------------------------------------------------------
// deer noise-lab
// ---------------------------------------------------------------------------

noise::SweepGrid grid_from_file(const std::string& path) {
  noise::SweepGrid grid;
  if (path.empty()) return grid;
  std::ifstream in(path);
  if (!in) throw ConfigError("grid file: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid file: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "mu" && key != "lambda" && key != "sigma" && key != "n" && key != "alpha")
      throw ConfigError("grid file: unknown key '" + key + "'");
  }
  try {
    if (j.contains("mu")) grid.mu = j.at("mu").get<std::vector<double>>();
    if (j.contains("lambda")) grid.lambda = j.at("lambda").get<std::vector<double>>();
    if (j.contains("sigma")) grid.sigma = j.at("sigma").get<std::vector<double>>();
    if (j.contains("n")) grid.n = j.at("n").get<std::vector<int>>();
    if (j.contains("alpha")) grid.alpha = j.at("alpha").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid file: ") + e.what());
  }
  return grid;
}

int cmd_noise_lab(const std::string& grid_path, std::uint64_t trials, std::uint64_t seed,
                  const std::string& out_path) {
  const noise::SweepGrid grid = grid_from_file(grid_path);
  const std::vector<noise::Strategy> strategies = {
      noise::Strategy::single, noise::Strategy::avg, noise::Strategy::mad_exact,
      noise::Strategy::mad_approx};
  const auto rows = noise::run_sweep(grid, strategies, trials, seed);

  json out_json;
  out_json["version"] = version_string();
  out_json["trials"] = trials;
  out_json["seed"] = seed;
  json rows_json = json::array();

  std::ostringstream table;
  table << "  mu     lambda sigma  N  alpha  strategy    empirical     SE            analytic\n";
  for (const auto& row : rows) {
    for (const auto& est : row.estimates) {
      json r;
      r["mu"] = row.scenario.mu;
      r["lambda"] = row.scenario.lambda;
      r["sigma"] = row.scenario.sigma;
      r["n"] = row.scenario.n;
      r["alpha"] = row.scenario.alpha;
      r["strategy"] = std::string(noise::to_string(est.strategy));
      r["empirical"] = est.empirical_rate;
      r["standard_error"] = est.standard_error;
      if (est.analytic_rate) r["analytic"] = *est.analytic_rate;
      rows_json.push_back(std::move(r));

      char line[192];
      std::snprintf(line, sizeof(line),
                    "  %-6.3g %-6.3g %-6.3g %-2d %-6.3g %-11s %-13.6g %-13.6g %s\n",
                    row.scenario.mu, row.scenario.lambda, row.scenario.sigma,
                    row.scenario.n, row.scenario.alpha,
                    std::string(noise::to_string(est.strategy)).c_str(),
                    est.empirical_rate, est.standard_error,
                    est.analytic_rate ? std::to_string(*est.analytic_rate).c_str() : "--");
      table << line;
    }
  }
  out_json["rows"] = rows_json;

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("config key 'out': cannot write " + out_path);
    out << out_json.dump(2) << '\n';
  }
  std::cout << table.str();
  return 0;
}

// ---------------------------------------------------------------------------
// deer script-gen
// ---------------------------------------------------------------------------

int cmd_script_gen(ScenarioSpec spec, const std::string& out_path, bool validate,
                   double lambda) {
  spec.validate();
  Script script = generate_script(spec);
  write_script(out_path, script);

  if (validate) {
    // The generator's output is only trusted once a controller run over it
    // exits exactly where the scenario says it should.
    ScriptedBackend backend(load_script(out_path));
    ControllerConfig cfg;
    cfg.lambda = lambda;
    auto rec = run_deer("validation", spec.question, cfg, backend);
    const std::optional<int> expected = spec.pearl;
    if (expected.has_value() != rec.exited_early ||
        (expected && rec.exit_chunk_index != *expected)) {
      std::ostringstream msg;
      msg << "script-gen validation failed: expected "
          << (expected ? "exit at chunk " + std::to_string(*expected) : std::string("no exit"))
          << ", controller "
          << (rec.exited_early ? "exited at chunk " + std::to_string(*rec.exit_chunk_index)
                               : std::string("did not exit"));
      throw ConfigError(msg.str());
    }
  }
  std::cerr << "deer script-gen: wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App cli{"Early-exit reasoning controller and verification lab"};
  cli.set_version_flag("--version", version_string());
  cli.require_subcommand(1);

  AppConfig app;
  std::string config_path;
  std::string mode_name, monitor_name;
  std::string dataset_path, records_path, baseline_path, out_path, grid_path;
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 0;

  // Config-file values must be loaded before flag parsing so flags win; peek
  // at --config first.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  try {
    if (!config_path.empty()) apply_config_file(app, config_path);
    apply_env(app);
  } catch (const ConfigError& e) {
    std::cerr << "deer: " << e.what() << "\n";
    return 2;
  }
  cli.add_option("--config", config_path, "JSON config file (schema version 1)");

  auto* run_cmd = cli.add_subcommand("run", "Run questions through the controller");
  add_run_flags(*run_cmd, app, mode_name, monitor_name);
  run_cmd->add_option("--dataset", dataset_path, "Line-delimited dataset of questions");
  run_cmd->add_option("--out", out_path, "Output records file")->required();
  run_cmd->add_option("--seed", seed, "Base sampling seed")->capture_default_str();

  auto* bench_cmd = cli.add_subcommand("bench", "Score run records against a dataset");
  bench_cmd->add_option("--dataset", dataset_path, "Line-delimited dataset")->required();
  bench_cmd->add_option("--records", records_path, "Run records to score")->required();
  bench_cmd->add_option("--baseline", baseline_path,
                        "Baseline records for the compression rate");
  bench_cmd->add_option("--out", out_path, "Report file (JSON)");

  auto* noise_cmd = cli.add_subcommand(
      "noise-lab", "Monte Carlo false-positive rates vs closed forms");
  noise_cmd->add_option("--grid", grid_path, "Scenario grid file (JSON)");
  noise_cmd->add_option("--trials", trials, "Trials per scenario")->capture_default_str();
  noise_cmd->add_option("--seed", seed, "Noise stream seed")->capture_default_str();
  noise_cmd->add_option("--out", out_path, "Report file (JSON)");

  auto* gen_cmd = cli.add_subcommand("script-gen", "Generate a scripted-backend scenario");
  ScenarioSpec spec;
  int pearl = 0;
  std::vector<double> confidences;
  double gen_lambda = 0.95;
  bool no_validate = false;
  gen_cmd->add_option("--chunks", spec.chunks, "Thought chunks")->capture_default_str();
  gen_cmd->add_option("--pearl", pearl, "1-based chunk whose trial answer exits (0 = none)");
  gen_cmd->add_option("--confidences", confidences, "Per-transition trial confidences")
      ->delimiter(',');
  gen_cmd->add_option("--marker", spec.marker, "Transition marker")->capture_default_str();
  gen_cmd->add_option("--question", spec.question, "Embedded question");
  gen_cmd->add_option("--answer", spec.answer, "Embedded gold answer")->capture_default_str();
  gen_cmd->add_option("--chunk-words", spec.chunk_words, "Filler words per chunk")
      ->capture_default_str();
  gen_cmd->add_option("--base-ticks", spec.base_latency_ticks, "Per-call latency ticks")
      ->capture_default_str();
  gen_cmd->add_option("--per-token-ticks", spec.per_token_ticks, "Per-token latency ticks")
      ->capture_default_str();
  gen_cmd->add_option("--lambda", gen_lambda, "Threshold used for validation")
      ->capture_default_str();
  gen_cmd->add_flag("--no-validate", no_validate, "Skip the controller round-trip check");
  gen_cmd->add_option("--out", out_path, "Output script file")->required();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Prints help text or the parse error; bad flags are config errors.
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::signal(SIGINT, handle_sigint);

  try {
    resolve_names(app, mode_name, monitor_name);
    if (run_cmd->parsed()) {
      if (run_cmd->count("--seed")) app.controller.seed = seed;
      return cmd_run(app, dataset_path, out_path);
    }
    if (bench_cmd->parsed()) {
      return cmd_bench(dataset_path, records_path, baseline_path, out_path);
    }
    if (noise_cmd->parsed()) {
      return cmd_noise_lab(grid_path, trials, seed, out_path);
    }
    if (gen_cmd->parsed()) {
      if (pearl > 0) spec.pearl = pearl;
      if (!confidences.empty()) spec.confidences = confidences;
      return cmd_script_gen(spec, out_path, !no_validate, gen_lambda);
    }
  } catch (const ConfigError& e) {
    std::cerr << "deer: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "deer: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "deer: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace deer::cli
