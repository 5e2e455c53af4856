#include "deer/record_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "deer/errors.hpp"
#include "deer/version.hpp"

namespace deer {

using nlohmann::json;

namespace {

json transition_to_json(const TransitionPoint& tp) {
  json j;
  j["char_offset"] = tp.char_offset;
  if (tp.kind == TransitionKind::marker_hit) {
    j["kind"] = "marker_hit";
    j["trigger"] = tp.trigger_marker;
  } else {
    j["kind"] = "high_entropy_step";
    j["trigger"] = tp.trigger_entropy;
  }
  return j;
}

TransitionPoint transition_from_json(const json& j) {
  TransitionPoint tp;
  tp.char_offset = j.at("char_offset").get<std::size_t>();
  if (j.at("kind").get<std::string>() == "marker_hit") {
    tp.kind = TransitionKind::marker_hit;
    tp.trigger_marker = j.at("trigger").get<std::string>();
  } else {
    tp.kind = TransitionKind::high_entropy_step;
    tp.trigger_entropy = j.at("trigger").get<double>();
  }
  return tp;
}

json config_to_json(const ControllerConfig& c) {
  json j;
  j["system_prompt"] = c.system_prompt;
  j["inducer_prompts"] = c.inducer_prompts;
  j["think_open"] = c.think_open;
  j["think_close"] = c.think_close;
  j["max_total_tokens"] = c.max_total_tokens;
  j["mode"] = std::string(to_string(c.mode));
  j["monitor"] = {
      {"strategy", std::string(to_string(c.monitor.strategy))},
      {"markers", c.monitor.markers},
      {"word_boundary", c.monitor.word_boundary},
      {"step_delimiter", c.monitor.step_delimiter},
      {"entropy_threshold", c.monitor.entropy_threshold},
  };
  j["lambda"] = c.lambda;
  j["alpha"] = c.alpha;
  j["n_prompts"] = c.n_prompts;
  j["trial_max_tokens"] = c.trial_max_tokens;
  j["conclusion_max_tokens"] = c.conclusion_max_tokens;
  j["confidence_token_cap"] = c.confidence_token_cap;
  j["arithmetic_mean"] = c.arithmetic_mean;
  j["count_induced_in_budget"] = c.count_induced_in_budget;
  j["top_k"] = c.top_k;
  j["temperature"] = c.temperature;
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

ControllerConfig config_from_json(const json& j) {
  ControllerConfig c;
  c.system_prompt = j.value("system_prompt", c.system_prompt);
  if (j.contains("inducer_prompts"))
    c.inducer_prompts = j.at("inducer_prompts").get<std::vector<std::string>>();
  c.think_open = j.value("think_open", c.think_open);
  c.think_close = j.value("think_close", c.think_close);
  c.max_total_tokens = j.value("max_total_tokens", c.max_total_tokens);
  if (j.contains("mode")) {
    if (auto mode = parse_run_mode(j.at("mode").get<std::string>())) c.mode = *mode;
  }
  if (j.contains("monitor")) {
    const json& m = j.at("monitor");
    c.monitor.strategy = m.value("strategy", "marker") == std::string("entropy")
                             ? MonitorStrategy::entropy
                             : MonitorStrategy::marker;
    if (m.contains("markers")) c.monitor.markers = m.at("markers").get<std::vector<std::string>>();
    c.monitor.word_boundary = m.value("word_boundary", c.monitor.word_boundary);
    c.monitor.step_delimiter = m.value("step_delimiter", c.monitor.step_delimiter);
    c.monitor.entropy_threshold = m.value("entropy_threshold", c.monitor.entropy_threshold);
  }
  c.lambda = j.value("lambda", c.lambda);
  c.alpha = j.value("alpha", c.alpha);
  c.n_prompts = j.value("n_prompts", c.n_prompts);
  c.trial_max_tokens = j.value("trial_max_tokens", c.trial_max_tokens);
  c.conclusion_max_tokens = j.value("conclusion_max_tokens", c.conclusion_max_tokens);
  c.confidence_token_cap = j.value("confidence_token_cap", c.confidence_token_cap);
  c.arithmetic_mean = j.value("arithmetic_mean", c.arithmetic_mean);
  c.count_induced_in_budget = j.value("count_induced_in_budget", c.count_induced_in_budget);
  c.top_k = j.value("top_k", c.top_k);
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string record_to_json(const RunRecord& r, const ControllerConfig& config) {
  json j;
  j["version"] = version_string();
  j["question_id"] = r.question_id;
  j["mode"] = std::string(to_string(r.mode));
  j["transcript"] = r.transcript;
  j["thought_chunks"] = r.thought_chunks;

  json attempts = json::array();
  for (const auto& a : r.induction_attempts) {
    json aj;
    aj["transition"] = transition_to_json(a.transition);
    json trials = json::array();
    for (const auto& t : a.trials) {
      trials.push_back({
          {"answer_text", t.answer_text},
          {"token_max_probs", t.token_max_probs},
          {"confidence", t.confidence},
          {"inducer_id", t.inducer_id},
      });
    }
    aj["trials"] = trials;
    if (a.calibrated) {
      aj["calibrated"] = {
          {"per_prompt", a.calibrated->per_prompt},
          {"c_avg", a.calibrated->c_avg},
          {"c_mad", a.calibrated->c_mad},
          {"alpha", a.calibrated->alpha},
          {"c_cali", a.calibrated->c_cali},
      };
    }
    aj["decision"] = {
        {"exit", a.decision.exit},
        {"score", a.decision.score},
        {"threshold", a.decision.threshold},
    };
    aj["timing"] = {
        {"induction_ms", a.timing.induction_ms},
        {"continuation_ms", a.timing.continuation_ms},
        {"overlapped", a.timing.overlapped},
        {"cancelled_tokens", a.timing.cancelled_tokens},
    };
    attempts.push_back(std::move(aj));
  }
  j["induction_attempts"] = attempts;

  j["exited_early"] = r.exited_early;
  if (r.exit_chunk_index) j["exit_chunk_index"] = *r.exit_chunk_index;
  j["reasoning_tokens"] = r.reasoning_tokens;
  j["induced_tokens"] = r.induced_tokens;
  j["conclusion_tokens"] = r.conclusion_tokens;
  if (r.final_answer) j["final_answer"] = *r.final_answer;
  j["wall_time_ms"] = r.wall_time_ms;
  j["hit_token_budget"] = r.hit_token_budget;
  j["config"] = config_to_json(config);
  return j.dump();
}

RunRecord record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("record line: ") + e.what());
  }
  RunRecord r;
  try {
    r.question_id = j.at("question_id").get<std::string>();
    if (auto mode = parse_run_mode(j.value("mode", "deer"))) r.mode = *mode;
    r.transcript = j.value("transcript", "");
    if (j.contains("thought_chunks"))
      r.thought_chunks = j.at("thought_chunks").get<std::vector<std::string>>();
    for (const auto& aj : j.value("induction_attempts", json::array())) {
      InductionAttempt a;
      a.transition = transition_from_json(aj.at("transition"));
      for (const auto& tj : aj.value("trials", json::array())) {
        TrialAnswer t;
        t.answer_text = tj.value("answer_text", "");
        if (tj.contains("token_max_probs"))
          t.token_max_probs = tj.at("token_max_probs").get<std::vector<double>>();
        t.confidence = tj.value("confidence", 0.0);
        t.inducer_id = tj.value("inducer_id", 0);
        a.trials.push_back(std::move(t));
      }
      if (aj.contains("calibrated")) {
        const json& cj = aj.at("calibrated");
        CalibratedConfidence cc;
        cc.per_prompt = cj.at("per_prompt").get<std::vector<double>>();
        cc.c_avg = cj.at("c_avg").get<double>();
        cc.c_mad = cj.at("c_mad").get<double>();
        cc.alpha = cj.at("alpha").get<double>();
        cc.c_cali = cj.at("c_cali").get<double>();
        a.calibrated = std::move(cc);
      }
      const json& dj = aj.at("decision");
      a.decision.exit = dj.at("exit").get<bool>();
      a.decision.score = dj.at("score").get<double>();
      a.decision.threshold = dj.at("threshold").get<double>();
      a.decision.transition = a.transition;
      if (aj.contains("timing")) {
        const json& tj = aj.at("timing");
        a.timing.induction_ms = tj.value("induction_ms", 0ULL);
        a.timing.continuation_ms = tj.value("continuation_ms", 0ULL);
        a.timing.overlapped = tj.value("overlapped", false);
        a.timing.cancelled_tokens = tj.value("cancelled_tokens", 0ULL);
      }
      r.induction_attempts.push_back(std::move(a));
    }
    r.exited_early = j.value("exited_early", false);
    if (j.contains("exit_chunk_index")) r.exit_chunk_index = j.at("exit_chunk_index").get<int>();
    r.reasoning_tokens = j.value("reasoning_tokens", 0ULL);
    r.induced_tokens = j.value("induced_tokens", 0ULL);
    r.conclusion_tokens = j.value("conclusion_tokens", 0ULL);
    if (j.contains("final_answer")) r.final_answer = j.at("final_answer").get<std::string>();
    r.wall_time_ms = j.value("wall_time_ms", 0ULL);
    r.hit_token_budget = j.value("hit_token_budget", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("record line: ") + e.what());
  }
  return r;
}

ControllerConfig config_from_record_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
    return config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("record line: ") + e.what());
  }
}

void append_record(std::ostream& out, const RunRecord& record,
                   const ControllerConfig& config) {
  out << record_to_json(record, config) << '\n';
}

void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records,
                   const ControllerConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write records file: " + path.string());
  for (const auto& r : records) append_record(out, r, config);
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file: " + path.string());
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    json j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("incomplete")) continue;  // trailer marker
    records.push_back(record_from_json(line));
  }
  return records;
}

}  // namespace deer
