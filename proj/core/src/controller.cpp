#include "deer/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deer/boxed.hpp"
#include "deer/errors.hpp"

namespace deer {

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::vanilla: return "vanilla";
    case RunMode::deer: return "deer";
    case RunMode::deer_pro: return "deer-pro";
    case RunMode::deer_parallel: return "deer-parallel";
  }
  return "unknown";
}

std::optional<RunMode> parse_run_mode(std::string_view name) {
  if (name == "vanilla") return RunMode::vanilla;
  if (name == "deer") return RunMode::deer;
  if (name == "deer-pro" || name == "deer_pro") return RunMode::deer_pro;
  if (name == "deer-parallel" || name == "deer_parallel") return RunMode::deer_parallel;
  return std::nullopt;
}

const std::vector<std::string>& default_inducer_prompts() {
  static const std::vector<std::string> prompts = {
      "\n\n Final Answer\n\\boxed",
      "\n\n Final Answer\n\n Based on the analysis above, the answer is \\boxed",
      "\n\n Final Answer\n\n The correct final answer is \\boxed",
      "\n\n Based on the previous thinking, I believe I already know the answer.\n"
      " Final Answer\n \\boxed",
  };
  return prompts;
}

void ControllerConfig::validate() const {
  if (max_total_tokens < 1) throw ConfigError("config key 'max_total_tokens': must be >= 1");
  if (!(lambda > 0.0) || !(lambda < 1.0))
    throw ConfigError("config key 'lambda': must lie in (0,1)");
  if (alpha < 0.0) throw ConfigError("config key 'alpha': must be >= 0");
  if (inducer_prompts.empty())
    throw ConfigError("config key 'inducer_prompts': must be non-empty");
  if (n_prompts < 1 || static_cast<std::size_t>(n_prompts) > inducer_prompts.size())
    throw ConfigError("config key 'n_prompts': must be in [1, inducer_prompts.size()]");
  if (trial_max_tokens < 1) throw ConfigError("config key 'trial_max_tokens': must be >= 1");
  if (conclusion_max_tokens < 1)
    throw ConfigError("config key 'conclusion_max_tokens': must be >= 1");
  if (confidence_token_cap < 0)
    throw ConfigError("config key 'confidence_token_cap': must be >= 0");
  if (top_k < 1) throw ConfigError("config key 'top_k': must be >= 1");
  if (think_close.empty()) throw ConfigError("config key 'think_close': must be non-empty");
  try {
    monitor.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config key 'monitor': ") + e.what());
  }
}

namespace {

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

/// Maximum predicted probability at one emitted position: the best of the
/// returned alternatives (under greedy decoding, the emitted token itself).
double token_max_prob(const TokenEvent& e) {
  double lp = e.logprob;
  for (const auto& alt : e.top_alternatives) lp = std::max(lp, alt.logprob);
  double p = std::exp(lp);
  if (p > 1.0) p = 1.0;
  if (p <= 0.0) p = std::nextafter(0.0, 1.0);
  return p;
}

/// The early-exit control loop for one question. One session drives one
/// question; sessions are independent and may run on any number of threads.
class Session {
 public:
  Session(std::string question_id, const std::string& question,
          const ControllerConfig& config, RunMode mode, Backend& backend)
      : cfg_(config), mode_(mode), backend_(backend) {
    record_.question_id = std::move(question_id);
    record_.mode = mode;
    prompt_prefix_ = cfg_.system_prompt + "\n\n" + question + "\n" + cfg_.think_open + "\n";
    budget_ = cfg_.max_total_tokens;
    thought_stops_.push_back(cfg_.think_close);
    if (mode != RunMode::vanilla) {
      if (cfg_.monitor.strategy == MonitorStrategy::marker) {
        for (const auto& m : cfg_.monitor.markers) thought_stops_.push_back(m);
      } else {
        thought_stops_.push_back(cfg_.monitor.step_delimiter);
      }
    }
  }

  RunRecord run() {
    try {
      loop();
    } catch (const RunError&) {
      throw;
    } catch (const Error& e) {
      record_.wall_time_ms = wall_;
      throw RunError(e.what(), record_);
    }
    return record_;
  }

 private:
  enum class Step { continue_loop, finished };

  GenerationRequest thought_request() const {
    GenerationRequest req;
    req.prompt = prompt_prefix_ + thought_;
    req.max_tokens = static_cast<int>(
        std::min<std::int64_t>(budget_, std::numeric_limits<int>::max()));
    req.stop_sequences = thought_stops_;
    req.want_logprobs = true;
    req.top_k = cfg_.top_k;
    req.temperature = cfg_.temperature;
    req.seed = cfg_.seed;
    return req;
  }

  void loop() {
    while (true) {
      if (budget_ <= 0) {
        record_.hit_token_budget = true;
        finalize_truncated();
        return;
      }

      GenerationResult res;
      if (pending_) {
        res = std::move(*pending_);
        pending_.reset();
      } else {
        res = backend_.generate(thought_request());
        wall_ += res.duration_ms;
        if (!record_.induction_attempts.empty()) {
          // This generation is the sequential continuation of the last
          // non-exit attempt; record it for cross-mode scheduling comparisons.
          auto& timing = record_.induction_attempts.back().timing;
          if (!timing.overlapped && timing.continuation_ms == 0)
            timing.continuation_ms = res.duration_ms;
        }
      }

      const std::string chunk_text = res.text();
      const std::uint64_t returned = res.tokens.size();
      const std::uint64_t swallowed = res.consumed_tokens - returned;
      pending_chunk_ += chunk_text;
      thought_ += chunk_text;
      record_.reasoning_tokens += returned;
      budget_ -= static_cast<std::int64_t>(returned);

      Step step = Step::finished;
      switch (res.finish_reason) {
        case FinishReason::budget_exhausted:
          record_.hit_token_budget = true;
          finalize_truncated();
          break;
        case FinishReason::end_of_text:
          // The model ended thinking without its delimiter; keep what exists.
          finalize_truncated();
          break;
        case FinishReason::cancelled:
          throw Error("controller: unexpected cancelled result in thought phase");
        case FinishReason::stop_sequence_hit: {
          const std::string& stop = *res.matched_stop;
          if (stop == cfg_.think_close) {
            handle_natural_end(res, swallowed);
          } else if (cfg_.monitor.strategy == MonitorStrategy::entropy &&
                     stop == cfg_.monitor.step_delimiter) {
            step = handle_step_boundary(res, swallowed);
          } else {
            step = handle_marker(res, swallowed);
          }
          break;
        }
      }
      if (step == Step::finished) return;
    }
  }

  void handle_natural_end(const GenerationResult& res, std::uint64_t swallowed) {
    // The swallowed tokens carried the model-generated end-of-thinking
    // delimiter; they are real generation cost.
    record_.reasoning_tokens += swallowed;
    budget_ -= static_cast<std::int64_t>(swallowed);
    conclude(/*exited=*/false, res.text_after_stop);
  }

  // --- entropy strategy ------------------------------------------------------

  Step handle_step_boundary(const GenerationResult& res, std::uint64_t swallowed) {
    const std::string& delim = cfg_.monitor.step_delimiter;
    const std::string after = res.text_after_stop;

    // The delimiter closes the step and stays in the thought text either way.
    record_.reasoning_tokens += swallowed;
    budget_ -= static_cast<std::int64_t>(swallowed);
    thought_ += delim + after;

    if (budget_ < 1) {
      pending_chunk_ += delim + after;
      record_.hit_token_budget = true;
      finalize_truncated();
      return Step::finished;
    }

    // Probe the first token of the next step; its entropy decides whether
    // this boundary is a candidate exit.
    GenerationRequest probe_req;
    probe_req.prompt = prompt_prefix_ + thought_;
    probe_req.max_tokens = 1;
    probe_req.want_logprobs = true;
    probe_req.top_k = cfg_.top_k;
    probe_req.temperature = cfg_.temperature;
    probe_req.seed = cfg_.seed;
    GenerationResult probe = backend_.generate(probe_req);
    wall_ += probe.duration_ms;

    if (probe.tokens.empty()) {
      pending_chunk_ += delim + after;
      finalize_truncated();
      return Step::finished;
    }
    const TokenEvent& first = probe.tokens.front();
    auto tp = scan_entropy(first, cfg_.monitor, thought_.size());
    if (!tp) {
      // Procedural continuation: keep the probe token and read on.
      record_.thought_chunks.push_back(std::exchange(pending_chunk_, after + first.text));
      thought_ += first.text;
      record_.reasoning_tokens += 1;
      budget_ -= 1;
      return Step::continue_loop;
    }

    record_.thought_chunks.push_back(std::exchange(pending_chunk_, after));
    const bool exited = run_attempt(*tp, /*carry_text=*/first.text,
                                    /*marker_restore=*/"", /*probe_token=*/true);
    return exited ? Step::finished : Step::continue_loop;
  }

  // --- marker strategy ---------------------------------------------------------

  Step handle_marker(const GenerationResult& res, std::uint64_t swallowed) {
    const std::string& marker = *res.matched_stop;
    const std::string& after = res.text_after_stop;

    if (cfg_.monitor.word_boundary) {
      const bool left_ok = thought_.empty() || !is_word_char(thought_.back());
      const bool right_ok = after.empty() || !is_word_char(after.front());
      if (!left_ok || !right_ok) {
        // "Wait" inside a word is not a transition; restore and resume.
        thought_ += marker + after;
        pending_chunk_ += marker + after;
        record_.reasoning_tokens += swallowed;
        budget_ -= static_cast<std::int64_t>(swallowed);
        return Step::continue_loop;
      }
    }

    TransitionPoint tp;
    tp.char_offset = thought_.size();
    tp.kind = TransitionKind::marker_hit;
    tp.trigger_marker = marker;
    record_.thought_chunks.push_back(std::exchange(pending_chunk_, std::string{}));

    marker_swallowed_ = swallowed;
    const bool exited = run_attempt(tp, /*carry_text=*/after,
                                    /*marker_restore=*/marker + after,
                                    /*probe_token=*/false);
    return exited ? Step::finished : Step::continue_loop;
  }

  // --- induction ------------------------------------------------------------------

  GenerationRequest trial_request(int inducer_id) const {
    GenerationRequest req;
    req.prompt =
        prompt_prefix_ + thought_ + cfg_.inducer_prompts[static_cast<std::size_t>(inducer_id)];
    req.max_tokens = cfg_.confidence_token_cap > 0
                         ? std::min(cfg_.confidence_token_cap, cfg_.trial_max_tokens)
                         : cfg_.trial_max_tokens;
    req.want_logprobs = true;
    req.top_k = cfg_.top_k;
    req.temperature = cfg_.temperature;
    req.seed = cfg_.seed;
    req.halt_after_boxed = true;
    return req;
  }

  TrialAnswer make_trial_answer(int inducer_id, const GenerationResult& res) const {
    TrialAnswer trial;
    trial.inducer_id = inducer_id;
    const std::string& inducer = cfg_.inducer_prompts[static_cast<std::size_t>(inducer_id)];
    const std::string concat = inducer + res.text();

    // The inducer prompts end in `\boxed`, so the box content is the answer
    // span; search the concatenation in case the box opens mid-prompt.
    auto span = first_boxed_span(concat);
    if (!span) return trial;  // no balanced box: zero-token answer, confidence 0
    trial.answer_text = std::string(span->interior(concat));

    std::size_t pos = inducer.size();
    for (const auto& tok : res.tokens) {
      const std::size_t begin = pos;
      const std::size_t end = pos + tok.text.size();
      pos = end;
      if (end <= span->interior_begin() || begin >= span->interior_end()) continue;
      trial.token_max_probs.push_back(token_max_prob(tok));
      if (cfg_.confidence_token_cap > 0 &&
          trial.token_max_probs.size() >= static_cast<std::size_t>(cfg_.confidence_token_cap))
        break;
    }
    if (trial.token_max_probs.empty()) {
      trial.answer_text.clear();
      return trial;
    }
    trial.confidence = cfg_.arithmetic_mean
                           ? confidence_arithmetic_mean(trial.token_max_probs)
                           : confidence_geomean(trial.token_max_probs);
    return trial;
  }

  /// Run the induction(s) for one transition and decide. Adds induced token
  /// costs and the (concurrent) induction duration to the session.
  InductionAttempt induce(const TransitionPoint& tp) {
    InductionAttempt attempt;
    attempt.transition = tp;

    const int n = mode_ == RunMode::deer_pro ? cfg_.n_prompts : 1;
    std::vector<GenerationResult> results(static_cast<std::size_t>(n));
    std::vector<bool> failed(static_cast<std::size_t>(n), false);

    if (n > 1 && !backend_.virtual_time()) {
      std::vector<InflightCall> calls;
      calls.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        calls.push_back(InflightCall::start(backend_, trial_request(i)));
      for (int i = 0; i < n; ++i) {
        try {
          results[static_cast<std::size_t>(i)] = calls[static_cast<std::size_t>(i)].wait();
        } catch (const Error&) {
          failed[static_cast<std::size_t>(i)] = true;
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        try {
          results[static_cast<std::size_t>(i)] = backend_.generate(trial_request(i));
        } catch (const Error&) {
          if (n == 1) throw;  // a lone induction failure fails the run
          failed[static_cast<std::size_t>(i)] = true;  // scores 0, drags the mean
        }
      }
    }

    std::uint64_t max_duration = 0;
    std::vector<double> confidences;
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      TrialAnswer trial;
      trial.inducer_id = i;
      if (!failed[idx]) {
        trial = make_trial_answer(i, results[idx]);
        record_.induced_tokens += results[idx].consumed_tokens;
        if (cfg_.count_induced_in_budget)
          budget_ -= static_cast<std::int64_t>(results[idx].consumed_tokens);
        max_duration = std::max(max_duration, results[idx].duration_ms);
      }
      confidences.push_back(trial.confidence);
      attempt.trials.push_back(std::move(trial));
    }
    // Multi-prompt inductions run in parallel: the attempt costs the slowest.
    attempt.timing.induction_ms = max_duration;
    wall_ += max_duration;

    double score = confidences.front();
    if (mode_ == RunMode::deer_pro) {
      attempt.calibrated = calibrate(confidences, cfg_.alpha);
      score = attempt.calibrated->c_cali;
    }
    attempt.decision = decide_exit(score, cfg_.lambda, tp);
    return attempt;
  }

  /// Commit the non-exit context restore: the marker (with any token
  /// remainder) re-enters the thought text so the model resumes on its
  /// original path; a kept probe token opens the next chunk.
  void restore_after_no_exit(const std::string& carry_text, const std::string& marker_restore,
                             bool probe_token) {
    if (!marker_restore.empty()) {
      thought_ += marker_restore;
      pending_chunk_ = carry_text;
      record_.reasoning_tokens += marker_swallowed_;
      budget_ -= static_cast<std::int64_t>(marker_swallowed_);
      marker_swallowed_ = 0;
    } else {
      thought_ += carry_text;
      pending_chunk_ += carry_text;
    }
    if (probe_token) {
      record_.reasoning_tokens += 1;
      budget_ -= 1;
    }
  }

  /// Book the discarded-text costs of an exit decision.
  void account_exit_discards(bool probe_token) {
    record_.induced_tokens += marker_swallowed_;  // the marker never re-entered
    marker_swallowed_ = 0;
    if (probe_token) record_.induced_tokens += 1;  // the probe is discarded too
  }

  bool run_attempt(const TransitionPoint& tp, const std::string& carry_text,
                   const std::string& marker_restore, bool probe_token) {
    if (mode_ == RunMode::deer_parallel && budget_ > 0) {
      return attempt_parallel(tp, carry_text, marker_restore, probe_token);
    }
    return attempt_sequential(tp, carry_text, marker_restore, probe_token);
  }

  bool attempt_sequential(const TransitionPoint& tp, const std::string& carry_text,
                          const std::string& marker_restore, bool probe_token) {
    InductionAttempt attempt = induce(tp);
    const bool exit = attempt.decision.exit;
    record_.induction_attempts.push_back(std::move(attempt));
    if (exit) {
      account_exit_discards(probe_token);
      conclude(/*exited=*/true, "");
      return true;
    }
    restore_after_no_exit(carry_text, marker_restore, probe_token);
    return false;
  }

  /// Branch-parallel attempt: the continuation request and the induction run
  /// concurrently; the exit decision waits only for the induction, and the
  /// losing branch is cancelled.
  bool attempt_parallel(const TransitionPoint& tp, const std::string& carry_text,
                        const std::string& marker_restore, bool probe_token) {
    // Build the continuation request exactly as the sequential path would
    // issue it after a non-exit decision, then roll the state back.
    const std::string saved_thought = thought_;
    const std::string saved_chunk = pending_chunk_;
    const std::int64_t saved_budget = budget_;
    const std::uint64_t saved_reasoning = record_.reasoning_tokens;
    const std::uint64_t saved_marker_swallowed = marker_swallowed_;
    restore_after_no_exit(carry_text, marker_restore, probe_token);
    GenerationRequest cont_req = thought_request();
    const std::int64_t continuation_budget = budget_;
    thought_ = saved_thought;
    pending_chunk_ = saved_chunk;
    budget_ = saved_budget;
    record_.reasoning_tokens = saved_reasoning;
    marker_swallowed_ = saved_marker_swallowed;

    if (continuation_budget <= 0) {
      return attempt_sequential(tp, carry_text, marker_restore, probe_token);
    }

    InductionAttempt attempt;
    GenerationResult continuation;

    if (backend_.virtual_time()) {
      // Simulated clock: the induction result is computed first; the
      // continuation then replays either in full (no exit) or up to the
      // induction's finish tick (exit), keeping records reproducible.
      attempt = induce(tp);
      wall_ -= attempt.timing.induction_ms;  // re-booked below as overlap
      if (attempt.decision.exit) {
        GenerationRequest cancelled_req = cont_req;
        cancelled_req.tick_budget = attempt.timing.induction_ms;
        continuation = backend_.generate(cancelled_req);
      } else {
        continuation = backend_.generate(cont_req);
      }
    } else {
      InflightCall trial_call = InflightCall::start(backend_, trial_request(0));
      InflightCall cont_call = InflightCall::start(backend_, cont_req);
      try {
        GenerationResult trial_res = trial_call.wait();
        attempt.transition = tp;
        TrialAnswer trial = make_trial_answer(0, trial_res);
        record_.induced_tokens += trial_res.consumed_tokens;
        if (cfg_.count_induced_in_budget)
          budget_ -= static_cast<std::int64_t>(trial_res.consumed_tokens);
        attempt.timing.induction_ms = trial_res.duration_ms;
        const double score = trial.confidence;
        attempt.trials.push_back(std::move(trial));
        attempt.decision = decide_exit(score, cfg_.lambda, tp);
      } catch (...) {
        cont_call.cancel();
        try {
          (void)cont_call.wait();
        } catch (...) {
        }
        throw;
      }
      if (attempt.decision.exit) cont_call.cancel();
      continuation = cont_call.wait();
    }

    attempt.timing.overlapped = true;
    attempt.timing.continuation_ms = continuation.duration_ms;

    if (attempt.decision.exit) {
      // The continuation lost the race: discard its text, keep its cost.
      attempt.timing.cancelled_tokens = continuation.consumed_tokens;
      record_.induced_tokens += continuation.consumed_tokens;
      wall_ += attempt.timing.induction_ms;
      account_exit_discards(probe_token);
      record_.induction_attempts.push_back(std::move(attempt));
      conclude(/*exited=*/true, "");
      return true;
    }

    wall_ += std::max(attempt.timing.induction_ms, continuation.duration_ms);
    record_.induction_attempts.push_back(std::move(attempt));
    restore_after_no_exit(carry_text, marker_restore, probe_token);
    if (continuation.finish_reason != FinishReason::cancelled) {
      pending_ = std::move(continuation);
    }
    return false;
  }

  // --- finalization ---------------------------------------------------------------

  void push_final_chunk() {
    if (!pending_chunk_.empty()) record_.thought_chunks.push_back(pending_chunk_);
    pending_chunk_.clear();
  }

  void finalize_truncated() {
    push_final_chunk();
    record_.transcript = thought_;
    record_.exited_early = false;
    if (auto boxed = extract_boxed(record_.transcript)) record_.final_answer = *boxed;
    record_.wall_time_ms = wall_;
  }

  void conclude(bool exited, const std::string& spill_after_close) {
    if (!exited) push_final_chunk();
    record_.exited_early = exited;
    if (exited) record_.exit_chunk_index = static_cast<int>(record_.thought_chunks.size());

    // An exit injects the end-of-thinking delimiter as text: it enters the
    // transcript at zero token cost, unlike the model-generated one, which
    // was already booked when its stop fired.

    std::string conclusion = spill_after_close;
    const std::int64_t conclusion_budget =
        std::min<std::int64_t>(cfg_.conclusion_max_tokens, budget_);
    if (conclusion_budget > 0) {
      GenerationRequest req;
      req.prompt = prompt_prefix_ + thought_ + cfg_.think_close + spill_after_close;
      req.max_tokens = static_cast<int>(conclusion_budget);
      req.want_logprobs = true;
      req.top_k = cfg_.top_k;
      req.temperature = cfg_.temperature;
      req.seed = cfg_.seed;
      GenerationResult res = backend_.generate(req);
      wall_ += res.duration_ms;
      conclusion += res.text();
      record_.conclusion_tokens += res.tokens.size();
      budget_ -= static_cast<std::int64_t>(res.tokens.size());
    }

    record_.transcript = thought_ + cfg_.think_close + conclusion;
    if (auto boxed = extract_boxed(record_.transcript)) record_.final_answer = *boxed;
    record_.wall_time_ms = wall_;
  }

  const ControllerConfig& cfg_;
  RunMode mode_;
  Backend& backend_;

  RunRecord record_;
  std::string prompt_prefix_;
  std::string thought_;        // generated thought text, markers included
  std::string pending_chunk_;  // text of the chunk currently growing
  std::vector<std::string> thought_stops_;
  std::int64_t budget_ = 0;
  std::uint64_t wall_ = 0;
  std::uint64_t marker_swallowed_ = 0;  // stop-consumed tokens of the live transition
  std::optional<GenerationResult> pending_;  // continuation carried from a parallel attempt
};

RunRecord run_with_mode(const std::string& question_id, const std::string& question,
                        const ControllerConfig& config, RunMode mode, Backend& backend) {
  config.validate();
  if (question.empty()) throw DomainError("run: question is empty");
  Session session(question_id, question, config, mode, backend);
  return session.run();
}

}  // namespace

RunRecord run_vanilla(const std::string& question_id, const std::string& question,
                      const ControllerConfig& config, Backend& backend) {
  return run_with_mode(question_id, question, config, RunMode::vanilla, backend);
}

RunRecord run_deer(const std::string& question_id, const std::string& question,
                   const ControllerConfig& config, Backend& backend) {
  return run_with_mode(question_id, question, config, RunMode::deer, backend);
}

RunRecord run_deer_pro(const std::string& question_id, const std::string& question,
                       const ControllerConfig& config, Backend& backend) {
  return run_with_mode(question_id, question, config, RunMode::deer_pro, backend);
}

RunRecord run_parallel_branch(const std::string& question_id, const std::string& question,
                              const ControllerConfig& config, Backend& backend) {
  return run_with_mode(question_id, question, config, RunMode::deer_parallel, backend);
}

RunRecord run_question(const std::string& question_id, const std::string& question,
                       const ControllerConfig& config, Backend& backend) {
  return run_with_mode(question_id, question, config, config.mode, backend);
}

}  // namespace deer
