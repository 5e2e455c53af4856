#include "deer/bench.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "deer/boxed.hpp"
#include "deer/errors.hpp"

namespace deer {

using nlohmann::json;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::math: return "math";
    case TaskKind::choice: return "choice";
    case TaskKind::code: return "code";
  }
  return "unknown";
}

std::optional<TaskKind> parse_task_kind(std::string_view name) {
  if (name == "math") return TaskKind::math;
  if (name == "choice") return TaskKind::choice;
  if (name == "code") return TaskKind::code;
  return std::nullopt;
}

std::vector<BenchItem> parse_dataset(std::string_view jsonl_contents) {
  std::vector<BenchItem> items;
  std::unordered_set<std::string> seen;
  std::istringstream in{std::string(jsonl_contents)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    BenchItem item;
    try {
      item.id = j.at("id").get<std::string>();
      item.question = j.at("question").get<std::string>();
      item.gold_answer = j.value("answer", "");
      const std::string task = j.value("task", "math");
      auto kind = parse_task_kind(task);
      if (!kind)
        throw ConfigError("dataset line " + std::to_string(line_no) + ": unknown task '" +
                          task + "'");
      item.task_kind = *kind;
    } catch (const json::exception& e) {
      throw ConfigError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(item.id).second)
      throw ConfigError("dataset: duplicate id '" + item.id + "'");
    if (item.task_kind != TaskKind::code && item.gold_answer.empty())
      throw ConfigError("dataset: item '" + item.id + "' has an empty answer");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<BenchItem> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

// ---------------------------------------------------------------------------
// Answer normalization
// ---------------------------------------------------------------------------

namespace {

std::string strip_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

// Drop one level of surrounding {...} or $...$ repeatedly.
std::string strip_wrappers(std::string s) {
  bool changed = true;
  while (changed && s.size() >= 2) {
    changed = false;
    if (s.front() == '{' && s.back() == '}') {
      // Only strip when the outer braces actually pair with each other.
      int depth = 0;
      bool outer = true;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}') {
          --depth;
          if (depth == 0 && i + 1 != s.size()) {
            outer = false;
            break;
          }
        }
      }
      if (outer) {
        s = s.substr(1, s.size() - 2);
        changed = true;
        continue;
      }
    }
    if (s.front() == '$' && s.back() == '$') {
      s = s.substr(1, s.size() - 2);
      changed = true;
    }
  }
  return s;
}

// Rewrite every \frac{a}{b} (also \dfrac, \tfrac) as a/b, recursively.
std::string fold_fracs(std::string s) {
  static const std::string_view kNames[] = {"\\dfrac", "\\tfrac", "\\frac"};
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view name : kNames) {
      const std::size_t pos = s.find(name);
      if (pos == std::string::npos) continue;
      std::size_t i = pos + name.size();
      auto read_group = [&](std::size_t& at) -> std::optional<std::string> {
        if (at >= s.size() || s[at] != '{') return std::nullopt;
        int depth = 0;
        for (std::size_t j = at; j < s.size(); ++j) {
          if (s[j] == '{') ++depth;
          if (s[j] == '}' && --depth == 0) {
            std::string grp = s.substr(at + 1, j - at - 1);
            at = j + 1;
            return grp;
          }
        }
        return std::nullopt;
      };
      std::size_t cursor = i;
      auto num = read_group(cursor);
      if (!num) break;
      auto den = read_group(cursor);
      if (!den) break;
      s = s.substr(0, pos) + *num + "/" + *den + s.substr(cursor);
      changed = true;
    }
  }
  return s;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

// Canonicalize an optionally signed integer literal: drop '+', leading zeros.
std::optional<std::string> canonical_integer(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) return std::nullopt;
  std::size_t nz = 0;
  while (nz + 1 < s.size() && s[nz] == '0') ++nz;
  std::string digits{s.substr(nz)};
  if (digits == "0") return std::string("0");
  return (neg ? "-" : "") + digits;
}

long long to_ll(std::string_view digits, bool neg) {
  long long v = 0;
  for (char c : digits) v = v * 10 + (c - '0');
  return neg ? -v : v;
}

// Reduce an integer fraction a/b to lowest terms with the sign on the
// numerator; integers come back as-is ("4/2" -> "2").
std::optional<std::string> canonical_fraction(std::string_view s) {
  const std::size_t slash = s.find('/');
  if (slash == std::string_view::npos || s.find('/', slash + 1) != std::string_view::npos)
    return std::nullopt;
  auto num = canonical_integer(s.substr(0, slash));
  auto den = canonical_integer(s.substr(slash + 1));
  if (!num || !den || *den == "0") return std::nullopt;
  if ((*num).size() > 17 || (*den).size() > 17) return std::nullopt;  // overflow guard
  const bool num_neg = (*num)[0] == '-';
  const bool den_neg = (*den)[0] == '-';
  long long a = to_ll(num_neg ? std::string_view(*num).substr(1) : *num, false);
  long long b = to_ll(den_neg ? std::string_view(*den).substr(1) : *den, false);
  if (b == 0) return std::nullopt;
  const bool neg = num_neg != den_neg;
  const long long g = std::gcd(a, b);
  if (g > 0) {
    a /= g;
    b /= g;
  }
  if (b == 1) return (neg && a != 0 ? "-" : "") + std::to_string(a);
  return (neg && a != 0 ? "-" : "") + std::to_string(a) + "/" + std::to_string(b);
}

// ".5" -> "0.5"; strip a leading '+'; drop leading integer-part zeros.
std::string canonical_decimal(std::string s) {
  if (!s.empty() && s[0] == '+') s.erase(0, 1);
  std::string sign;
  if (!s.empty() && s[0] == '-') {
    sign = "-";
    s.erase(0, 1);
  }
  const std::size_t dot = s.find('.');
  if (dot == std::string::npos) return sign + s;
  std::string intpart = s.substr(0, dot);
  const std::string fracpart = s.substr(dot + 1);
  if (!all_digits(fracpart) || (!intpart.empty() && !all_digits(intpart))) return sign + s;
  std::size_t nz = 0;
  while (nz + 1 < intpart.size() && intpart[nz] == '0') ++nz;
  intpart = intpart.substr(nz);
  if (intpart.empty()) intpart = "0";
  return sign + intpart + "." + fracpart;
}

std::string normalize_choice(std::string_view answer) {
  std::string s = strip_whitespace(answer);
  // Peel common decorations: "(A)", "A)", "A.", "A:".
  while (!s.empty() && (s.front() == '(' || s.front() == '[')) s.erase(0, 1);
  while (!s.empty() && (s.back() == ')' || s.back() == ']' || s.back() == '.' || s.back() == ':'))
    s.pop_back();
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string normalize_answer(std::string_view answer, TaskKind kind) {
  if (kind == TaskKind::choice) return normalize_choice(answer);

  std::string s = strip_whitespace(answer);
  s = strip_wrappers(std::move(s));
  s = fold_fracs(std::move(s));
  s = strip_wrappers(std::move(s));
  if (auto frac = canonical_fraction(s)) return *frac;
  if (auto integer = canonical_integer(s)) return *integer;
  return canonical_decimal(std::move(s));
}

GradeOutcome grade_detailed(const BenchItem& item, std::string_view predicted) {
  if (item.task_kind == TaskKind::code)
    throw UnsupportedTaskError("grade: code tasks need an execution sandbox");
  GradeOutcome out;
  const bool raw_equal = item.gold_answer == predicted;
  const bool norm_equal = normalize_answer(item.gold_answer, item.task_kind) ==
                          normalize_answer(predicted, item.task_kind);
  out.correct = norm_equal;
  out.normalization_applied = norm_equal && !raw_equal;
  return out;
}

bool grade(const BenchItem& item, std::string_view predicted) {
  return grade_detailed(item, predicted).correct;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

double avg_tokens_of(const std::vector<RunRecord>& records) {
  if (records.empty()) return 0.0;
  std::uint64_t total = 0;
  for (const auto& r : records) total += r.reasoning_tokens + r.conclusion_tokens;
  return static_cast<double>(total) / static_cast<double>(records.size());
}

}  // namespace

MetricsReport compute_metrics(const std::vector<RunRecord>& records,
                              const std::vector<BenchItem>& items,
                              const std::vector<RunRecord>* baseline) {
  std::unordered_map<std::string, const RunRecord*> by_id;
  for (const auto& r : records) by_id[r.question_id] = &r;

  std::string missing;
  for (const auto& item : items) {
    if (!by_id.count(item.id)) missing += missing.empty() ? item.id : ", " + item.id;
  }
  if (!missing.empty()) throw AlignmentError("records missing for ids: " + missing);
  if (baseline) {
    std::unordered_set<std::string> base_ids;
    for (const auto& r : *baseline) base_ids.insert(r.question_id);
    std::string base_missing;
    for (const auto& item : items)
      if (!base_ids.count(item.id))
        base_missing += base_missing.empty() ? item.id : ", " + item.id;
    if (!base_missing.empty())
      throw AlignmentError("baseline records missing for ids: " + base_missing);
  }

  MetricsReport report;
  report.n_items = static_cast<int>(items.size());

  int correct = 0, exited = 0, exited_correct = 0;
  std::uint64_t total_tokens = 0;
  for (const auto& item : items) {
    const RunRecord& rec = *by_id.at(item.id);
    ItemResult row;
    row.id = item.id;
    row.exited_early = rec.exited_early;
    row.tokens = rec.reasoning_tokens + rec.conclusion_tokens;
    total_tokens += row.tokens;

    std::string predicted = rec.final_answer.value_or("");
    if (predicted.empty()) {
      if (auto boxed = extract_boxed(rec.transcript)) predicted = *boxed;
    }
    row.predicted = predicted;
    if (item.task_kind != TaskKind::code && !predicted.empty()) {
      const GradeOutcome g = grade_detailed(item, predicted);
      row.correct = g.correct;
      row.normalization_applied = g.normalization_applied;
    }
    correct += row.correct ? 1 : 0;
    if (rec.exited_early) {
      ++exited;
      exited_correct += row.correct ? 1 : 0;
    }
    report.items.push_back(std::move(row));
  }

  const double n = static_cast<double>(items.size());
  report.accuracy = items.empty() ? 0.0 : static_cast<double>(correct) / n;
  report.avg_tokens = items.empty() ? 0.0 : static_cast<double>(total_tokens) / n;
  report.early_exit_rate = items.empty() ? 0.0 : static_cast<double>(exited) / n;
  report.early_exit_accuracy =
      exited == 0 ? 0.0 : static_cast<double>(exited_correct) / static_cast<double>(exited);
  if (baseline) {
    const double base_avg = avg_tokens_of(*baseline);
    if (base_avg > 0.0) report.compression_rate = report.avg_tokens / base_avg;
  }
  return report;
}

std::string format_metrics_table(const MetricsReport& report) {
  std::string cr = "--";
  if (report.compression_rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", *report.compression_rate * 100.0);
    cr = buf;
  }
  char line[160];
  std::snprintf(line, sizeof(line), "  %-7.1f %-9.1f %-9s %-9.1f %-9.1f %d\n",
                report.accuracy * 100.0, report.avg_tokens, cr.c_str(),
                report.early_exit_rate * 100.0, report.early_exit_accuracy * 100.0,
                report.n_items);
  std::string out = "  Acc     Tok       CR        ExitRate  ExitAcc   N\n";
  out += line;
  return out;
}

}  // namespace deer
