#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deer/controller.hpp"

namespace deer {

enum class TaskKind { math, choice, code };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view name);

/// One benchmark question.
struct BenchItem {
  std::string id;
  std::string question;
  std::string gold_answer;  // non-empty for math/choice
  TaskKind task_kind = TaskKind::math;
};

/// Load a line-delimited dataset of {id, question, answer, task} records.
/// Throws ConfigError on schema problems or duplicate ids.
std::vector<BenchItem> load_dataset(const std::filesystem::path& path);
std::vector<BenchItem> parse_dataset(std::string_view jsonl_contents);

/**
 * Canonical form used for rule-based answer equality: whitespace and LaTeX
 * wrappers stripped, \frac{a}{b} folded to a/b, integer fractions reduced,
 * leading zeros dropped, choice letters case-folded. A documented
 * approximation of mathematical equivalence, pinned by the normalization
 * test table.
 */
std::string normalize_answer(std::string_view answer, TaskKind kind);

struct GradeOutcome {
  bool correct = false;
  /// True when the raw strings differed and normalization made them match.
  bool normalization_applied = false;
};

/// Grade a prediction against the gold answer. Symmetric under the supported
/// normal forms. Throws UnsupportedTaskError for code items (no sandbox).
GradeOutcome grade_detailed(const BenchItem& item, std::string_view predicted);
bool grade(const BenchItem& item, std::string_view predicted);

/// Per-item row in a metrics report.
struct ItemResult {
  std::string id;
  bool correct = false;
  bool normalization_applied = false;
  bool exited_early = false;
  std::uint64_t tokens = 0;  // reasoning + conclusion
  std::string predicted;
};

/// Aggregate metrics over one run, optionally against a baseline run.
struct MetricsReport {
  double accuracy = 0.0;
  double avg_tokens = 0.0;
  std::optional<double> compression_rate;  // avg_tokens / baseline avg_tokens
  int n_items = 0;
  double early_exit_rate = 0.0;
  double early_exit_accuracy = 0.0;  // accuracy over exited items; 0 when none
  std::vector<ItemResult> items;
};

/**
 * Compute accuracy / average tokens / compression rate over run records
 * aligned 1-1 with dataset items by id. The baseline, when given, must cover
 * the same ids. Aggregation is a deterministic fold over the dataset order,
 * so record order never matters. Throws AlignmentError listing missing ids.
 */
MetricsReport compute_metrics(const std::vector<RunRecord>& records,
                              const std::vector<BenchItem>& items,
                              const std::vector<RunRecord>* baseline = nullptr);

/// Aligned text table with Acc / Tok / CR columns plus early-exit columns.
std::string format_metrics_table(const MetricsReport& report);

}  // namespace deer
