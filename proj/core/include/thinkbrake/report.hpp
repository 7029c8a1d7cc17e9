#pragma once

// Accuracy / token-reduction report structures and their deterministic
// Markdown + JSON renderings.

#include "thinkbrake/toolcall.hpp"
#include "thinkbrake/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thinkbrake {

/// Per-trial outcome row persisted to records.jsonl.
struct TrialRecord {
  std::string trial_id;
  Category category = Category::simple;
  Split split = Split::non_live;
  std::string method;
  bool correct = false;
  VerdictReason reason = VerdictReason::ok;
  int64_t thinking_tokens = 0;
  double wall_time_ms = 0.0;
  std::string answer_text;
  std::vector<std::string> warnings;
  std::optional<std::string> error;  // infra failure, if any

  bool operator==(const TrialRecord&) const = default;
};

struct CategoryMetrics {
  int trials = 0;
  double accuracy_pct = 0.0;
  double mean_thinking_tokens = 0.0;
  std::optional<double> delta_tok_pct;  // vs a named base run

  bool operator==(const CategoryMetrics&) const = default;
};

struct RunReport {
  std::string method;
  std::optional<std::string> base_label;
  std::vector<std::pair<Category, CategoryMetrics>> per_category;  // sorted
  CategoryMetrics average;  // pooled over all trials

  const CategoryMetrics* category(Category c) const;

  bool operator==(const RunReport&) const = default;
};

void to_json(json& j, const TrialRecord& r);
void from_json(const json& j, TrialRecord& r);
void to_json(json& j, const RunReport& r);
void from_json(const json& j, RunReport& r);

std::string render_report_markdown(const RunReport& report);

std::vector<TrialRecord> load_records(const std::string& path);
void save_records(const std::string& path,
                  const std::vector<TrialRecord>& records);

struct SweepPoint {
  double tau = 0.0;
  RunReport report;
  bool pareto = false;  // on the accuracy-vs-tokens frontier

  bool operator==(const SweepPoint&) const = default;
};

struct SweepReport {
  std::vector<SweepPoint> points;  // in grid order
};

void to_json(json& j, const SweepReport& r);
std::string render_sweep_markdown(const SweepReport& r);

/// Oracle table in the shape of the early-stop analysis: a base row and an
/// oracle row with per-category accuracy and token reduction.
struct OracleTableRow {
  int trials = 0;
  double base_accuracy_pct = 0.0;
  double oracle_accuracy_pct = 0.0;
  double base_mean_tokens = 0.0;
  double oracle_mean_tokens = 0.0;
  std::optional<double> delta_tok_pct;

  bool operator==(const OracleTableRow&) const = default;
};

struct OracleTable {
  std::vector<std::pair<Category, OracleTableRow>> per_category;
  OracleTableRow average;

  bool operator==(const OracleTable&) const = default;
};

void to_json(json& j, const OracleTable& t);
std::string render_oracle_markdown(const OracleTable& t);

}  // namespace thinkbrake
