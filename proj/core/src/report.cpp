#include "thinkbrake/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace thinkbrake {

namespace {

// Fixed one-decimal formatting; normalizes negative zero.
std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  std::string s = buf;
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string fmt_acc(const CategoryMetrics& m) {
  return m.trials == 0 ? "--" : fmt1(m.accuracy_pct);
}

std::string fmt_delta(const CategoryMetrics& m) {
  if (m.trials == 0 || !m.delta_tok_pct) return "--";
  return fmt1(*m.delta_tok_pct) + "%";
}

}  // namespace

const CategoryMetrics* RunReport::category(Category c) const {
  for (const auto& [cat, m] : per_category)
    if (cat == c) return &m;
  return nullptr;
}

void to_json(json& j, const TrialRecord& r) {
  j = json{{"trial_id", r.trial_id},
           {"category", to_string(r.category)},
           {"split", to_string(r.split)},
           {"method", r.method},
           {"correct", r.correct},
           {"reason", to_string(r.reason)},
           {"thinking_tokens", r.thinking_tokens},
           {"wall_time_ms", r.wall_time_ms},
           {"answer_text", r.answer_text},
           {"warnings", r.warnings}};
  j["error"] = r.error ? json(*r.error) : json(nullptr);
}

void from_json(const json& j, TrialRecord& r) {
  j.at("trial_id").get_to(r.trial_id);
  auto cat = category_from_string(j.at("category").get<std::string>());
  if (!cat) throw std::runtime_error("record: unknown category");
  r.category = *cat;
  auto split = split_from_string(j.at("split").get<std::string>());
  if (!split) throw std::runtime_error("record: unknown split");
  r.split = *split;
  r.method = j.value("method", "");
  j.at("correct").get_to(r.correct);
  auto reason = verdict_reason_from_string(j.at("reason").get<std::string>());
  if (!reason) throw std::runtime_error("record: unknown verdict reason");
  r.reason = *reason;
  j.at("thinking_tokens").get_to(r.thinking_tokens);
  r.wall_time_ms = j.value("wall_time_ms", 0.0);
  r.answer_text = j.value("answer_text", "");
  r.warnings = j.value("warnings", std::vector<std::string>{});
  r.error.reset();
  if (j.contains("error") && !j["error"].is_null())
    r.error = j["error"].get<std::string>();
}

namespace {

void metrics_to_json(json& j, const CategoryMetrics& m) {
  j = json{{"trials", m.trials},
           {"accuracy_pct", m.accuracy_pct},
           {"mean_thinking_tokens", m.mean_thinking_tokens}};
  j["delta_tok_pct"] = m.delta_tok_pct ? json(*m.delta_tok_pct) : json(nullptr);
}

CategoryMetrics metrics_from_json(const json& j) {
  CategoryMetrics m;
  j.at("trials").get_to(m.trials);
  j.at("accuracy_pct").get_to(m.accuracy_pct);
  j.at("mean_thinking_tokens").get_to(m.mean_thinking_tokens);
  if (!j.at("delta_tok_pct").is_null())
    m.delta_tok_pct = j["delta_tok_pct"].get<double>();
  return m;
}

}  // namespace

void to_json(json& j, const RunReport& r) {
  j = json{{"method", r.method}};
  j["base"] = r.base_label ? json(*r.base_label) : json(nullptr);
  json cats = json::object();
  for (const auto& [cat, m] : r.per_category) {
    json mj;
    metrics_to_json(mj, m);
    cats[to_string(cat)] = std::move(mj);
  }
  j["categories"] = std::move(cats);
  json avg;
  metrics_to_json(avg, r.average);
  j["average"] = std::move(avg);
}

void from_json(const json& j, RunReport& r) {
  j.at("method").get_to(r.method);
  r.base_label.reset();
  if (!j.at("base").is_null()) r.base_label = j["base"].get<std::string>();
  r.per_category.clear();
  for (Category c : kAllCategories) {
    const char* name = to_string(c);
    if (j.at("categories").contains(name))
      r.per_category.emplace_back(c,
                                  metrics_from_json(j["categories"][name]));
  }
  r.average = metrics_from_json(j.at("average"));
}

std::string render_report_markdown(const RunReport& report) {
  std::string md = "# Run report: " + report.method + "\n\n";
  if (report.base_label)
    md += "Token reduction (ΔTok) is measured against base run `" +
          *report.base_label + "`.\n\n";

  std::string header = "| Method |";
  std::string rule = "|---|";
  for (Category c : kAllCategories) {
    header += std::string(" ") + to_string(c) + " Acc | " + to_string(c) +
              " ΔTok |";
    rule += "---|---|";
  }
  header += " Avg Acc | Avg ΔTok |";
  rule += "---|---|";

  CategoryMetrics empty;
  std::string row = "| " + report.method + " |";
  for (Category c : kAllCategories) {
    const CategoryMetrics* m = report.category(c);
    if (!m) m = &empty;
    row += " " + fmt_acc(*m) + " | " + fmt_delta(*m) + " |";
  }
  row += " " + fmt_acc(report.average) + " | " + fmt_delta(report.average) +
         " |";

  md += header + "\n" + rule + "\n" + row + "\n\n";

  md += "| Category | Trials | Mean thinking tokens |\n|---|---|---|\n";
  for (Category c : kAllCategories) {
    const CategoryMetrics* m = report.category(c);
    md += std::string("| ") + to_string(c) + " | " +
          std::to_string(m ? m->trials : 0) + " | " +
          (m && m->trials > 0 ? fmt1(m->mean_thinking_tokens) : "--") + " |\n";
  }
  md += "| average | " + std::to_string(report.average.trials) + " | " +
        (report.average.trials > 0 ? fmt1(report.average.mean_thinking_tokens)
                                   : "--") +
        " |\n";
  return md;
}

std::vector<TrialRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  std::vector<TrialRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": invalid JSON");
    try {
      out.push_back(j.get<TrialRecord>());
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return out;
}

void save_records(const std::string& path,
                  const std::vector<TrialRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write records file: " + path);
  for (const auto& r : records) out << json(r).dump() << "\n";
}

void to_json(json& j, const SweepReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json pj{{"tau", std::isinf(p.tau) ? json("inf") : json(p.tau)},
            {"pareto", p.pareto}};
    json rep;
    to_json(rep, p.report);
    pj["report"] = std::move(rep);
    points.push_back(std::move(pj));
  }
  j = json{{"points", std::move(points)}};
}

std::string render_sweep_markdown(const SweepReport& r) {
  std::string md =
      "# Threshold sweep\n\n"
      "| tau | Avg Acc | Avg mean thinking tokens | Avg ΔTok | Pareto |\n"
      "|---|---|---|---|---|\n";
  for (const auto& p : r.points) {
    std::string tau =
        std::isinf(p.tau) ? std::string("inf") : fmt1(p.tau);
    md += "| " + tau + " | " + fmt_acc(p.report.average) + " | " +
          (p.report.average.trials > 0
               ? fmt1(p.report.average.mean_thinking_tokens)
               : "--") +
          " | " + fmt_delta(p.report.average) + " | " +
          (p.pareto ? "yes" : "no") + " |\n";
  }
  return md;
}

namespace {

void oracle_row_to_json(json& j, const OracleTableRow& r) {
  j = json{{"trials", r.trials},
           {"base_accuracy_pct", r.base_accuracy_pct},
           {"oracle_accuracy_pct", r.oracle_accuracy_pct},
           {"base_mean_tokens", r.base_mean_tokens},
           {"oracle_mean_tokens", r.oracle_mean_tokens}};
  j["delta_tok_pct"] = r.delta_tok_pct ? json(*r.delta_tok_pct) : json(nullptr);
}

std::string fmt_oracle_delta(const OracleTableRow& r) {
  if (r.trials == 0 || !r.delta_tok_pct) return "--";
  return fmt1(*r.delta_tok_pct) + "%";
}

}  // namespace

void to_json(json& j, const OracleTable& t) {
  json cats = json::object();
  for (const auto& [cat, row] : t.per_category) {
    json rj;
    oracle_row_to_json(rj, row);
    cats[to_string(cat)] = std::move(rj);
  }
  json avg;
  oracle_row_to_json(avg, t.average);
  j = json{{"categories", std::move(cats)}, {"average", std::move(avg)}};
}

std::string render_oracle_markdown(const OracleTable& t) {
  auto row_for = [&](Category c) -> const OracleTableRow* {
    for (const auto& [cat, row] : t.per_category)
      if (cat == c) return &row;
    return nullptr;
  };
  OracleTableRow empty;

  std::string md = "# Oracle early-stop analysis\n\n| Method |";
  std::string rule = "|---|";
  for (Category c : kAllCategories) {
    md += std::string(" ") + to_string(c) + " Acc | " + to_string(c) +
          " ΔTok |";
    rule += "---|---|";
  }
  md += " Avg Acc | Avg ΔTok |";
  rule += "---|---|";
  md += "\n" + rule + "\n";

  std::string base_row = "| base |";
  std::string oracle_row = "| oracle |";
  for (Category c : kAllCategories) {
    const OracleTableRow* r = row_for(c);
    if (!r) r = &empty;
    base_row += " " + (r->trials ? fmt1(r->base_accuracy_pct) : "--") +
                " | -- |";
    oracle_row += " " + (r->trials ? fmt1(r->oracle_accuracy_pct) : "--") +
                  " | " + fmt_oracle_delta(*r) + " |";
  }
  base_row += " " + (t.average.trials ? fmt1(t.average.base_accuracy_pct)
                                      : "--") +
              " | -- |";
  oracle_row += " " + (t.average.trials ? fmt1(t.average.oracle_accuracy_pct)
                                        : "--") +
                " | " + fmt_oracle_delta(t.average) + " |";
  md += base_row + "\n" + oracle_row + "\n\n";

  md += "| Category | Trials | Base mean thinking tokens | Oracle mean "
        "thinking tokens |\n|---|---|---|---|\n";
  for (Category c : kAllCategories) {
    const OracleTableRow* r = row_for(c);
    md += std::string("| ") + to_string(c) + " | " +
          std::to_string(r ? r->trials : 0) + " | " +
          (r && r->trials ? fmt1(r->base_mean_tokens) : "--") + " | " +
          (r && r->trials ? fmt1(r->oracle_mean_tokens) : "--") + " |\n";
  }
  md += "| average | " + std::to_string(t.average.trials) + " | " +
        (t.average.trials ? fmt1(t.average.base_mean_tokens) : "--") + " | " +
        (t.average.trials ? fmt1(t.average.oracle_mean_tokens) : "--") +
        " |\n";
  return md;
}

}  // namespace thinkbrake
