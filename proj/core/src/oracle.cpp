#include "thinkbrake/oracle.hpp"

#include "thinkbrake/toolcall.hpp"

#include <algorithm>
#include <map>

namespace thinkbrake {

std::vector<BoundaryPoint> enumerate_boundaries(const Trial& trial,
                                                const DecodeTranscript& base,
                                                const BoundaryConfig& cfg) {
  std::vector<BoundaryPoint> out;
  if (!base.thinking_open_pos) return out;
  const int64_t open = *base.thinking_open_pos;
  const int64_t close = base.thinking_close_pos
                            ? *base.thinking_close_pos
                            : static_cast<int64_t>(base.events.size());

  // Text of everything up to and including the open marker, then the
  // thinking tokens with their cumulative text offsets.
  std::string pre_text;
  std::string thinking_text;
  std::vector<size_t> token_end;  // offset in thinking_text after each token
  for (const auto& e : base.events) {
    if (e.position <= open) {
      pre_text += e.emitted.token_text;
    } else if (e.position < close) {
      thinking_text += e.emitted.token_text;
      token_end.push_back(thinking_text.size());
    }
  }

  const auto offsets = scan_boundaries(thinking_text, cfg);
  for (size_t i = 0; i < offsets.size(); ++i) {
    BoundaryPoint bp;
    bp.boundary_index = static_cast<int>(i) + 1;
    bp.prefix_text =
        trial.prompt + pre_text + thinking_text.substr(0, offsets[i] + 1);
    const auto it =
        std::upper_bound(token_end.begin(), token_end.end(), offsets[i]);
    bp.thinking_tokens =
        static_cast<int64_t>(std::distance(token_end.begin(), it)) + 1;
    out.push_back(std::move(bp));
  }
  return out;
}

void to_json(json& j, const OracleResult& r) {
  json verdicts = json::array();
  for (const auto& v : r.boundary_verdicts)
    verdicts.push_back(json{{"boundary_index", v.boundary_index},
                            {"thinking_tokens", v.thinking_tokens},
                            {"correct", v.correct},
                            {"known", v.known}});
  j = json{{"trial_id", r.trial_id},
           {"category", to_string(r.category)},
           {"base_correct", r.base_correct},
           {"boundary_verdicts", std::move(verdicts)},
           {"recoverable", r.recoverable},
           {"partial", r.partial}};
  j["oracle_thinking_tokens"] =
      r.oracle_thinking_tokens ? json(*r.oracle_thinking_tokens) : json(nullptr);
}

void from_json(const json& j, OracleResult& r) {
  j.at("trial_id").get_to(r.trial_id);
  auto cat = category_from_string(j.at("category").get<std::string>());
  if (!cat) throw std::runtime_error("oracle result: unknown category");
  r.category = *cat;
  j.at("base_correct").get_to(r.base_correct);
  r.boundary_verdicts.clear();
  for (const auto& vj : j.at("boundary_verdicts")) {
    BoundaryVerdict v;
    vj.at("boundary_index").get_to(v.boundary_index);
    vj.at("thinking_tokens").get_to(v.thinking_tokens);
    vj.at("correct").get_to(v.correct);
    v.known = vj.value("known", true);
    r.boundary_verdicts.push_back(v);
  }
  j.at("recoverable").get_to(r.recoverable);
  r.partial = j.value("partial", false);
  r.oracle_thinking_tokens.reset();
  if (!j.at("oracle_thinking_tokens").is_null())
    r.oracle_thinking_tokens = j["oracle_thinking_tokens"].get<int64_t>();
}

OracleResult oracle_rollout(const Trial& trial, const DecodeTranscript& base,
                            bool base_correct, Provider& gateway,
                            const OracleRolloutOptions& opt) {
  OracleResult res;
  res.trial_id = trial.id;
  res.category = trial.category;
  res.base_correct = base_correct;

  const auto points = enumerate_boundaries(trial, base, opt.boundary);
  for (const auto& bp : points) {
    BoundaryVerdict v;
    v.boundary_index = bp.boundary_index;
    v.thinking_tokens = bp.thinking_tokens;
    GenerationRequest req;
    req.prefix_text = bp.prefix_text;
    req.max_tokens = opt.max_answer_tokens;
    req.top_logprobs = opt.top_logprobs;
    req.stop_sequences = opt.stop_sequences;
    req.stream = false;
    req.trial_hint = trial.id;
    try {
      auto events = gateway.continue_from(
          bp.prefix_text, opt.specials.think_close.text + opt.separator, req);
      const std::string answer = concat_token_text(events);
      auto parsed = parse_tool_calls(answer, opt.specials);
      v.correct =
          evaluate_trial(parsed, trial.ground_truth, trial.category).correct;
    } catch (const GatewayError&) {
      v.known = false;
      res.partial = true;
    }
    res.boundary_verdicts.push_back(v);
  }

  std::optional<int64_t> earliest, latest;
  for (const auto& v : res.boundary_verdicts) {
    if (!v.known || !v.correct) continue;
    if (!earliest || v.thinking_tokens < *earliest)
      earliest = v.thinking_tokens;
    if (!latest || v.thinking_tokens > *latest) latest = v.thinking_tokens;
  }
  res.recoverable = base_correct || earliest.has_value();
  if (earliest)
    res.oracle_thinking_tokens =
        opt.accounting == OracleAccounting::earliest ? earliest : latest;
  else if (base_correct)
    res.oracle_thinking_tokens = count_thinking_tokens(base);
  return res;
}

OracleTable aggregate_oracle(const std::vector<OracleResult>& results,
                             const std::vector<TrialRecord>& base_records) {
  std::map<std::string, const TrialRecord*> base_by_id;
  for (const auto& r : base_records) base_by_id[r.trial_id] = &r;

  struct Acc {
    int trials = 0;
    int base_correct = 0;
    int recoverable = 0;
    double base_tokens = 0.0;
    double oracle_tokens = 0.0;
  };
  std::map<Category, Acc> per_cat;
  Acc total;

  // Canonical order for exact reproducibility of the means.
  std::vector<const OracleResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const OracleResult* a, const OracleResult* b) {
              return a->trial_id < b->trial_id;
            });

  for (const OracleResult* r : sorted) {
    auto base_it = base_by_id.find(r->trial_id);
    if (base_it == base_by_id.end())
      throw std::runtime_error("oracle aggregate: no base record for trial " +
                               r->trial_id);
    const double base_tokens =
        static_cast<double>(base_it->second->thinking_tokens);
    const double oracle_tokens =
        r->oracle_thinking_tokens
            ? static_cast<double>(*r->oracle_thinking_tokens)
            : base_tokens;
    for (Acc* acc : {&per_cat[r->category], &total}) {
      ++acc->trials;
      acc->base_correct += r->base_correct ? 1 : 0;
      acc->recoverable += r->recoverable ? 1 : 0;
      acc->base_tokens += base_tokens;
      acc->oracle_tokens += oracle_tokens;
    }
  }

  auto to_row = [](const Acc& a) {
    OracleTableRow row;
    row.trials = a.trials;
    if (a.trials == 0) return row;
    row.base_accuracy_pct = 100.0 * a.base_correct / a.trials;
    row.oracle_accuracy_pct = 100.0 * a.recoverable / a.trials;
    row.base_mean_tokens = a.base_tokens / a.trials;
    row.oracle_mean_tokens = a.oracle_tokens / a.trials;
    if (row.base_mean_tokens > 0.0)
      row.delta_tok_pct = 100.0 *
                          (row.oracle_mean_tokens - row.base_mean_tokens) /
                          row.base_mean_tokens;
    return row;
  };

  OracleTable table;
  for (Category c : kAllCategories) {
    auto it = per_cat.find(c);
    if (it != per_cat.end()) table.per_category.emplace_back(c, to_row(it->second));
  }
  table.average = to_row(total);
  return table;
}

}  // namespace thinkbrake
