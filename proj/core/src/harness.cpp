#include "thinkbrake/harness.hpp"

#include "thinkbrake/http_provider.hpp"
#include "thinkbrake/recorder.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <thread>

namespace thinkbrake {

void RunConfig::validate() const {
  if (concurrency < 1)
    throw ConfigError("config: concurrency_limit must be >= 1");
  policy.validate();
  boundary.validate();
  specials.validate();
  if (provider.kind == ProviderConfig::Kind::scripted &&
      provider.trace_path.empty())
    throw ConfigError("config: scripted provider requires a trace path");
  if (provider.kind == ProviderConfig::Kind::live &&
      provider.live.base_url.empty())
    throw ConfigError("config: live provider requires an endpoint URL");
  if (policy.kind == PolicyKind::nowait &&
      provider.kind == ProviderConfig::Kind::live &&
      !provider.live.supports_logit_bias)
    throw ConfigError(
        "nowait needs logit bias, but the endpoint is configured without "
        "logit-bias support");
}

std::string RunConfig::label() const {
  return run_label.empty() ? to_string(policy.kind) : run_label;
}

std::shared_ptr<Provider> make_provider(const RunConfig& cfg) {
  if (cfg.provider.kind == ProviderConfig::Kind::scripted)
    return load_scripted(cfg.provider.trace_path);
  LiveEndpointConfig live;
  live.base_url = cfg.provider.live.base_url;
  live.completions_path = cfg.provider.live.completions_path;
  live.model = cfg.provider.live.model;
  if (const char* key = std::getenv(cfg.provider.live.api_key_env.c_str()))
    live.api_key = key;
  live.timeout_s = cfg.provider.live.timeout_s;
  live.retries = cfg.provider.live.retries;
  live.retry_backoff_ms = cfg.provider.live.retry_backoff_ms;
  live.supports_logit_bias = cfg.provider.live.supports_logit_bias;
  live.use_streaming = cfg.provider.live.use_streaming;
  live.vocab = cfg.vocab;
  return std::make_shared<HttpProvider>(std::move(live));
}

RunPolicyOptions run_policy_options(const RunConfig& cfg,
                                    NoWaitBias* diagnostics) {
  RunPolicyOptions opt;
  opt.boundary = cfg.boundary;
  opt.specials = cfg.specials;
  opt.separator = cfg.separator;
  opt.max_total_tokens = cfg.max_total_tokens;
  opt.max_answer_tokens = cfg.max_answer_tokens;
  opt.top_logprobs = cfg.top_logprobs;
  opt.stop_sequences = cfg.stop_sequences;
  if (cfg.policy.kind == PolicyKind::nowait) {
    if (cfg.vocab.empty())
      throw ConfigError("nowait requires a vocabulary map in the config");
    NoWaitBias nw = nowait_bias(cfg.policy.keywords, cfg.vocab,
                                cfg.policy.suppression_bias);
    opt.bias = nw.bias;
    if (diagnostics) *diagnostics = std::move(nw);
  }
  return opt;
}

namespace {

template <typename Fn>
void parallel_for(size_t n, int concurrency, Fn&& fn) {
  if (n == 0) return;
  const int workers =
      std::max(1, std::min<int>(concurrency, static_cast<int>(n)));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

RunOutputs run_benchmark(const RunConfig& cfg, const std::vector<Trial>& trials,
                         Provider& provider) {
  cfg.validate();
  const RunPolicyOptions opt = run_policy_options(cfg);
  const std::string method = cfg.label();

  std::shared_ptr<RecordingProvider> recorder;
  Provider* gw = &provider;
  if (cfg.record_traces) {
    recorder = std::make_shared<RecordingProvider>(
        std::shared_ptr<Provider>(&provider, [](Provider*) {}));
    gw = recorder.get();
  }

  std::vector<TrialRecord> records(trials.size());
  std::vector<DecodeTranscript> transcripts(trials.size());

  parallel_for(trials.size(), cfg.concurrency, [&](size_t i) {
    const Trial& trial = trials[i];
    TrialRecord rec;
    rec.trial_id = trial.id;
    rec.category = trial.category;
    rec.split = trial.split;
    rec.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto result = run_policy(trial, cfg.policy, *gw, opt);
      transcripts[i] = result.transcript;
      rec.thinking_tokens = count_thinking_tokens(result.transcript);
      rec.answer_text = result.transcript.answer_text;
      rec.warnings = result.transcript.warnings;
    } catch (const std::exception& e) {
      rec.error = std::string(e.what()) + " [trial " + trial.id + "]";
      transcripts[i].trial_id = trial.id;
    }
    auto parsed = parse_tool_calls(rec.answer_text, cfg.specials);
    Verdict verdict = evaluate_trial(parsed, trial.ground_truth, trial.category);
    rec.correct = verdict.correct && !rec.error;
    rec.reason = verdict.reason;
    rec.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    records[i] = std::move(rec);
  });

  auto by_id = [](const auto& a, const auto& b) { return a.trial_id < b.trial_id; };
  std::sort(records.begin(), records.end(), by_id);
  std::sort(transcripts.begin(), transcripts.end(), by_id);

  RunOutputs out;
  out.records = std::move(records);
  out.transcripts = std::move(transcripts);
  if (recorder) out.traces = recorder->traces();

  std::vector<TrialRecord> base;
  const std::vector<TrialRecord>* base_ptr = nullptr;
  std::string base_label;
  if (cfg.base_records_path) {
    base = load_records(*cfg.base_records_path);
    base_ptr = &base;
    base_label = *cfg.base_records_path;
  }
  out.report = compute_metrics(out.records, base_ptr, method, base_label);
  return out;
}

RunReport compute_metrics(const std::vector<TrialRecord>& records,
                          const std::vector<TrialRecord>* base_records,
                          const std::string& method,
                          const std::string& base_label) {
  if (base_records) {
    std::set<std::string> ours, theirs;
    for (const auto& r : records) ours.insert(r.trial_id);
    for (const auto& r : *base_records) theirs.insert(r.trial_id);
    if (ours != theirs) {
      std::string diff;
      for (const auto& id : ours)
        if (!theirs.count(id)) diff += " +" + id;
      for (const auto& id : theirs)
        if (!ours.count(id)) diff += " -" + id;
      throw EvalError(
          "record sets differ between run and base (+only in run, -only in "
          "base):" +
          diff);
    }
  }

  struct Acc {
    int trials = 0;
    int correct = 0;
    double tokens = 0.0;
    double base_tokens = 0.0;
  };
  std::map<Category, Acc> per_cat;
  Acc total;

  // Fold in trial-id order so the means are identical for any input order.
  std::vector<const TrialRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const TrialRecord* a, const TrialRecord* b) {
              return a->trial_id < b->trial_id;
            });

  std::map<std::string, const TrialRecord*> base_by_id;
  if (base_records)
    for (const auto& r : *base_records) base_by_id[r.trial_id] = &r;

  for (const TrialRecord* r : sorted) {
    double base_tokens = 0.0;
    if (base_records)
      base_tokens =
          static_cast<double>(base_by_id.at(r->trial_id)->thinking_tokens);
    for (Acc* acc : {&per_cat[r->category], &total}) {
      ++acc->trials;
      acc->correct += r->correct ? 1 : 0;
      acc->tokens += static_cast<double>(r->thinking_tokens);
      acc->base_tokens += base_tokens;
    }
  }

  auto to_metrics = [&](const Acc& a) {
    CategoryMetrics m;
    m.trials = a.trials;
    if (a.trials == 0) return m;
    m.accuracy_pct = 100.0 * a.correct / a.trials;
    m.mean_thinking_tokens = a.tokens / a.trials;
    if (base_records) {
      const double mean_base = a.base_tokens / a.trials;
      if (mean_base > 0.0)
        m.delta_tok_pct =
            100.0 * (m.mean_thinking_tokens - mean_base) / mean_base;
    }
    return m;
  };

  RunReport report;
  report.method = method;
  if (base_records)
    report.base_label = base_label.empty() ? "base" : base_label;
  for (Category c : kAllCategories) {
    auto it = per_cat.find(c);
    if (it != per_cat.end())
      report.per_category.emplace_back(c, to_metrics(it->second));
  }
  report.average = to_metrics(total);
  return report;
}

SweepReport sweep_threshold(const RunConfig& cfg,
                            const std::vector<Trial>& trials,
                            Provider& provider,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("sweep: empty tau grid");
  SweepReport sweep;
  for (double tau : grid) {
    RunConfig point = cfg;
    point.policy.kind = PolicyKind::thinkbrake;
    point.policy.tau_threshold = tau;
    point.record_traces = false;
    point.run_label = "thinkbrake";
    auto outputs = run_benchmark(point, trials, provider);
    SweepPoint p;
    p.tau = tau;
    p.report = std::move(outputs.report);
    sweep.points.push_back(std::move(p));
  }
  // Pareto frontier: maximize accuracy, minimize mean thinking tokens.
  for (auto& p : sweep.points) {
    p.pareto = true;
    for (const auto& q : sweep.points) {
      const bool better_or_equal =
          q.report.average.accuracy_pct >= p.report.average.accuracy_pct &&
          q.report.average.mean_thinking_tokens <=
              p.report.average.mean_thinking_tokens;
      const bool strictly_better =
          q.report.average.accuracy_pct > p.report.average.accuracy_pct ||
          q.report.average.mean_thinking_tokens <
              p.report.average.mean_thinking_tokens;
      if (better_or_equal && strictly_better) {
        p.pareto = false;
        break;
      }
    }
  }
  return sweep;
}

OracleRunOutputs run_oracle(const RunConfig& cfg,
                            const std::vector<Trial>& trials,
                            Provider& provider) {
  RunConfig base_cfg = cfg;
  base_cfg.policy.kind = PolicyKind::base;
  base_cfg.run_label = "base";
  base_cfg.base_records_path.reset();
  auto base_run = run_benchmark(base_cfg, trials, provider);

  std::map<std::string, const TrialRecord*> record_by_id;
  for (const auto& r : base_run.records) record_by_id[r.trial_id] = &r;
  std::map<std::string, const DecodeTranscript*> transcript_by_id;
  for (const auto& t : base_run.transcripts) transcript_by_id[t.trial_id] = &t;

  OracleRolloutOptions opt;
  opt.boundary = cfg.boundary;
  opt.specials = cfg.specials;
  opt.separator = cfg.separator;
  opt.max_answer_tokens = cfg.max_answer_tokens;
  opt.top_logprobs = cfg.top_logprobs;
  opt.stop_sequences = cfg.stop_sequences;
  opt.accounting = cfg.oracle_accounting;

  std::vector<OracleResult> results(trials.size());
  parallel_for(trials.size(), cfg.concurrency, [&](size_t i) {
    const Trial& trial = trials[i];
    results[i] = oracle_rollout(trial, *transcript_by_id.at(trial.id),
                                record_by_id.at(trial.id)->correct, provider,
                                opt);
  });
  std::sort(results.begin(), results.end(),
            [](const OracleResult& a, const OracleResult& b) {
              return a.trial_id < b.trial_id;
            });

  OracleRunOutputs out;
  out.table = aggregate_oracle(results, base_run.records);
  out.results = std::move(results);
  out.base_records = std::move(base_run.records);
  return out;
}

std::vector<TrialRecord> rescore_records(
    const std::vector<TrialRecord>& records,
    const std::map<std::string, GroundTruthSpec>& ground_truth,
    const SpecialTokens& specials) {
  std::vector<TrialRecord> out = records;
  for (auto& rec : out) {
    auto it = ground_truth.find(rec.trial_id);
    if (it == ground_truth.end())
      throw EvalError("no ground truth for recorded trial " + rec.trial_id);
    auto parsed = parse_tool_calls(rec.answer_text, specials);
    Verdict v = evaluate_trial(parsed, it->second, rec.category);
    rec.correct = v.correct && !rec.error;
    rec.reason = v.reason;
  }
  std::sort(out.begin(), out.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              return a.trial_id < b.trial_id;
            });
  return out;
}

}  // namespace thinkbrake
