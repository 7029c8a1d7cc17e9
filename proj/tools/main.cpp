// thinkbrake: early-termination decoding experiments for tool-calling
// reasoning models. Subcommands: run, oracle, sweep, evaluate, record,
// report. Exit codes: 0 ok, 2 config error, 3 provider error,
// 4 evaluation error.

#include "thinkbrake/config.hpp"
#include "thinkbrake/recorder.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace thinkbrake;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProvider = 3;
constexpr int kExitEval = 4;

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& j : lines) out << j.dump() << "\n";
}

void write_report_files(const fs::path& dir, const RunReport& report) {
  write_text(dir / "report.md", render_report_markdown(report));
  write_text(dir / "report.json", json(report).dump(2) + "\n");
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg,
                       const RunOutputs& out) {
  fs::create_directories(dir);
  save_records((dir / "records.jsonl").string(), out.records);
  std::vector<json> transcripts;
  transcripts.reserve(out.transcripts.size());
  for (const auto& t : out.transcripts) transcripts.push_back(json(t));
  write_jsonl(dir / "transcripts.jsonl", transcripts);
  if (cfg.record_traces)
    save_scripted_traces((dir / "traces.jsonl").string(), out.traces);
  write_report_files(dir, out.report);
}

struct CommonFlags {
  std::string config_path;
  CliOverrides overrides;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags,
                      bool config_required = true) {
  auto* copt = cmd->add_option("--config", flags.config_path,
                               "Run configuration file (JSON)");
  if (config_required) copt->required();
  cmd->add_option("--method", flags.overrides.method,
                  "Termination method: base, thinkbrake, thinkbrake-prob, "
                  "nowait, thinkless, toolcall-confidence");
  cmd->add_option("--tau", flags.overrides.tau,
                  "Log-margin threshold for thinkbrake");
  cmd->add_option("--endpoint", flags.overrides.endpoint,
                  "Live endpoint base URL (switches provider to live)");
  cmd->add_option("--model", flags.overrides.model, "Live endpoint model name");
  cmd->add_option("--dataset", flags.overrides.dataset,
                  "Dataset manifest path");
  cmd->add_option("--trace", flags.overrides.trace_path,
                  "Scripted trace file (switches provider to scripted)");
  cmd->add_option("--output", flags.overrides.output_dir, "Output directory");
  cmd->add_option("--base-records", flags.overrides.base_records,
                  "Base-run records.jsonl for token-reduction metrics");
  cmd->add_flag("--record-traces", [&flags](int64_t) {
    flags.overrides.record_traces = true;
  }, "Record a replayable trace of this run");
  cmd->add_option("--concurrency", flags.overrides.concurrency,
                  "Concurrent trials");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = load_run_config(flags.config_path);
  apply_overrides(cfg, flags.overrides);
  return cfg;
}

int cmd_run(const CommonFlags& flags, bool force_record) {
  RunConfig cfg = resolve_config(flags);
  if (force_record) cfg.record_traces = true;
  if (cfg.policy.kind == PolicyKind::nowait) {
    NoWaitBias nw;
    run_policy_options(cfg, &nw);
    std::cerr << "nowait: suppressing " << nw.bias.entries.size()
              << " token ids";
    if (!nw.missing.empty()) {
      std::cerr << "; variants absent from vocab:";
      for (const auto& v : nw.missing) std::cerr << " '" << v << "'";
    }
    std::cerr << "\n";
  }
  auto trials = load_dataset(cfg.dataset_manifest, cfg.prompt_template);
  auto provider = make_provider(cfg);
  auto outputs = run_benchmark(cfg, trials, *provider);
  write_run_outputs(cfg.output_dir, cfg, outputs);
  std::cout << render_report_markdown(outputs.report);
  return kExitOk;
}

int cmd_oracle(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  auto trials = load_dataset(cfg.dataset_manifest, cfg.prompt_template);
  auto provider = make_provider(cfg);
  auto outputs = run_oracle(cfg, trials, *provider);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::vector<json> results;
  results.reserve(outputs.results.size());
  for (const auto& r : outputs.results) results.push_back(json(r));
  write_jsonl(dir / "oracle_results.jsonl", results);
  save_records((dir / "base_records.jsonl").string(), outputs.base_records);
  write_text(dir / "oracle.md", render_oracle_markdown(outputs.table));
  write_text(dir / "oracle.json", json(outputs.table).dump(2) + "\n");
  std::cout << render_oracle_markdown(outputs.table);
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::string& grid) {
  RunConfig cfg = resolve_config(flags);
  auto trials = load_dataset(cfg.dataset_manifest, cfg.prompt_template);
  auto provider = make_provider(cfg);
  auto sweep = sweep_threshold(cfg, trials, *provider, parse_tau_grid(grid));

  const fs::path dir = cfg.output_dir;
  write_text(dir / "sweep.md", render_sweep_markdown(sweep));
  write_text(dir / "sweep.json", json(sweep).dump(2) + "\n");
  std::cout << render_sweep_markdown(sweep);
  return kExitOk;
}

int cmd_evaluate(const std::string& records_path, const std::string& gt_path,
                 const std::string& base_path, const std::string& output_dir) {
  auto records = load_records(records_path);
  auto ground_truth = load_ground_truth_file(gt_path);
  SpecialTokens specials;
  auto rescored = rescore_records(records, ground_truth, specials);

  std::vector<TrialRecord> base;
  const std::vector<TrialRecord>* base_ptr = nullptr;
  if (!base_path.empty()) {
    base = load_records(base_path);
    base_ptr = &base;
  }
  const std::string method =
      rescored.empty() ? std::string("evaluate") : rescored.front().method;
  RunReport report = compute_metrics(rescored, base_ptr, method, base_path);

  const fs::path dir = output_dir;
  fs::create_directories(dir);
  save_records((dir / "records.jsonl").string(), rescored);
  write_report_files(dir, report);
  std::cout << render_report_markdown(report);
  return kExitOk;
}

int cmd_report(const std::string& records_path, const std::string& base_path,
               const std::string& output_dir) {
  auto records = load_records(records_path);
  std::vector<TrialRecord> base;
  const std::vector<TrialRecord>* base_ptr = nullptr;
  if (!base_path.empty()) {
    base = load_records(base_path);
    base_ptr = &base;
  }
  const std::string method =
      records.empty() ? std::string("report") : records.front().method;
  RunReport report = compute_metrics(records, base_ptr, method, base_path);
  write_report_files(output_dir, report);
  std::cout << render_report_markdown(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Early-termination decoding controller and tool-call benchmark "
      "harness"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run = app.add_subcommand(
      "run", "Run a termination method over a dataset and report metrics");
  add_common_flags(run, run_flags);

  CommonFlags oracle_flags;
  auto* oracle = app.add_subcommand(
      "oracle",
      "Inject </think> at every sentence boundary of base runs and measure "
      "recoverability");
  add_common_flags(oracle, oracle_flags);

  CommonFlags sweep_flags;
  std::string grid = "0,0.1,0.25,1.0,inf";
  auto* sweep = app.add_subcommand(
      "sweep", "Run thinkbrake across a tau grid and summarize the frontier");
  add_common_flags(sweep, sweep_flags);
  sweep->add_option("--grid", grid, "Comma-separated tau values ('inf' allowed)");

  std::string eval_records, eval_gt, eval_base, eval_output = "out";
  auto* evaluate = app.add_subcommand(
      "evaluate", "Re-score persisted records offline, no provider calls");
  evaluate->add_option("--records", eval_records, "records.jsonl from a run")
      ->required();
  evaluate
      ->add_option("--ground-truth", eval_gt,
                   "Possible-answer JSONL keyed by trial id")
      ->required();
  evaluate->add_option("--base", eval_base,
                       "Base records.jsonl for token-reduction metrics");
  evaluate->add_option("--output", eval_output, "Output directory");

  CommonFlags record_flags;
  auto* record = app.add_subcommand(
      "record", "Run with trace recording forced on (replayable output)");
  add_common_flags(record, record_flags);

  std::string report_records, report_base, report_output = "out";
  auto* report =
      app.add_subcommand("report", "Render a report from existing records");
  report->add_option("--records", report_records, "records.jsonl")->required();
  report->add_option("--base", report_base,
                     "Base records.jsonl for token-reduction metrics");
  report->add_option("--output", report_output, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags, /*force_record=*/false);
    if (oracle->parsed()) return cmd_oracle(oracle_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, grid);
    if (evaluate->parsed())
      return cmd_evaluate(eval_records, eval_gt, eval_base, eval_output);
    if (record->parsed()) return cmd_run(record_flags, /*force_record=*/true);
    if (report->parsed())
      return cmd_report(report_records, report_base, report_output);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GatewayError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kExitEval;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
