#pragma once

// Experiment orchestration: runs a policy over a dataset under a concurrency
// limit, evaluates every answer, and computes accuracy / token-reduction
// metrics in the shape of the benchmark tables.

#include "thinkbrake/dataset.hpp"
#include "thinkbrake/oracle.hpp"
#include "thinkbrake/policy.hpp"
#include "thinkbrake/report.hpp"
#include "thinkbrake/scripted.hpp"

#include <memory>
#include <string>
#include <vector>

namespace thinkbrake {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProviderConfig {
  enum class Kind { scripted, live };
  Kind kind = Kind::scripted;
  std::string trace_path;  // scripted
  struct LiveSettings {    // live; mirrors LiveEndpointConfig
    std::string base_url;
    std::string completions_path = "/v1/completions";
    std::string model;
    std::string api_key_env = "THINKBRAKE_API_KEY";
    int timeout_s = 120;
    int retries = 3;
    int retry_backoff_ms = 500;
    bool supports_logit_bias = true;
    bool use_streaming = true;
  } live;
};

struct RunConfig {
  std::string dataset_manifest;
  ProviderConfig provider;
  PolicyConfig policy;
  BoundaryConfig boundary;
  SpecialTokens specials;
  std::string separator = "\n\n";
  int concurrency = 1;
  std::string output_dir = "out";
  bool record_traces = false;
  std::optional<std::string> base_records_path;
  int max_answer_tokens = 512;
  int max_total_tokens = 9216;
  int top_logprobs = 20;
  std::vector<std::string> stop_sequences{"<|im_end|>"};
  std::map<std::string, int64_t> vocab;  // token text -> id (nowait, live ids)
  OracleAccounting oracle_accounting = OracleAccounting::earliest;
  std::string prompt_template;  // empty = built-in default
  std::string run_label;        // defaults to the policy method name

  void validate() const;
  std::string label() const;
};

std::shared_ptr<Provider> make_provider(const RunConfig& cfg);

/// Builds per-run policy options; for nowait this expands the keyword bias
/// from the configured vocabulary (diagnostics report which variants were
/// found and which are absent).
RunPolicyOptions run_policy_options(const RunConfig& cfg,
                                    NoWaitBias* diagnostics = nullptr);

struct RunOutputs {
  RunReport report;
  std::vector<TrialRecord> records;            // sorted by trial id
  std::vector<DecodeTranscript> transcripts;   // sorted by trial id
  std::vector<ScriptedTrace> traces;           // when recording
};

/// Executes run_policy for every trial under the concurrency limit and
/// evaluates each answer. Individual trial failures are recorded as
/// incorrect-with-error; they never abort the run.
RunOutputs run_benchmark(const RunConfig& cfg, const std::vector<Trial>& trials,
                         Provider& provider);

/// Per-category accuracy and mean thinking tokens; ΔTok against base means
/// when base records are supplied (trial id sets must match exactly).
RunReport compute_metrics(const std::vector<TrialRecord>& records,
                          const std::vector<TrialRecord>* base_records,
                          const std::string& method,
                          const std::string& base_label = "");

/// One report per tau over the same provider (free on scripted traces),
/// with a Pareto summary of accuracy vs mean thinking tokens.
SweepReport sweep_threshold(const RunConfig& cfg,
                            const std::vector<Trial>& trials,
                            Provider& provider,
                            const std::vector<double>& grid);

struct OracleRunOutputs {
  std::vector<OracleResult> results;  // sorted by trial id
  std::vector<TrialRecord> base_records;
  OracleTable table;
};

/// Runs the base policy per trial, then rolls out every boundary.
OracleRunOutputs run_oracle(const RunConfig& cfg,
                            const std::vector<Trial>& trials,
                            Provider& provider);

/// Offline re-score of persisted records against ground truth (keyed by
/// trial id; categories come from the records themselves).
std::vector<TrialRecord> rescore_records(
    const std::vector<TrialRecord>& records,
    const std::map<std::string, GroundTruthSpec>& ground_truth,
    const SpecialTokens& specials);

}  // namespace thinkbrake
