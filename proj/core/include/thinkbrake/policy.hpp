#pragma once

// Termination strategies for the thinking phase, consulted at sentence
// boundaries of the streamed reasoning text, plus the orchestration loop
// that applies one of them to a live generation.
//
// The margin rule terminates the thinking phase when
//   log p(top token) - log p(</think>)  <=  tau
// at a sentence boundary; a probability-space variant compares raw
// probabilities instead. Baselines: keyword suppression (a bias map over
// filler tokens), immediate termination (prefilled <think></think>), and a
// confidence probe of the <tool_call> token right after an injected close.

#include "thinkbrake/boundary.hpp"
#include "thinkbrake/gateway.hpp"
#include "thinkbrake/trial.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace thinkbrake {

enum class PolicyKind {
  base,
  thinkbrake,
  thinkbrake_prob,
  nowait,
  thinkless,
  toolcall_confidence,
};

const char* to_string(PolicyKind k);
std::optional<PolicyKind> policy_kind_from_string(std::string_view s);

// Delay/filler keywords suppressed by the nowait baseline.
const std::vector<std::string>& default_nowait_keywords();

struct PolicyConfig {
  PolicyKind kind = PolicyKind::base;
  double tau_threshold = 0.25;
  double tau_threshold_prob = 0.25;
  std::vector<std::string> keywords = default_nowait_keywords();
  int confidence_k = 20;
  double confidence_threshold = 20.0;
  // Peaked distributions give a LARGE confidence value under the averaged
  // negative-log formula, so termination fires on C >= threshold; the flag
  // lets the opposite reading be measured.
  bool confidence_terminate_above = true;
  // Require the probe's top token to be <tool_call> itself.
  bool confidence_require_toolcall_top = true;
  int max_thinking_tokens = 8192;
  double suppression_bias = -100.0;

  void validate() const;
};

enum class PolicyAction { continue_thinking, terminate_thinking };

struct PolicyDecision {
  PolicyAction action = PolicyAction::continue_thinking;
  std::optional<double> margin;  // log/prob margin, or confidence C
  int boundary_index = 0;
};

/// Averaged negative log probability over the k probe candidates:
///   C = -(1/k) * sum_j log p^(j)
struct ConfidenceProbe {
  TopKDistribution distribution;
  double c_value = 0.0;
};

double confidence_value(const TopKDistribution& d);
ConfidenceProbe make_confidence_probe(TopKDistribution d);

/// Terminate iff log p(top) - log p(</think>) <= tau. A </think> missing
/// from the top-k makes the margin +infinity (never triggers).
PolicyDecision thinkbrake_decide(const TopKDistribution& alts,
                                 const SpecialTokens& specials,
                                 const PolicyConfig& cfg);

/// Probability-space variant: p(top) - p(</think>) <= tau_prob, with an
/// absent </think> treated as probability 0.
PolicyDecision thinkbrake_prob_decide(const TopKDistribution& alts,
                                      const SpecialTokens& specials,
                                      const PolicyConfig& cfg);

struct NoWaitBias {
  BiasMap bias;
  std::vector<std::string> matched;  // vocab variants that were found
  std::vector<std::string> missing;  // variants absent from the vocab
};

/// Expands each keyword to {as-is, capitalized} x {bare, leading space} and
/// maps every variant present in the vocabulary to the suppression constant.
NoWaitBias nowait_bias(const std::vector<std::string>& keywords,
                       const std::map<std::string, int64_t>& vocab,
                       double suppression_bias = -100.0);

/// Assistant prefill that skips thinking entirely: "<think></think>" + sep.
std::string thinkless_prefill(const SpecialTokens& specials,
                              std::string_view separator = "\n\n");

/// Terminate iff C passes the threshold and the probe's top token is
/// <tool_call> (when required). Probe distributions smaller than k error out.
PolicyDecision toolcall_confidence_decide(const ConfidenceProbe& probe,
                                          const SpecialTokens& specials,
                                          const PolicyConfig& cfg);

struct RunPolicyOptions {
  BoundaryConfig boundary;
  SpecialTokens specials;
  std::string separator = "\n\n";
  int max_total_tokens = 9216;
  int max_answer_tokens = 512;
  int top_logprobs = 20;
  std::vector<std::string> stop_sequences;
  std::optional<BiasMap> bias;  // prebuilt keyword bias (nowait)
};

struct PolicyRunResult {
  DecodeTranscript transcript;
  std::vector<PolicyDecision> decisions;  // one per consultation
  std::optional<int> triggered_boundary;  // boundary_index that terminated
  int probe_requests = 0;
};

/// Streams the generation for one trial and applies the configured policy at
/// each sentence boundary of the thinking section. On termination the stream
/// is aborted, "</think>" + separator is injected and the answer is fetched
/// as a continuation. base applies no policy; thinkless skips streaming and
/// prefills; nowait only biases requests and never force-terminates. The
/// max_thinking_tokens safety cap force-terminates any kind, with a flag.
PolicyRunResult run_policy(const Trial& trial, const PolicyConfig& cfg,
                           Provider& gateway, const RunPolicyOptions& opt);

}  // namespace thinkbrake
