#pragma once

// Oracle early-stop analysis: inject </think> at every sentence boundary of
// a base trajectory, roll out the answer, and measure how often some
// termination point would have produced a correct call (recoverability) and
// at what token cost.

#include "thinkbrake/boundary.hpp"
#include "thinkbrake/gateway.hpp"
#include "thinkbrake/report.hpp"
#include "thinkbrake/trial.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thinkbrake {

enum class OracleAccounting { earliest, latest };

struct BoundaryPoint {
  int boundary_index = 0;       // 1-based ordinal within the thinking text
  std::string prefix_text;      // prompt + generated text through the boundary
  int64_t thinking_tokens = 0;  // thinking tokens covered by the prefix
};

/// One entry per sentence boundary in the base transcript's thinking
/// section, in stream order.
std::vector<BoundaryPoint> enumerate_boundaries(const Trial& trial,
                                                const DecodeTranscript& base,
                                                const BoundaryConfig& cfg);

struct BoundaryVerdict {
  int boundary_index = 0;
  int64_t thinking_tokens = 0;
  bool correct = false;
  bool known = true;  // false when the rollout failed and was excluded
};

struct OracleResult {
  std::string trial_id;
  Category category = Category::simple;
  bool base_correct = false;
  std::vector<BoundaryVerdict> boundary_verdicts;
  bool recoverable = false;
  std::optional<int64_t> oracle_thinking_tokens;
  bool partial = false;  // some rollouts failed
};

void to_json(json& j, const OracleResult& r);
void from_json(const json& j, OracleResult& r);

struct OracleRolloutOptions {
  BoundaryConfig boundary;
  SpecialTokens specials;
  std::string separator = "\n\n";
  int max_answer_tokens = 512;
  int top_logprobs = 20;
  std::vector<std::string> stop_sequences;
  OracleAccounting accounting = OracleAccounting::earliest;
};

/// Rolls out every boundary of the base transcript through the gateway and
/// scores each forced answer. Gateway failures mark the affected boundary
/// unknown and flag the result partial instead of aborting.
OracleResult oracle_rollout(const Trial& trial, const DecodeTranscript& base,
                            bool base_correct, Provider& gateway,
                            const OracleRolloutOptions& opt);

/// Per-category and pooled-average oracle table. Base thinking-token counts
/// come from the paired base records; irrecoverable trials keep their base
/// token count (the oracle cannot stop them early).
OracleTable aggregate_oracle(const std::vector<OracleResult>& results,
                             const std::vector<TrialRecord>& base_records);

}  // namespace thinkbrake
