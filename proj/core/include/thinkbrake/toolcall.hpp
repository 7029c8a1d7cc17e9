#pragma once

// Tool-call extraction from answer text and AST-style matching against
// BFCL-shaped ground truth for the four single-turn categories.

#include "thinkbrake/trace.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace thinkbrake {

struct ToolCall {
  std::string name;
  json arguments = json::object();

  bool operator==(const ToolCall&) const = default;
};

/// One acceptable call: allowed values per parameter plus the required set.
/// In the BFCL possible-answer files a parameter whose allowed list contains
/// "" is optional; the loader derives `required` from that convention.
struct GroundTruthCall {
  std::string name;
  std::map<std::string, std::vector<json>> params;
  std::set<std::string> required;
};

struct GroundTruthSpec {
  std::vector<GroundTruthCall> options;
};

enum class VerdictReason {
  ok,
  parse_error,
  wrong_name,
  missing_param,
  bad_value,
  unexpected_param,
  count_mismatch,
};

const char* to_string(VerdictReason r);
std::optional<VerdictReason> verdict_reason_from_string(std::string_view s);

struct Verdict {
  bool correct = false;
  VerdictReason reason = VerdictReason::ok;

  bool operator==(const Verdict&) const = default;
};

struct ParsedCalls {
  std::vector<ToolCall> calls;
  std::optional<std::string> error;  // set on any malformed block
};

/// Extracts every <tool_call>...</tool_call> block, in order of appearance.
/// Malformed JSON (or a block that is not {"name":..., "arguments":{...}})
/// sets `error`; the whole trial then scores as a parse_error.
ParsedCalls parse_tool_calls(std::string_view answer_text,
                             const SpecialTokens& specials);

std::string serialize_tool_call(const ToolCall& call,
                                const SpecialTokens& specials);

/// Value equality used for argument matching: numeric equality across
/// integer/real representations, string comparison after trimming outer
/// whitespace, recursive for arrays and objects, strict otherwise.
bool normalized_equal(const json& a, const json& b);

/// Strict single-call match: exact name, all required params present, every
/// present param's value in its allowed list, no param the ground truth does
/// not mention.
Verdict match_call(const ToolCall& call, const GroundTruthCall& gt);

/// Category-level scoring. simple/multiple: exactly one call, matched against
/// any option. parallel/multi-parallel: call count must equal option count
/// and a perfect one-to-one assignment must exist (order-insensitive,
/// exhaustive search; option counts stay small).
Verdict evaluate_trial(const ParsedCalls& parsed, const GroundTruthSpec& gt,
                       Category category);

void to_json(json& j, const ToolCall& c);
void from_json(const json& j, ToolCall& c);

}  // namespace thinkbrake
