#include "thinkbrake/toolcall.hpp"

#include <algorithm>
#include <cctype>

namespace thinkbrake {

const char* to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::ok: return "ok";
    case VerdictReason::parse_error: return "parse_error";
    case VerdictReason::wrong_name: return "wrong_name";
    case VerdictReason::missing_param: return "missing_param";
    case VerdictReason::bad_value: return "bad_value";
    case VerdictReason::unexpected_param: return "unexpected_param";
    case VerdictReason::count_mismatch: return "count_mismatch";
  }
  return "?";
}

std::optional<VerdictReason> verdict_reason_from_string(std::string_view s) {
  for (auto r : {VerdictReason::ok, VerdictReason::parse_error,
                 VerdictReason::wrong_name, VerdictReason::missing_param,
                 VerdictReason::bad_value, VerdictReason::unexpected_param,
                 VerdictReason::count_mismatch})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

ParsedCalls parse_tool_calls(std::string_view answer_text,
                             const SpecialTokens& specials) {
  ParsedCalls out;
  const std::string& open = specials.tool_call_open.text;
  const std::string& close = specials.tool_call_close.text;
  size_t pos = 0;
  int block = 0;
  while (true) {
    size_t b = answer_text.find(open, pos);
    if (b == std::string_view::npos) break;
    ++block;
    size_t body = b + open.size();
    size_t e = answer_text.find(close, body);
    if (e == std::string_view::npos) {
      out.error = "unterminated " + open + " block " + std::to_string(block);
      return out;
    }
    std::string inner(answer_text.substr(body, e - body));
    json parsed = json::parse(inner, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || !parsed.is_object() ||
        !parsed.contains("name") || !parsed["name"].is_string() ||
        (parsed.contains("arguments") && !parsed["arguments"].is_object())) {
      out.error = "malformed tool call in block " + std::to_string(block);
      return out;
    }
    ToolCall call;
    call.name = parsed["name"].get<std::string>();
    call.arguments =
        parsed.contains("arguments") ? parsed["arguments"] : json::object();
    out.calls.push_back(std::move(call));
    pos = e + close.size();
  }
  return out;
}

std::string serialize_tool_call(const ToolCall& call,
                                const SpecialTokens& specials) {
  json j{{"name", call.name}, {"arguments", call.arguments}};
  return specials.tool_call_open.text + j.dump() +
         specials.tool_call_close.text;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

bool normalized_equal(const json& a, const json& b) {
  if (a.is_number() && b.is_number())
    return a.get<long double>() == b.get<long double>();
  if (a.is_string() && b.is_string())
    return trim(a.get<std::string>()) == trim(b.get<std::string>());
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (!normalized_equal(a[i], b[i])) return false;
    return true;
  }
  if (a.is_object() && b.is_object()) {
    if (a.size() != b.size()) return false;
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) return false;
      if (!normalized_equal(it.value(), b[it.key()])) return false;
    }
    return true;
  }
  return a == b;
}

Verdict match_call(const ToolCall& call, const GroundTruthCall& gt) {
  if (call.name != gt.name) return {false, VerdictReason::wrong_name};
  for (const auto& param : gt.required)
    if (!call.arguments.contains(param))
      return {false, VerdictReason::missing_param};
  for (auto it = call.arguments.begin(); it != call.arguments.end(); ++it) {
    auto allowed = gt.params.find(it.key());
    if (allowed == gt.params.end())
      return {false, VerdictReason::unexpected_param};
    bool ok = false;
    for (const auto& v : allowed->second)
      if (normalized_equal(it.value(), v)) {
        ok = true;
        break;
      }
    if (!ok) return {false, VerdictReason::bad_value};
  }
  return {true, VerdictReason::ok};
}

namespace {

// Backtracking search for a perfect call->option assignment.
bool assign(const std::vector<ToolCall>& calls,
            const std::vector<GroundTruthCall>& options, size_t call_idx,
            std::vector<bool>& used) {
  if (call_idx == calls.size()) return true;
  for (size_t j = 0; j < options.size(); ++j) {
    if (used[j]) continue;
    if (!match_call(calls[call_idx], options[j]).correct) continue;
    used[j] = true;
    if (assign(calls, options, call_idx + 1, used)) return true;
    used[j] = false;
  }
  return false;
}

}  // namespace

Verdict evaluate_trial(const ParsedCalls& parsed, const GroundTruthSpec& gt,
                       Category category) {
  if (parsed.error) return {false, VerdictReason::parse_error};
  const auto& options = gt.options;
  if (options.empty()) return {false, VerdictReason::count_mismatch};

  if (category == Category::simple || category == Category::multiple) {
    if (parsed.calls.size() != 1) return {false, VerdictReason::count_mismatch};
    const ToolCall& call = parsed.calls.front();
    Verdict failure{false, VerdictReason::wrong_name};
    for (const auto& opt : options) {
      Verdict v = match_call(call, opt);
      if (v.correct) return v;
      // Diagnose against an option whose tool name at least matched.
      if (v.reason != VerdictReason::wrong_name &&
          failure.reason == VerdictReason::wrong_name)
        failure = v;
    }
    return failure;
  }

  // parallel / multi-parallel
  if (parsed.calls.size() != options.size())
    return {false, VerdictReason::count_mismatch};
  std::vector<bool> used(options.size(), false);
  if (assign(parsed.calls, options, 0, used)) return {true, VerdictReason::ok};

  for (const auto& call : parsed.calls) {
    bool name_known = std::any_of(
        options.begin(), options.end(),
        [&](const GroundTruthCall& o) { return o.name == call.name; });
    if (!name_known) return {false, VerdictReason::wrong_name};
  }
  return {false, VerdictReason::bad_value};
}

void to_json(json& j, const ToolCall& c) {
  j = json{{"name", c.name}, {"arguments", c.arguments}};
}

void from_json(const json& j, ToolCall& c) {
  j.at("name").get_to(c.name);
  j.at("arguments").get_to(c.arguments);
}

}  // namespace thinkbrake
