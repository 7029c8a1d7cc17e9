#include "thinkbrake/trace.hpp"

#include <algorithm>
#include <set>

namespace thinkbrake {

const char* to_string(Category c) {
  switch (c) {
    case Category::simple: return "simple";
    case Category::multiple: return "multiple";
    case Category::parallel: return "parallel";
    case Category::multi_parallel: return "multi-parallel";
  }
  return "?";
}

const char* to_string(Split s) {
  return s == Split::non_live ? "non-live" : "live";
}

std::optional<Category> category_from_string(std::string_view s) {
  if (s == "simple") return Category::simple;
  if (s == "multiple") return Category::multiple;
  if (s == "parallel") return Category::parallel;
  // BFCL spells this category "parallel_multiple"; accept both spellings.
  if (s == "multi-parallel" || s == "multi_parallel" || s == "parallel_multiple")
    return Category::multi_parallel;
  return std::nullopt;
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "non-live" || s == "non_live" || s == "nonlive") return Split::non_live;
  if (s == "live") return Split::live;
  return std::nullopt;
}

const LogProbEntry& TopKDistribution::top() const {
  if (entries.empty())
    throw std::runtime_error("no logprobs from provider");
  return entries.front();
}

const LogProbEntry* TopKDistribution::find(int64_t token_id,
                                           std::string_view token_text) const {
  for (const auto& e : entries) {
    if (token_id >= 0 && e.token_id >= 0 && e.token_id == token_id) return &e;
    if (e.token_text == token_text) return &e;
  }
  return nullptr;
}

void TopKDistribution::validate() const {
  if (entries.empty())
    throw std::runtime_error("top-k distribution is empty");
  std::set<int64_t> seen;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].logprob > entries[i - 1].logprob)
      throw std::runtime_error("top-k distribution not sorted by logprob");
    if (!seen.insert(entries[i].token_id).second)
      throw std::runtime_error("duplicate token id in top-k distribution");
  }
}

void SpecialTokens::validate() const {
  std::set<int64_t> ids{think_open.id, think_close.id, tool_call_open.id,
                        tool_call_close.id};
  if (ids.size() != 4)
    throw std::runtime_error("special token ids must be distinct");
}

bool matches_special(const LogProbEntry& entry, const SpecialToken& special) {
  if (entry.token_id >= 0 && special.id >= 0 && entry.token_id == special.id)
    return true;
  return entry.token_text == special.text;
}

bool DecodeTranscript::has_warning(std::string_view w) const {
  return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
}

void DecodeTranscript::add_warning(std::string_view w) {
  if (!has_warning(w)) warnings.emplace_back(w);
}

int64_t count_thinking_tokens(const DecodeTranscript& t) {
  if (t.thinking_open_pos && t.thinking_close_pos)
    return *t.thinking_close_pos - *t.thinking_open_pos - 1;
  if (t.thinking_close_pos)  // close without open: everything before it
    return *t.thinking_close_pos;
  return 0;
}

SectionSplit split_sections(const DecodeTranscript& t) {
  SectionSplit out;
  if (!t.thinking_close_pos) {
    for (const auto& e : t.events) {
      if (t.thinking_open_pos && e.position == *t.thinking_open_pos) continue;
      out.thinking += e.emitted.token_text;
    }
    out.error = "unterminated thinking";
    return out;
  }
  const int64_t close = *t.thinking_close_pos;
  for (const auto& e : t.events) {
    if (t.thinking_open_pos && e.position == *t.thinking_open_pos) continue;
    if (e.position == close) continue;
    if (e.position < close)
      out.thinking += e.emitted.token_text;
    else
      out.answer += e.emitted.token_text;
  }
  return out;
}

void finalize_transcript(DecodeTranscript& t) {
  if (t.thinking_open_pos && t.thinking_close_pos &&
      !(*t.thinking_open_pos < *t.thinking_close_pos))
    throw std::runtime_error("transcript " + t.trial_id +
                             ": <think> must precede </think>");
  if (!t.thinking_open_pos && !t.thinking_close_pos) {
    t.add_warning(kWarnMissingThinkOpen);
  } else if (!t.thinking_open_pos && t.thinking_close_pos) {
    t.add_warning(kWarnCloseWithoutOpen);
  } else if (t.thinking_open_pos && !t.thinking_close_pos) {
    t.add_warning(kWarnUnterminatedThinking);
  }
  t.answer_text = split_sections(t).answer;
}

std::string concat_token_text(const std::vector<TokenEvent>& events) {
  std::string out;
  for (const auto& e : events) out += e.emitted.token_text;
  return out;
}

// --- JSON ---

void to_json(json& j, const LogProbEntry& e) {
  j = json{{"id", e.token_id}, {"text", e.token_text}, {"logprob", e.logprob}};
}

void from_json(const json& j, LogProbEntry& e) {
  j.at("id").get_to(e.token_id);
  j.at("text").get_to(e.token_text);
  j.at("logprob").get_to(e.logprob);
}

void to_json(json& j, const TopKDistribution& d) { j = d.entries; }

void from_json(const json& j, TopKDistribution& d) {
  d.entries = j.get<std::vector<LogProbEntry>>();
}

void to_json(json& j, const TokenEvent& e) {
  j = json{{"pos", e.position}, {"emitted", e.emitted}, {"top", e.alternatives}};
}

void from_json(const json& j, TokenEvent& e) {
  j.at("pos").get_to(e.position);
  j.at("emitted").get_to(e.emitted);
  j.at("top").get_to(e.alternatives);
}

void to_json(json& j, const SpecialToken& s) {
  j = json{{"text", s.text}, {"id", s.id}};
}

void from_json(const json& j, SpecialToken& s) {
  j.at("text").get_to(s.text);
  j.at("id").get_to(s.id);
}

void to_json(json& j, const SpecialTokens& s) {
  j = json{{"think_open", s.think_open},
           {"think_close", s.think_close},
           {"tool_call_open", s.tool_call_open},
           {"tool_call_close", s.tool_call_close}};
}

void from_json(const json& j, SpecialTokens& s) {
  j.at("think_open").get_to(s.think_open);
  j.at("think_close").get_to(s.think_close);
  j.at("tool_call_open").get_to(s.tool_call_open);
  j.at("tool_call_close").get_to(s.tool_call_close);
}

void to_json(json& j, const DecodeTranscript& t) {
  j = json{{"trial_id", t.trial_id},
           {"events", t.events},
           {"injected_close", t.injected_close},
           {"answer_text", t.answer_text},
           {"warnings", t.warnings}};
  j["think_open_pos"] =
      t.thinking_open_pos ? json(*t.thinking_open_pos) : json(nullptr);
  j["think_close_pos"] =
      t.thinking_close_pos ? json(*t.thinking_close_pos) : json(nullptr);
}

void from_json(const json& j, DecodeTranscript& t) {
  j.at("trial_id").get_to(t.trial_id);
  j.at("events").get_to(t.events);
  j.at("injected_close").get_to(t.injected_close);
  j.at("answer_text").get_to(t.answer_text);
  j.at("warnings").get_to(t.warnings);
  t.thinking_open_pos.reset();
  t.thinking_close_pos.reset();
  if (!j.at("think_open_pos").is_null())
    t.thinking_open_pos = j.at("think_open_pos").get<int64_t>();
  if (!j.at("think_close_pos").is_null())
    t.thinking_close_pos = j.at("think_close_pos").get<int64_t>();
}

}  // namespace thinkbrake
