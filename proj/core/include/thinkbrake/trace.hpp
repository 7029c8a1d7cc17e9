#pragma once

// Core domain types for token streams and decode transcripts: per-token
// log-probability records, top-k distributions, thinking/answer sectioning
// and the token accounting that every metric downstream is built on.

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thinkbrake {

using json = nlohmann::json;

enum class Category { simple, multiple, parallel, multi_parallel };
enum class Split { non_live, live };

const char* to_string(Category c);
const char* to_string(Split s);
std::optional<Category> category_from_string(std::string_view s);
std::optional<Split> split_from_string(std::string_view s);

// All four single-turn categories, in report order.
inline constexpr Category kAllCategories[] = {
    Category::simple, Category::multiple, Category::parallel,
    Category::multi_parallel};

/// One candidate token with its natural-log probability (always <= 0).
struct LogProbEntry {
  int64_t token_id = -1;
  std::string token_text;
  double logprob = 0.0;

  bool operator==(const LogProbEntry&) const = default;
};

/// Top-k candidates at one position, sorted by logprob descending.
/// entries[0] is the top-predicted token.
struct TopKDistribution {
  std::vector<LogProbEntry> entries;

  int k() const { return static_cast<int>(entries.size()); }
  const LogProbEntry& top() const;

  // Lookup by id when the id is known, otherwise by exact text.
  const LogProbEntry* find(int64_t token_id, std::string_view token_text) const;

  // Enforces: non-empty, sorted descending, no duplicate token ids.
  void validate() const;

  bool operator==(const TopKDistribution&) const = default;
};

/// One emitted token together with the distribution it was drawn from.
/// Under greedy decoding the emitted token is entries[0].
struct TokenEvent {
  int64_t position = 0;
  LogProbEntry emitted;
  TopKDistribution alternatives;

  bool operator==(const TokenEvent&) const = default;
};

struct SpecialToken {
  std::string text;
  int64_t id = -1;

  bool operator==(const SpecialToken&) const = default;
};

/// Marker tokens for the thinking section and tool-call tags.
/// Defaults follow the Qwen3 vocabulary.
struct SpecialTokens {
  SpecialToken think_open{"<think>", 151667};
  SpecialToken think_close{"</think>", 151668};
  SpecialToken tool_call_open{"<tool_call>", 151657};
  SpecialToken tool_call_close{"</tool_call>", 151658};

  void validate() const;  // the four ids must be distinct

  bool operator==(const SpecialTokens&) const = default;
};

// Id match when both sides carry a real id; text match otherwise (live
// endpoints do not always expose token ids).
bool matches_special(const LogProbEntry& entry, const SpecialToken& special);

// Transcript warning labels.
inline constexpr const char* kWarnMissingThinkOpen = "missing_think_open";
inline constexpr const char* kWarnCloseWithoutOpen = "think_close_without_open";
inline constexpr const char* kWarnUnterminatedThinking = "unterminated_thinking";
inline constexpr const char* kWarnSafetyCapHit = "safety_cap_hit";
inline constexpr const char* kWarnNonGreedyEvent = "non_greedy_event";
inline constexpr const char* kWarnSuppressedTokenEmitted = "suppressed_token_emitted";

/// Full record of one generation: every token event, the positions of the
/// thinking markers, whether the close was injected by a policy, and the
/// answer text. Immutable once finalized.
struct DecodeTranscript {
  std::string trial_id;
  std::vector<TokenEvent> events;
  std::optional<int64_t> thinking_open_pos;
  std::optional<int64_t> thinking_close_pos;
  bool injected_close = false;
  std::string answer_text;
  std::vector<std::string> warnings;

  bool has_warning(std::string_view w) const;
  void add_warning(std::string_view w);  // dedup

  bool operator==(const DecodeTranscript&) const = default;
};

/// Tokens strictly between <think> and </think> (decoded or injected).
/// Close without open counts the tokens before the close (transcript carries
/// the warning); open without close, or neither marker, counts as 0.
int64_t count_thinking_tokens(const DecodeTranscript& t);

struct SectionSplit {
  std::string thinking;  // token texts before </think>, markers excluded
  std::string answer;    // token texts after </think>
  std::optional<std::string> error;
};

/// Splits a transcript's text around </think>. A missing close marker puts
/// everything in `thinking` and surfaces an "unterminated thinking" error.
SectionSplit split_sections(const DecodeTranscript& t);

/// Checks marker ordering, records missing-marker warnings and fills
/// answer_text from the events. Call once when construction is complete.
void finalize_transcript(DecodeTranscript& t);

// JSON round-trip (one document per trial in a JSONL run file).
void to_json(json& j, const LogProbEntry& e);
void from_json(const json& j, LogProbEntry& e);
void to_json(json& j, const TopKDistribution& d);
void from_json(const json& j, TopKDistribution& d);
void to_json(json& j, const TokenEvent& e);
void from_json(const json& j, TokenEvent& e);
void to_json(json& j, const SpecialToken& s);
void from_json(const json& j, SpecialToken& s);
void to_json(json& j, const SpecialTokens& s);
void from_json(const json& j, SpecialTokens& s);
void to_json(json& j, const DecodeTranscript& t);
void from_json(const json& j, DecodeTranscript& t);

std::string concat_token_text(const std::vector<TokenEvent>& events);

}  // namespace thinkbrake
