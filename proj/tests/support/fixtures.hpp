#pragma once

// Shared test fixtures: a deterministic trace builder, randomized
// margin-trace generation, and the hand-built oracle trial set.
//
// Fixture sentences tokenize as W word tokens + "." + "\n", so every
// sentence boundary sits on a token edge: the boundary character is the
// final "." of its own token, the "\n" token carries the next-position
// distribution that policies consult, and both the policy loop and oracle
// enumeration address the same branch key (after_tokens = 1 + thinking
// tokens covered by the boundary).

#include "thinkbrake/policy.hpp"
#include "thinkbrake/scripted.hpp"
#include "thinkbrake/trial.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace thinkbrake::testing {

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words{
      " alpha", " beta", " gamma", " delta", " epsilon", " zeta",
      " theta", " kappa", " lambda", " sigma"};
  return words;
}

/// Builds a ScriptedTrace with stable token ids per text.
class TraceBuilder {
 public:
  TraceBuilder(std::string trial_id, std::string prompt) {
    trace_.trial_id = std::move(trial_id);
    trace_.prompt = std::move(prompt);
    SpecialTokens sp;
    ids_[sp.think_open.text] = sp.think_open.id;
    ids_[sp.think_close.text] = sp.think_close.id;
    ids_[sp.tool_call_open.text] = sp.tool_call_open.id;
    ids_[sp.tool_call_close.text] = sp.tool_call_close.id;
  }

  int64_t id_for(const std::string& text) {
    auto it = ids_.find(text);
    if (it != ids_.end()) return it->second;
    const int64_t id = next_id_++;
    ids_.emplace(text, id);
    return id;
  }

  LogProbEntry entry(const std::string& text, double logprob) {
    return LogProbEntry{id_for(text), text, logprob};
  }

  TokenEvent event_at(int64_t pos, const std::string& text, double logprob,
                      std::vector<LogProbEntry> extra = {}) {
    TokenEvent ev;
    ev.position = pos;
    ev.emitted = entry(text, logprob);
    ev.alternatives.entries.push_back(ev.emitted);
    for (auto& e : extra) ev.alternatives.entries.push_back(std::move(e));
    std::stable_sort(ev.alternatives.entries.begin(),
                     ev.alternatives.entries.end(),
                     [](const LogProbEntry& a, const LogProbEntry& b) {
                       return a.logprob > b.logprob;
                     });
    return ev;
  }

  /// Appends a main-path event; extra entries must not out-rank the emitted.
  int push(const std::string& text, double logprob,
           std::vector<LogProbEntry> extra = {}) {
    const int pos = static_cast<int>(trace_.main_path.size());
    trace_.main_path.push_back(event_at(pos, text, logprob, std::move(extra)));
    return pos;
  }

  void set_continuation(int after_tokens, std::vector<TokenEvent> events) {
    trace_.continuations[after_tokens] = std::move(events);
  }

  void set_probe(int after_tokens, TopKDistribution d) {
    trace_.probes[after_tokens] = std::move(d);
  }

  /// One-event completion carrying a whole serialized tool call.
  std::vector<TokenEvent> answer_events(const std::string& answer_text) {
    return {event_at(0, answer_text, -0.01)};
  }

  const std::map<std::string, int64_t>& vocab() const { return ids_; }
  ScriptedTrace trace() const { return trace_; }

 private:
  ScriptedTrace trace_;
  std::map<std::string, int64_t> ids_;
  int64_t next_id_ = 1000;
};

inline std::string weather_call_text(const std::string& city) {
  json j{{"name", "lookup.weather"}, {"arguments", json{{"city", city}}}};
  return "<tool_call>" + j.dump() + "</tool_call>";
}

inline GroundTruthSpec weather_ground_truth() {
  GroundTruthCall call;
  call.name = "lookup.weather";
  call.params["city"] = {json("paris")};
  call.required = {"city"};
  return GroundTruthSpec{{call}};
}

inline Trial weather_trial(const std::string& id,
                           Category category = Category::simple) {
  Trial t;
  t.id = id;
  t.category = category;
  t.split = Split::non_live;
  t.prompt = "SYSTEM: tools available.\nUSER: weather in paris? [" + id +
             "]\nASSISTANT:\n";
  t.tool_schemas = {json{{"name", "lookup.weather"}}};
  t.ground_truth = weather_ground_truth();
  return t;
}

struct MarginTraceOptions {
  int sentences = 4;
  int words_per_sentence = 2;
  // One margin per sentence boundary; +infinity means </think> is absent
  // from that consultation's top-k.
  std::vector<double> margins;
  bool base_correct = true;
  // Continuation correctness per boundary index (1-based); boundaries not
  // listed produce correct answers.
  std::map<int, bool> continuation_correct;
  double top_logprob = -0.1;
  // Overrides for non-weather trials (empty = weather fixture defaults).
  std::optional<Trial> trial;
  std::string correct_answer;
  std::string wrong_answer;
};

struct MarginTrial {
  Trial trial;
  ScriptedTrace trace;
  std::map<std::string, int64_t> vocab;
  std::vector<double> margins;           // per boundary, 1-based order
  std::vector<int> consult_positions;    // main-path index of each "\n" event
  std::vector<int64_t> boundary_tokens;  // thinking tokens at each boundary
};

/// Main path: <think>, then per sentence W words + "." + "\n", then
/// </think> and a one-event answer. The "\n" event of sentence s carries the
/// distribution consulted at boundary s; continuations exist at every
/// boundary (and at key 0 for prefilled runs).
inline MarginTrial make_margin_trial(const std::string& id,
                                     const MarginTraceOptions& opt) {
  MarginTrial out;
  out.trial = opt.trial ? *opt.trial : weather_trial(id);
  TraceBuilder b(out.trial.id, out.trial.prompt);
  SpecialTokens sp;

  b.push(sp.think_open.text, -0.01);
  const std::string correct =
      opt.correct_answer.empty() ? weather_call_text("paris")
                                 : opt.correct_answer;
  const std::string wrong = opt.wrong_answer.empty()
                                ? weather_call_text("london")
                                : opt.wrong_answer;
  b.set_continuation(0, b.answer_events(correct));

  for (int s = 0; s < opt.sentences; ++s) {
    for (int w = 0; w < opt.words_per_sentence; ++w)
      b.push(word_pool()[(s * opt.words_per_sentence + w) % word_pool().size()],
             opt.top_logprob);
    b.push(".", opt.top_logprob);
    const double margin =
        s < static_cast<int>(opt.margins.size())
            ? opt.margins[s]
            : std::numeric_limits<double>::infinity();
    std::vector<LogProbEntry> extra{b.entry(" filler", opt.top_logprob - 8.0)};
    if (std::isfinite(margin))
      extra.push_back(b.entry(sp.think_close.text, opt.top_logprob - margin));
    const int nl_pos = b.push("\n", opt.top_logprob, std::move(extra));
    out.consult_positions.push_back(nl_pos);
    out.margins.push_back(margin);
    out.boundary_tokens.push_back(nl_pos - 1);  // thinking tokens before "\n"
    const int boundary_index = s + 1;
    const bool cont_correct = [&] {
      auto it = opt.continuation_correct.find(boundary_index);
      return it == opt.continuation_correct.end() ? true : it->second;
    }();
    b.set_continuation(nl_pos, b.answer_events(cont_correct ? correct : wrong));
  }

  b.push(sp.think_close.text, -0.01);
  b.push(opt.base_correct ? correct : wrong, -0.01);

  out.trace = b.trace();
  out.vocab = b.vocab();
  return out;
}

struct RandomTraceOptions {
  double close_absent_prob = 0.25;
  double margin_lo = 0.01;
  double margin_hi = 1.5;
  int min_sentences = 3;
  int max_sentences = 8;
  int min_words = 1;
  int max_words = 4;
};

inline MarginTrial make_random_margin_trial(const std::string& id,
                                            uint64_t seed,
                                            const RandomTraceOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  MarginTraceOptions m;
  m.sentences = std::uniform_int_distribution<int>(opt.min_sentences,
                                                   opt.max_sentences)(rng);
  m.words_per_sentence =
      std::uniform_int_distribution<int>(opt.min_words, opt.max_words)(rng);
  std::uniform_real_distribution<double> margin(opt.margin_lo, opt.margin_hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < m.sentences; ++s)
    m.margins.push_back(unit(rng) < opt.close_absent_prob
                            ? std::numeric_limits<double>::infinity()
                            : margin(rng));
  m.base_correct = unit(rng) < 0.7;
  for (int s = 1; s <= m.sentences; ++s)
    m.continuation_correct[s] = unit(rng) < 0.7;
  return make_margin_trial(id, m);
}

/// Hand-built oracle fixture: eight trials mixing base-correct,
/// mid-boundary-recoverable and irrecoverable cases. Expected values are
/// derived by hand from the construction (see expectations below).
struct OracleExpectation {
  std::string id;
  bool base_correct;
  bool recoverable;
  std::optional<int64_t> oracle_tokens;
};

struct OracleFixture {
  std::vector<MarginTrial> trials;
  std::vector<OracleExpectation> expected;
};

/// Every trial uses 1 word per sentence, so sentence s ends after 3s
/// thinking tokens ("w", ".", "\n") and the boundary covers 3s-1 of them.
/// Three sentences per trial: boundaries at 2, 5, 8 thinking tokens; base
/// thinking count is 9.
inline OracleFixture oracle_fixture() {
  OracleFixture fx;
  auto add = [&](const std::string& id, bool base_correct,
                 std::map<int, bool> cont_correct, int sentences = 3) {
    MarginTraceOptions m;
    m.sentences = sentences;
    m.words_per_sentence = 1;
    m.base_correct = base_correct;
    m.continuation_correct = std::move(cont_correct);
    // No finite margins: the oracle ignores them and policies never fire.
    fx.trials.push_back(make_margin_trial(id, m));
  };

  // 1. base correct, no boundary helps -> recoverable via base, base tokens.
  add("orc-1", true, {{1, false}, {2, false}, {3, false}});
  fx.expected.push_back({"orc-1", true, true, 9});
  // 2. base correct, boundary 1 already correct -> earliest tokens = 2.
  add("orc-2", true, {{1, true}, {2, false}, {3, false}});
  fx.expected.push_back({"orc-2", true, true, 2});
  // 3. base correct, only boundary 3 correct -> tokens = 8.
  add("orc-3", true, {{1, false}, {2, false}, {3, true}});
  fx.expected.push_back({"orc-3", true, true, 8});
  // 4. base wrong, boundary 2 of 3 correct -> tokens = 5.
  add("orc-4", false, {{1, false}, {2, true}, {3, false}});
  fx.expected.push_back({"orc-4", false, true, 5});
  // 5. base wrong, boundaries 1 and 3 correct -> earliest tokens = 2.
  add("orc-5", false, {{1, true}, {2, false}, {3, true}});
  fx.expected.push_back({"orc-5", false, true, 2});
  // 6. base wrong, nothing helps -> irrecoverable.
  add("orc-6", false, {{1, false}, {2, false}, {3, false}});
  fx.expected.push_back({"orc-6", false, false, std::nullopt});
  // 7. base wrong, single sentence (one boundary), still wrong.
  add("orc-7", false, {{1, false}}, /*sentences=*/1);
  fx.expected.push_back({"orc-7", false, false, std::nullopt});
  // 8. base correct, single sentence, boundary wrong -> base tokens = 3.
  add("orc-8", true, {{1, false}}, /*sentences=*/1);
  fx.expected.push_back({"orc-8", true, true, 3});
  return fx;
}

inline RunPolicyOptions default_run_options() {
  RunPolicyOptions opt;
  opt.stop_sequences = {};
  return opt;
}

}  // namespace thinkbrake::testing
