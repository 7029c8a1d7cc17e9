#include "thinkbrake/oracle.hpp"

#include "thinkbrake/harness.hpp"

#include "doctest.h"
#include "support/fixtures.hpp"

using namespace thinkbrake;
using namespace thinkbrake::testing;

namespace {

DecodeTranscript base_transcript_of(const MarginTrial& mt,
                                    ScriptedProvider& provider) {
  PolicyConfig cfg;  // base
  return run_policy(mt.trial, cfg, provider, default_run_options()).transcript;
}

}  // namespace

TEST_CASE("enumerate_boundaries walks newline-terminated sentences") {
  SpecialTokens sp;
  TraceBuilder b("e-1", "P");
  b.push(sp.think_open.text, -0.01);
  b.push("A.", -0.1);
  b.push("\n", -0.1);
  b.push("B.", -0.1);
  b.push("\n", -0.1);
  b.push("C.", -0.1);
  b.push(sp.think_close.text, -0.01);
  DecodeTranscript t;
  t.trial_id = "e-1";
  t.events = b.trace().main_path;
  t.thinking_open_pos = 0;
  t.thinking_close_pos = 6;
  finalize_transcript(t);

  Trial trial = weather_trial("e-1");
  trial.prompt = "P";
  auto points = enumerate_boundaries(trial, t, BoundaryConfig{});
  REQUIRE(points.size() == 2);  // the trailing "C." never confirms
  CHECK(points[0].boundary_index == 1);
  CHECK(points[0].prefix_text == "P<think>A.");
  CHECK(points[0].thinking_tokens == 1);
  CHECK(points[1].prefix_text == "P<think>A.\nB.");
  CHECK(points[1].thinking_tokens == 3);
}

TEST_CASE("an empty thinking section has no boundaries") {
  SpecialTokens sp;
  TraceBuilder b("e-2", "P");
  b.push(sp.think_open.text, -0.01);
  b.push(sp.think_close.text, -0.01);
  DecodeTranscript t;
  t.trial_id = "e-2";
  t.events = b.trace().main_path;
  t.thinking_open_pos = 0;
  t.thinking_close_pos = 1;
  CHECK(enumerate_boundaries(weather_trial("e-2"), t, BoundaryConfig{})
            .empty());
}

TEST_CASE("enumerated boundaries line up with the fixture branch keys") {
  auto mt = make_margin_trial("e-3", {});
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);
  auto points = enumerate_boundaries(mt.trial, base, BoundaryConfig{});
  REQUIRE(points.size() == mt.consult_positions.size());
  for (size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].thinking_tokens == mt.boundary_tokens[i]);
    // prefix must address the recorded continuation branch exactly
    auto at = exact_path_prefix(mt.trace.prompt, mt.trace.main_path,
                                points[i].prefix_text);
    REQUIRE(at.has_value());
    CHECK(*at == mt.consult_positions[i]);
    CHECK(mt.trace.continuations.count(*at) == 1);
  }
}

TEST_CASE("oracle rollout: base wrong, middle boundary recovers") {
  MarginTraceOptions opt;
  opt.sentences = 3;
  opt.words_per_sentence = 1;
  opt.base_correct = false;
  opt.continuation_correct = {{1, false}, {2, true}, {3, false}};
  auto mt = make_margin_trial("or-1", opt);
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);

  OracleRolloutOptions ropt;
  auto res = oracle_rollout(mt.trial, base, /*base_correct=*/false, provider,
                            ropt);
  CHECK(res.recoverable);
  REQUIRE(res.oracle_thinking_tokens.has_value());
  CHECK(*res.oracle_thinking_tokens == mt.boundary_tokens[1]);
  REQUIRE(res.boundary_verdicts.size() == 3);
  CHECK_FALSE(res.boundary_verdicts[0].correct);
  CHECK(res.boundary_verdicts[1].correct);
}

TEST_CASE("oracle rollout: base correct with no helpful boundary") {
  MarginTraceOptions opt;
  opt.sentences = 2;
  opt.words_per_sentence = 1;
  opt.continuation_correct = {{1, false}, {2, false}};
  auto mt = make_margin_trial("or-2", opt);
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);
  auto res =
      oracle_rollout(mt.trial, base, /*base_correct=*/true, provider, {});
  CHECK(res.recoverable);
  REQUIRE(res.oracle_thinking_tokens.has_value());
  CHECK(*res.oracle_thinking_tokens == count_thinking_tokens(base));
}

TEST_CASE("oracle rollout: irrecoverable trial") {
  MarginTraceOptions opt;
  opt.sentences = 2;
  opt.words_per_sentence = 1;
  opt.base_correct = false;
  opt.continuation_correct = {{1, false}, {2, false}};
  auto mt = make_margin_trial("or-3", opt);
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);
  auto res =
      oracle_rollout(mt.trial, base, /*base_correct=*/false, provider, {});
  CHECK_FALSE(res.recoverable);
  CHECK_FALSE(res.oracle_thinking_tokens.has_value());
}

TEST_CASE("latest accounting picks the last correct boundary") {
  MarginTraceOptions opt;
  opt.sentences = 3;
  opt.words_per_sentence = 1;
  opt.base_correct = false;
  opt.continuation_correct = {{1, true}, {2, false}, {3, true}};
  auto mt = make_margin_trial("or-4", opt);
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);
  OracleRolloutOptions ropt;
  ropt.accounting = OracleAccounting::latest;
  auto res = oracle_rollout(mt.trial, base, false, provider, ropt);
  CHECK(*res.oracle_thinking_tokens == mt.boundary_tokens[2]);
  ropt.accounting = OracleAccounting::earliest;
  res = oracle_rollout(mt.trial, base, false, provider, ropt);
  CHECK(*res.oracle_thinking_tokens == mt.boundary_tokens[0]);
}

TEST_CASE("a missing continuation marks the boundary unknown, result partial") {
  MarginTraceOptions opt;
  opt.sentences = 2;
  opt.words_per_sentence = 1;
  opt.base_correct = false;
  opt.continuation_correct = {{1, false}, {2, true}};
  auto mt = make_margin_trial("or-5", opt);
  mt.trace.continuations.erase(mt.consult_positions[0]);
  ScriptedProvider provider({mt.trace});
  auto base = base_transcript_of(mt, provider);
  auto res = oracle_rollout(mt.trial, base, false, provider, {});
  CHECK(res.partial);
  REQUIRE(res.boundary_verdicts.size() == 2);
  CHECK_FALSE(res.boundary_verdicts[0].known);
  CHECK(res.boundary_verdicts[1].correct);
  CHECK(res.recoverable);
}

TEST_CASE("the hand-built oracle fixture reproduces its expectations") {
  auto fx = oracle_fixture();
  std::vector<ScriptedTrace> traces;
  for (const auto& mt : fx.trials) traces.push_back(mt.trace);
  ScriptedProvider provider(traces);

  for (size_t i = 0; i < fx.trials.size(); ++i) {
    const auto& mt = fx.trials[i];
    const auto& exp = fx.expected[i];
    auto base = base_transcript_of(mt, provider);
    auto res = oracle_rollout(mt.trial, base, exp.base_correct, provider, {});
    CAPTURE(exp.id);
    CHECK(res.recoverable == exp.recoverable);
    CHECK(res.oracle_thinking_tokens == exp.oracle_tokens);
  }
}

TEST_CASE("aggregate_oracle: 3 of 4 recoverable is 75%") {
  std::vector<OracleResult> results;
  std::vector<TrialRecord> base;
  for (int i = 0; i < 4; ++i) {
    OracleResult r;
    r.trial_id = "t" + std::to_string(i);
    r.category = Category::simple;
    r.base_correct = i == 0;
    r.recoverable = i < 3;
    if (i < 3) r.oracle_thinking_tokens = 10;
    results.push_back(r);
    TrialRecord rec;
    rec.trial_id = r.trial_id;
    rec.category = Category::simple;
    rec.thinking_tokens = 100;
    base.push_back(rec);
  }
  auto table = aggregate_oracle(results, base);
  CHECK(table.average.oracle_accuracy_pct == doctest::Approx(75.0));
  CHECK(table.average.base_accuracy_pct == doctest::Approx(25.0));
  // irrecoverable trial keeps its base count: (10+10+10+100)/4 vs 100
  CHECK(table.average.oracle_mean_tokens == doctest::Approx(32.5));
  CHECK(*table.average.delta_tok_pct == doctest::Approx(-67.5));
}

TEST_CASE("all base-correct at one tenth of the tokens gives -90%") {
  std::vector<OracleResult> results;
  std::vector<TrialRecord> base;
  for (int i = 0; i < 5; ++i) {
    OracleResult r;
    r.trial_id = "t" + std::to_string(i);
    r.category = Category::multiple;
    r.base_correct = true;
    r.recoverable = true;
    r.oracle_thinking_tokens = 10;
    results.push_back(r);
    TrialRecord rec;
    rec.trial_id = r.trial_id;
    rec.category = Category::multiple;
    rec.thinking_tokens = 100;
    base.push_back(rec);
  }
  auto table = aggregate_oracle(results, base);
  CHECK(*table.average.delta_tok_pct == doctest::Approx(-90.0));
  CHECK(table.average.oracle_accuracy_pct == doctest::Approx(100.0));
}

TEST_CASE("oracle dominance holds on every scripted run") {
  auto fx = oracle_fixture();
  std::vector<ScriptedTrace> traces;
  for (const auto& mt : fx.trials) traces.push_back(mt.trace);
  auto provider = std::make_shared<ScriptedProvider>(traces);

  RunConfig cfg;
  cfg.provider.trace_path = "unused";
  std::vector<Trial> trials;
  for (const auto& mt : fx.trials) trials.push_back(mt.trial);
  auto outputs = run_oracle(cfg, trials, *provider);
  CHECK(outputs.table.average.oracle_accuracy_pct >=
        outputs.table.average.base_accuracy_pct);
  for (const auto& [cat, row] : outputs.table.per_category)
    CHECK(row.oracle_accuracy_pct >= row.base_accuracy_pct);

  // token economy: every recoverable trial stops at or under its base count
  std::map<std::string, const TrialRecord*> base_by_id;
  for (const auto& r : outputs.base_records) base_by_id[r.trial_id] = &r;
  for (const auto& r : outputs.results)
    if (r.oracle_thinking_tokens)
      CHECK(*r.oracle_thinking_tokens <=
            base_by_id.at(r.trial_id)->thinking_tokens);
}
