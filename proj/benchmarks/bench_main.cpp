// Microbenchmarks for the hot paths: boundary detection over streamed text,
// margin decisions, evaluator matching, and scripted replay.

#include "thinkbrake/boundary.hpp"
#include "thinkbrake/policy.hpp"
#include "thinkbrake/scripted.hpp"
#include "thinkbrake/toolcall.hpp"

#include "support/fixtures.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace thinkbrake;
using namespace thinkbrake::testing;

namespace {

std::vector<std::string> sample_tokens(size_t count) {
  std::mt19937_64 rng(17);
  std::vector<std::string> tokens;
  tokens.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    switch (rng() % 8) {
      case 0: tokens.push_back(".");
        break;
      case 1: tokens.push_back("\n");
        break;
      case 2: tokens.push_back(" 3.14");
        break;
      default:
        tokens.push_back(word_pool()[rng() % word_pool().size()]);
    }
  }
  return tokens;
}

void BM_BoundaryDetectorFeed(benchmark::State& state) {
  const auto tokens = sample_tokens(4096);
  for (auto _ : state) {
    BoundaryDetector det;
    size_t boundaries = 0;
    for (const auto& t : tokens) boundaries += det.feed_token(t).at_boundary;
    benchmark::DoNotOptimize(boundaries);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(tokens.size()));
}
BENCHMARK(BM_BoundaryDetectorFeed);

void BM_ThinkbrakeDecide(benchmark::State& state) {
  SpecialTokens sp;
  TopKDistribution d;
  d.entries.push_back({1, " the", -0.05});
  d.entries.push_back({sp.think_close.id, sp.think_close.text, -0.31});
  for (int i = 0; i < 18; ++i)
    d.entries.push_back({100 + i, " alt" + std::to_string(i), -4.0 - i});
  PolicyConfig cfg;
  cfg.kind = PolicyKind::thinkbrake;
  for (auto _ : state) {
    auto decision = thinkbrake_decide(d, sp, cfg);
    benchmark::DoNotOptimize(decision);
  }
}
BENCHMARK(BM_ThinkbrakeDecide);

void BM_EvaluateParallelTrial(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  GroundTruthSpec gt;
  std::vector<ToolCall> calls;
  for (int i = 0; i < n; ++i) {
    GroundTruthCall opt;
    opt.name = "tool" + std::to_string(i);
    opt.params["v"] = {json(i)};
    opt.required = {"v"};
    gt.options.push_back(opt);
    calls.push_back(ToolCall{opt.name, json{{"v", i}}});
  }
  std::reverse(calls.begin(), calls.end());
  ParsedCalls parsed{calls, std::nullopt};
  for (auto _ : state) {
    auto v = evaluate_trial(parsed, gt, Category::multi_parallel);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_EvaluateParallelTrial)->Arg(2)->Arg(4)->Arg(8);

void BM_ScriptedReplay(benchmark::State& state) {
  MarginTraceOptions opt;
  opt.sentences = 32;
  opt.words_per_sentence = 4;
  auto mt = make_margin_trial("bench", opt);
  ScriptedProvider provider({mt.trace});
  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  req.max_tokens = 1 << 20;
  req.trial_hint = mt.trial.id;
  for (auto _ : state) {
    auto stream = provider.stream_generate(req);
    size_t events = 0;
    while (stream->next()) ++events;
    benchmark::DoNotOptimize(events);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(mt.trace.main_path.size()));
}
BENCHMARK(BM_ScriptedReplay);

void BM_RunPolicyThinkbrake(benchmark::State& state) {
  MarginTraceOptions opt;
  opt.sentences = 16;
  opt.words_per_sentence = 4;
  opt.margins = std::vector<double>(16, 2.0);
  opt.margins.back() = 0.1;
  auto mt = make_margin_trial("bench-rp", opt);
  ScriptedProvider provider({mt.trace});
  PolicyConfig cfg;
  cfg.kind = PolicyKind::thinkbrake;
  auto ropt = default_run_options();
  for (auto _ : state) {
    auto res = run_policy(mt.trial, cfg, provider, ropt);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_RunPolicyThinkbrake);

}  // namespace

BENCHMARK_MAIN();
