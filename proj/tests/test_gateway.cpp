#include "thinkbrake/scripted.hpp"

#include "thinkbrake/http_provider.hpp"
#include "thinkbrake/policy.hpp"
#include "thinkbrake/recorder.hpp"

#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/mock_server.hpp"

#include <filesystem>
#include <fstream>

using namespace thinkbrake;
using namespace thinkbrake::testing;

namespace {

std::filesystem::path tmp_dir() {
  std::filesystem::path dir = TB_TEST_TMP_DIR;
  std::filesystem::create_directories(dir);
  return dir;
}

MarginTrial small_trial(const std::string& id = "gw-1") {
  MarginTraceOptions opt;
  opt.sentences = 3;
  opt.words_per_sentence = 1;
  opt.margins = {0.5, 0.1, 0.9};
  return make_margin_trial(id, opt);
}

}  // namespace

TEST_CASE("scripted replay yields exactly the recorded main path") {
  auto mt = small_trial();
  ScriptedProvider provider({mt.trace});
  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  req.max_tokens = 1000;
  auto stream = provider.stream_generate(req);
  std::vector<TokenEvent> events;
  while (auto ev = stream->next()) events.push_back(std::move(*ev));
  CHECK(events == mt.trace.main_path);
}

TEST_CASE("aborting a stream stops delivery and keeps the provider usable") {
  auto mt = small_trial();
  ScriptedProvider provider({mt.trace});
  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  auto stream = provider.stream_generate(req);
  REQUIRE(stream->next().has_value());
  REQUIRE(stream->next().has_value());
  REQUIRE(stream->next().has_value());
  stream->abort();
  CHECK_FALSE(stream->next().has_value());

  auto again = provider.stream_generate(req);
  int count = 0;
  while (again->next()) ++count;
  CHECK(count == static_cast<int>(mt.trace.main_path.size()));
}

TEST_CASE("probes replay verbatim and unknown keys error") {
  auto mt = small_trial();
  TopKDistribution d;
  d.entries = {{1, "<tool_call>", -0.001}, {2, " x", -5.0}};
  mt.trace.probes[mt.consult_positions[1]] = d;
  ScriptedProvider provider({mt.trace});

  std::string prefix = mt.trial.prompt;
  for (int i = 0; i < mt.consult_positions[1]; ++i)
    prefix += mt.trace.main_path[i].emitted.token_text;
  CHECK(provider.probe_next(prefix + "</think>\n\n", 2, mt.trial.id) == d);

  ScriptedProvider no_probes({small_trial("gw-2").trace});
  CHECK_THROWS_WITH_AS(
      no_probes.probe_next(mt.trial.prompt, 2, "gw-2"),
      doctest::Contains("no probe recorded"), GatewayError);
}

TEST_CASE("continuations replay verbatim; missing branch keys error") {
  auto mt = small_trial();
  ScriptedProvider provider({mt.trace});
  const int key = mt.consult_positions[0];
  std::string prefix = mt.trial.prompt;
  for (int i = 0; i < key; ++i)
    prefix += mt.trace.main_path[i].emitted.token_text;

  GenerationRequest req;
  req.prefix_text = prefix;
  req.max_tokens = 100;
  req.trial_hint = mt.trial.id;
  auto events = provider.continue_from(prefix, "</think>\n\n", req);
  CHECK(events == mt.trace.continuations.at(key));

  // a prefix cutting a token in half cannot match any branch
  CHECK_THROWS_AS(provider.continue_from(prefix.substr(0, prefix.size() - 1),
                                         "</think>\n\n", req),
                  GatewayError);
}

TEST_CASE("loading rejects branch keys beyond the main path, with line info") {
  auto mt = small_trial();
  ScriptedTrace bad = mt.trace;
  bad.continuations[static_cast<int>(bad.main_path.size()) + 5] =
      bad.continuations.begin()->second;
  const auto path = tmp_dir() / "bad_trace.jsonl";
  {
    std::ofstream out(path);
    out << json(mt.trace).dump() << "\n";
    out << json(bad).dump() << "\n";
  }
  CHECK_THROWS_WITH_AS(load_scripted(path.string()),
                       doctest::Contains(":2"), GatewayError);
}

TEST_CASE("loading reports invalid JSON with its line number") {
  const auto path = tmp_dir() / "bad_json.jsonl";
  {
    std::ofstream out(path);
    out << "{not json}\n";
  }
  CHECK_THROWS_WITH_AS(load_scripted(path.string()),
                       doctest::Contains(":1: invalid JSON"), GatewayError);
}

TEST_CASE("scripted traces survive a save/load round trip") {
  auto mt = small_trial("gw-rt");
  mt.trace.probes[mt.consult_positions[0]] =
      mt.trace.main_path[mt.consult_positions[0]].alternatives;
  const auto path = tmp_dir() / "roundtrip.jsonl";
  save_scripted_traces(path.string(), {mt.trace});
  auto loaded = load_scripted_traces(path.string());
  REQUIRE(loaded.size() == 1);
  CHECK(json(loaded[0]).dump() == json(mt.trace).dump());
}

TEST_CASE("bias replay re-ranks alternatives and rejects divergence") {
  auto mt = small_trial("gw-bias");
  // Put a suppressible candidate just under the top of one event; its id
  // must not collide with any fixture token id.
  const int64_t wait_id = 777777;
  auto& ev = mt.trace.main_path[2];
  ev.alternatives.entries.push_back({wait_id, " wait", ev.emitted.logprob - 0.01});
  std::stable_sort(ev.alternatives.entries.begin(),
                   ev.alternatives.entries.end(),
                   [](const LogProbEntry& a, const LogProbEntry& b) {
                     return a.logprob > b.logprob;
                   });
  ScriptedProvider provider({mt.trace});

  BiasMap bias;
  bias.entries[wait_id] = -100.0;
  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  req.bias = bias;
  auto stream = provider.stream_generate(req);
  while (auto e = stream->next())
    CHECK_FALSE(e->emitted.token_id == wait_id);

  // Biasing the emitted token itself makes the recorded path counterfactual.
  BiasMap divergent;
  divergent.entries[mt.trace.main_path[2].emitted.token_id] = -100.0;
  req.bias = divergent;
  CHECK_THROWS_WITH_AS(provider.stream_generate(req),
                       doctest::Contains("diverged under logit bias"),
                       GatewayError);
}

TEST_CASE("record-replay closure: a recorded run replays identically") {
  auto mt = small_trial("gw-rec");
  auto inner = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedTrace>{mt.trace});
  RecordingProvider recorder(inner);

  PolicyConfig cfg;
  cfg.kind = PolicyKind::thinkbrake;
  cfg.tau_threshold = 0.25;  // triggers at boundary 2 (margin 0.1)
  auto opt = default_run_options();
  auto first = run_policy(mt.trial, cfg, recorder, opt);
  REQUIRE(first.transcript.injected_close);

  auto traces = recorder.traces();
  REQUIRE(traces.size() == 1);
  ScriptedProvider replay(traces);
  auto second = run_policy(mt.trial, cfg, replay, opt);
  CHECK(json(second.transcript).dump() == json(first.transcript).dump());
}

TEST_CASE("live provider round trip against the in-process mock endpoint") {
  auto mt = small_trial("gw-live");
  auto scripted = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedTrace>{mt.trace});
  MockCompletionsServer server(scripted);

  LiveEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model = "fixture";
  cfg.retries = 1;
  cfg.retry_backoff_ms = 10;

  for (bool streaming : {true, false}) {
    cfg.use_streaming = streaming;
    HttpProvider live(cfg);
    GenerationRequest req;
    req.prefix_text = mt.trial.prompt;
    req.max_tokens = 1000;
    req.trial_hint = mt.trial.id;
    auto stream = live.stream_generate(req);
    std::vector<std::string> texts;
    while (auto ev = stream->next()) texts.push_back(ev->emitted.token_text);
    REQUIRE(texts.size() == mt.trace.main_path.size());
    for (size_t i = 0; i < texts.size(); ++i)
      CHECK(texts[i] == mt.trace.main_path[i].emitted.token_text);
  }
}

TEST_CASE("live stream abort mid-flight leaves the client usable") {
  auto mt = small_trial("gw-abort");
  auto scripted = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedTrace>{mt.trace});
  MockCompletionsServer server(scripted);

  LiveEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model = "fixture";
  HttpProvider live(cfg);

  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  req.max_tokens = 1000;
  auto stream = live.stream_generate(req);
  REQUIRE(stream->next().has_value());
  stream->abort();
  CHECK_FALSE(stream->next().has_value());

  auto fresh = live.stream_generate(req);
  int count = 0;
  while (fresh->next()) ++count;
  CHECK(count == static_cast<int>(mt.trace.main_path.size()));
}

TEST_CASE("a wrong completions path reads as a missing completion mode") {
  auto mt = small_trial("gw-404");
  auto scripted = std::make_shared<ScriptedProvider>(
      std::vector<ScriptedTrace>{mt.trace});
  MockCompletionsServer server(scripted);

  LiveEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.completions_path = "/v1/chat/completions";  // not served by the mock
  cfg.use_streaming = false;
  cfg.retries = 0;
  HttpProvider live(cfg);
  GenerationRequest req;
  req.prefix_text = mt.trial.prompt;
  CHECK_THROWS_WITH_AS(live.stream_generate(req),
                       doctest::Contains("endpoint lacks completion mode"),
                       GatewayError);
}

TEST_CASE("a choice without logprobs is rejected") {
  LiveEndpointConfig cfg;
  cfg.base_url = "http://unused";
  HttpProvider live(cfg);
  json choice{{"text", "hi"}, {"finish_reason", "stop"}};
  CHECK_THROWS_WITH(live.events_from_choice(choice, 0),
                    "provider lacks logprobs");
  choice["logprobs"] = nullptr;
  CHECK_THROWS_WITH(live.events_from_choice(choice, 0),
                    "provider lacks logprobs");
}

TEST_CASE("live provider surfaces connection failures as gateway errors") {
  LiveEndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";  // nothing listens here
  cfg.retries = 0;
  cfg.retry_backoff_ms = 1;
  cfg.timeout_s = 2;
  cfg.use_streaming = false;
  HttpProvider live(cfg);
  GenerationRequest req;
  req.prefix_text = "p";
  CHECK_THROWS_AS(live.stream_generate(req), GatewayError);
}
