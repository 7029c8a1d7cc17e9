#include "thinkbrake/config.hpp"
#include "thinkbrake/dataset.hpp"

#include "doctest.h"
#include "support/fixtures.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace thinkbrake;
using namespace thinkbrake::testing;

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TB_CLI_PATH) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string circle_parallel_answer() {
  json area{{"name", "circle.calculate_area"},
            {"arguments", json{{"radius", 5}}}};
  json circ{{"name", "circle.calculate_circumference"},
            {"arguments", json{{"diameter", 10}}}};
  return "<tool_call>" + area.dump() + "</tool_call>\n<tool_call>" +
         circ.dump() + "</tool_call>";
}

/// Workspace with the fixture dataset, matching scripted traces, and a
/// config file, as a user of the CLI would lay them out.
struct CliWorkspace {
  fs::path dir;
  fs::path config;
  fs::path traces;
  fs::path out;

  CliWorkspace() {
    dir = fs::path(TB_TEST_TMP_DIR) / "cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    out = dir / "out";
    traces = dir / "traces.jsonl";

    auto trials =
        load_dataset(std::string(TB_TEST_DATA_DIR) + "/dataset/manifest.json",
                     "");
    std::vector<ScriptedTrace> ts;
    for (const auto& trial : trials) {
      MarginTraceOptions opt;
      opt.sentences = 3;
      opt.words_per_sentence = 1;
      opt.margins = {0.9, 0.15, 0.6};
      opt.trial = trial;
      if (trial.category == Category::parallel) {
        opt.correct_answer = circle_parallel_answer();
        opt.wrong_answer = "<tool_call>{\"name\":\"oops\"}</tool_call>";
      } else {
        opt.correct_answer = weather_call_text("paris");
        opt.wrong_answer = weather_call_text("london");
      }
      opt.base_correct = trial.id != "simple_1";
      ts.push_back(make_margin_trial(trial.id, opt).trace);
    }
    save_scripted_traces(traces.string(), ts);

    config = dir / "cfg.json";
    std::ofstream cfg(config);
    cfg << json{{"dataset", std::string(TB_TEST_DATA_DIR) +
                                "/dataset/manifest.json"},
                {"provider",
                 json{{"kind", "scripted"}, {"trace_path", traces.string()}}},
                {"policy", json{{"method", "base"}}},
                {"output_dir", out.string()},
                {"stop", json::array()}}
               .dump(2);
  }
};

}  // namespace

TEST_CASE("cli: run executes a scripted benchmark and writes every output") {
  CliWorkspace ws;
  CHECK(run_cli("run --config " + ws.config.string()) == 0);
  CHECK(fs::exists(ws.out / "records.jsonl"));
  CHECK(fs::exists(ws.out / "report.md"));
  CHECK(fs::exists(ws.out / "report.json"));
  CHECK(fs::exists(ws.out / "transcripts.jsonl"));

  auto records = load_records((ws.out / "records.jsonl").string());
  REQUIRE(records.size() == 3);
  int correct = 0;
  for (const auto& r : records) correct += r.correct ? 1 : 0;
  CHECK(correct == 2);  // simple_1's base answer is wrong by construction
}

TEST_CASE("cli: method and tau overrides select the margin rule") {
  CliWorkspace ws;
  CHECK(run_cli("run --config " + ws.config.string() +
                " --method thinkbrake --tau 0.25") == 0);
  auto records = load_records((ws.out / "records.jsonl").string());
  for (const auto& r : records) {
    CHECK(r.method == "thinkbrake");
    CHECK(r.thinking_tokens == 5);  // terminates at boundary 2 of the fixture
    CHECK(r.correct);               // every continuation is correct
  }
}

TEST_CASE("cli: evaluate re-scores records offline") {
  CliWorkspace ws;
  REQUIRE(run_cli("run --config " + ws.config.string()) == 0);
  // Offline evaluation only covers trials present in the ground-truth file.
  const fs::path eval_out = ws.dir / "eval";
  // Re-score the simple-category records against the simple answers file:
  // filter the records first.
  auto records = load_records((ws.out / "records.jsonl").string());
  std::vector<TrialRecord> simple_only;
  for (const auto& r : records)
    if (r.category == Category::simple) simple_only.push_back(r);
  const fs::path simple_records = ws.dir / "simple_records.jsonl";
  save_records(simple_records.string(), simple_only);

  CHECK(run_cli("evaluate --records " + simple_records.string() +
                " --ground-truth " + std::string(TB_TEST_DATA_DIR) +
                "/dataset/answers_simple.jsonl --output " +
                eval_out.string()) == 0);
  auto rescored = load_records((eval_out / "records.jsonl").string());
  REQUIRE(rescored.size() == simple_only.size());
  for (size_t i = 0; i < rescored.size(); ++i)
    CHECK(rescored[i].correct == simple_only[i].correct);
}

TEST_CASE("cli: report renders from existing records") {
  CliWorkspace ws;
  REQUIRE(run_cli("run --config " + ws.config.string()) == 0);
  const fs::path report_out = ws.dir / "rep";
  CHECK(run_cli("report --records " + (ws.out / "records.jsonl").string() +
                " --output " + report_out.string()) == 0);
  CHECK(fs::exists(report_out / "report.md"));
}

TEST_CASE("cli: oracle emits the analysis table on scripted fixtures") {
  CliWorkspace ws;
  CHECK(run_cli("oracle --config " + ws.config.string()) == 0);
  CHECK(fs::exists(ws.out / "oracle.md"));
  CHECK(fs::exists(ws.out / "oracle.json"));
  CHECK(fs::exists(ws.out / "oracle_results.jsonl"));
  std::ifstream in(ws.out / "oracle.json");
  json j = json::parse(in);
  CHECK(j["average"]["oracle_accuracy_pct"].get<double>() >=
        j["average"]["base_accuracy_pct"].get<double>());
}

TEST_CASE("cli: sweep writes the tau frontier") {
  CliWorkspace ws;
  CHECK(run_cli("sweep --config " + ws.config.string() +
                " --grid 0,0.25,inf") == 0);
  CHECK(fs::exists(ws.out / "sweep.md"));
  CHECK(fs::exists(ws.out / "sweep.json"));
}

TEST_CASE("cli: record produces a replayable trace file") {
  CliWorkspace ws;
  const fs::path rec_out = ws.dir / "rec";
  CHECK(run_cli("record --config " + ws.config.string() + " --output " +
                rec_out.string()) == 0);
  CHECK(fs::exists(rec_out / "traces.jsonl"));
  auto traces = load_scripted_traces((rec_out / "traces.jsonl").string());
  CHECK(traces.size() == 3);
}

TEST_CASE("cli: exit codes distinguish config and provider failures") {
  CliWorkspace ws;
  CHECK(run_cli("run --config /nonexistent.json") == 2);
  CHECK(run_cli("run --config " + ws.config.string() +
                " --trace /nonexistent-traces.jsonl") == 3);
  CHECK(run_cli("report --records " + ws.config.string()) != 0);
  CHECK(run_cli("definitely-not-a-verb") != 0);
  CHECK(run_cli("run --config " + ws.config.string() + " --no-such-flag") !=
        0);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("run --help") == 0);
}
