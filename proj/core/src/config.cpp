#include "thinkbrake/config.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace thinkbrake {

namespace fs = std::filesystem;

namespace {

std::string resolve_path(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base_dir / path).lexically_normal().string();
}

void load_policy(const json& j, PolicyConfig& p) {
  if (j.contains("method")) {
    auto kind = policy_kind_from_string(j["method"].get<std::string>());
    if (!kind)
      throw ConfigError("config: unknown method '" +
                        j["method"].get<std::string>() + "'");
    p.kind = *kind;
  }
  p.tau_threshold = j.value("tau", p.tau_threshold);
  p.tau_threshold_prob = j.value("tau_prob", p.tau_threshold_prob);
  if (j.contains("keywords"))
    p.keywords = j["keywords"].get<std::vector<std::string>>();
  p.confidence_k = j.value("confidence_k", p.confidence_k);
  p.confidence_threshold =
      j.value("confidence_threshold", p.confidence_threshold);
  p.confidence_terminate_above =
      j.value("confidence_terminate_above", p.confidence_terminate_above);
  p.confidence_require_toolcall_top = j.value(
      "confidence_require_toolcall_top", p.confidence_require_toolcall_top);
  p.max_thinking_tokens = j.value("max_thinking_tokens", p.max_thinking_tokens);
  p.suppression_bias = j.value("suppression_bias", p.suppression_bias);
}

void load_boundary(const json& j, BoundaryConfig& b) {
  b.newline_is_boundary = j.value("newline_is_boundary", b.newline_is_boundary);
  if (j.contains("sentence_punct"))
    b.sentence_punct = j["sentence_punct"].get<std::vector<std::string>>();
  b.require_following_whitespace = j.value("require_following_whitespace",
                                           b.require_following_whitespace);
}

void load_provider(const json& j, const fs::path& base_dir,
                   ProviderConfig& p) {
  const std::string kind = j.value("kind", "scripted");
  if (kind == "scripted") {
    p.kind = ProviderConfig::Kind::scripted;
    if (!j.contains("trace_path"))
      throw ConfigError("config: scripted provider requires trace_path");
    p.trace_path = resolve_path(base_dir, j["trace_path"].get<std::string>());
  } else if (kind == "live") {
    p.kind = ProviderConfig::Kind::live;
    if (!j.contains("endpoint"))
      throw ConfigError("config: live provider requires endpoint");
    p.live.base_url = j["endpoint"].get<std::string>();
    p.live.completions_path =
        j.value("completions_path", p.live.completions_path);
    p.live.model = j.value("model", p.live.model);
    p.live.api_key_env = j.value("api_key_env", p.live.api_key_env);
    p.live.timeout_s = j.value("timeout_s", p.live.timeout_s);
    p.live.retries = j.value("retries", p.live.retries);
    p.live.retry_backoff_ms = j.value("retry_backoff_ms", p.live.retry_backoff_ms);
    p.live.supports_logit_bias =
        j.value("supports_logit_bias", p.live.supports_logit_bias);
    p.live.use_streaming = j.value("stream", p.live.use_streaming);
  } else {
    throw ConfigError("config: unknown provider kind '" + kind + "'");
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError(path + ": invalid JSON");

  const fs::path base_dir = fs::path(path).parent_path();
  RunConfig cfg;
  if (j.contains("dataset"))
    cfg.dataset_manifest = resolve_path(base_dir, j["dataset"].get<std::string>());
  if (j.contains("provider")) load_provider(j["provider"], base_dir, cfg.provider);
  if (j.contains("policy")) load_policy(j["policy"], cfg.policy);
  if (j.contains("boundary")) load_boundary(j["boundary"], cfg.boundary);
  if (j.contains("specials")) cfg.specials = j["specials"].get<SpecialTokens>();
  cfg.separator = j.value("separator", cfg.separator);
  cfg.concurrency = j.value("concurrency", cfg.concurrency);
  if (j.contains("output_dir"))
    cfg.output_dir = resolve_path(base_dir, j["output_dir"].get<std::string>());
  cfg.record_traces = j.value("record_traces", cfg.record_traces);
  if (j.contains("base_records") && !j["base_records"].is_null())
    cfg.base_records_path =
        resolve_path(base_dir, j["base_records"].get<std::string>());
  cfg.max_answer_tokens = j.value("max_answer_tokens", cfg.max_answer_tokens);
  cfg.max_total_tokens = j.value("max_total_tokens", cfg.max_total_tokens);
  cfg.top_logprobs = j.value("top_logprobs", cfg.top_logprobs);
  if (j.contains("stop"))
    cfg.stop_sequences = j["stop"].get<std::vector<std::string>>();
  if (j.contains("vocab") && j["vocab"].is_object()) {
    for (auto it = j["vocab"].begin(); it != j["vocab"].end(); ++it)
      cfg.vocab[it.key()] = it.value().get<int64_t>();
  } else if (j.contains("vocab_path")) {
    const std::string vpath =
        resolve_path(base_dir, j["vocab_path"].get<std::string>());
    std::ifstream vin(vpath);
    if (!vin) throw ConfigError("cannot open vocab file: " + vpath);
    json vj = json::parse(vin, nullptr, /*allow_exceptions=*/false);
    if (vj.is_discarded() || !vj.is_object())
      throw ConfigError(vpath + ": vocab must be a JSON object of text -> id");
    for (auto it = vj.begin(); it != vj.end(); ++it)
      cfg.vocab[it.key()] = it.value().get<int64_t>();
  }
  if (j.contains("oracle")) {
    const std::string acc = j["oracle"].value("accounting", "earliest");
    if (acc == "earliest")
      cfg.oracle_accounting = OracleAccounting::earliest;
    else if (acc == "latest")
      cfg.oracle_accounting = OracleAccounting::latest;
    else
      throw ConfigError("config: oracle.accounting must be earliest|latest");
  }
  if (j.contains("prompt_template")) {
    cfg.prompt_template = j["prompt_template"].get<std::string>();
  } else if (j.contains("prompt_template_path")) {
    const std::string tpath =
        resolve_path(base_dir, j["prompt_template_path"].get<std::string>());
    std::ifstream tin(tpath);
    if (!tin) throw ConfigError("cannot open prompt template: " + tpath);
    std::ostringstream ss;
    ss << tin.rdbuf();
    cfg.prompt_template = ss.str();
  }
  cfg.run_label = j.value("run_label", cfg.run_label);
  return cfg;
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
  if (o.method) {
    auto kind = policy_kind_from_string(*o.method);
    if (!kind) throw ConfigError("unknown --method '" + *o.method + "'");
    cfg.policy.kind = *kind;
  }
  if (o.tau) cfg.policy.tau_threshold = *o.tau;
  if (o.endpoint) {
    cfg.provider.kind = ProviderConfig::Kind::live;
    cfg.provider.live.base_url = *o.endpoint;
  }
  if (o.model) cfg.provider.live.model = *o.model;
  if (o.dataset) cfg.dataset_manifest = *o.dataset;
  if (o.trace_path) {
    cfg.provider.kind = ProviderConfig::Kind::scripted;
    cfg.provider.trace_path = *o.trace_path;
  }
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.base_records) cfg.base_records_path = *o.base_records;
  if (o.record_traces) cfg.record_traces = *o.record_traces;
  if (o.concurrency) cfg.concurrency = *o.concurrency;
}

std::vector<double> parse_tau_grid(const std::string& grid) {
  std::vector<double> out;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t b = item.find_first_not_of(" \t");
    size_t e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, e - b + 1);
    if (item == "inf" || item == "+inf" || item == "infinity")
      out.push_back(std::numeric_limits<double>::infinity());
    else {
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("invalid tau value in grid: '" + item + "'");
      }
    }
  }
  if (out.empty()) throw ConfigError("sweep: empty tau grid");
  return out;
}

}  // namespace thinkbrake
