#include "thinkbrake/scripted.hpp"

#include <algorithm>
#include <fstream>

namespace thinkbrake {

TopKDistribution apply_bias(const TopKDistribution& d, const BiasMap& bias) {
  TopKDistribution out = d;
  for (auto& e : out.entries) {
    auto it = bias.entries.find(e.token_id);
    if (it != bias.entries.end()) e.logprob += it->second;
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const LogProbEntry& a, const LogProbEntry& b) {
                     return a.logprob > b.logprob;
                   });
  return out;
}

void to_json(json& j, const ScriptedTrace& t) {
  j = json{{"trial_id", t.trial_id},
           {"prompt", t.prompt},
           {"main_path", t.main_path}};
  json conts = json::array();
  for (const auto& [k, v] : t.continuations)
    conts.push_back(json{{"after_tokens", k}, {"tokens", v}});
  json probes = json::array();
  for (const auto& [k, v] : t.probes)
    probes.push_back(json{{"after_tokens", k}, {"top", v}});
  j["continuations"] = std::move(conts);
  j["probes"] = std::move(probes);
}

void from_json(const json& j, ScriptedTrace& t) {
  j.at("trial_id").get_to(t.trial_id);
  j.at("prompt").get_to(t.prompt);
  j.at("main_path").get_to(t.main_path);
  t.continuations.clear();
  t.probes.clear();
  if (j.contains("continuations"))
    for (const auto& c : j.at("continuations"))
      t.continuations[c.at("after_tokens").get<int>()] =
          c.at("tokens").get<std::vector<TokenEvent>>();
  if (j.contains("probes"))
    for (const auto& p : j.at("probes"))
      t.probes[p.at("after_tokens").get<int>()] =
          p.at("top").get<TopKDistribution>();
}

namespace {

void validate_trace(const ScriptedTrace& t, const std::string& where) {
  if (t.trial_id.empty())
    throw GatewayError(where + ": empty trial_id");
  const int n = static_cast<int>(t.main_path.size());
  for (int i = 0; i < n; ++i) {
    const TokenEvent& e = t.main_path[i];
    if (e.position != i)
      throw GatewayError(where + ": main_path positions must be 0..n-1");
    e.alternatives.validate();
    if (!(e.emitted == e.alternatives.entries.front()))
      throw GatewayError(where + ": emitted token must be the top entry at position " +
                         std::to_string(i));
  }
  for (const auto& [k, v] : t.continuations) {
    if (k < 0 || k > n)
      throw GatewayError(where + ": continuation after_tokens=" + std::to_string(k) +
                         " beyond main path (" + std::to_string(n) + " events)");
    for (const auto& e : v) e.alternatives.validate();
  }
  for (const auto& [k, v] : t.probes) {
    if (k < 0 || k > n)
      throw GatewayError(where + ": probe after_tokens=" + std::to_string(k) +
                         " beyond main path (" + std::to_string(n) + " events)");
    v.validate();
  }
}

}  // namespace

std::vector<ScriptedTrace> load_scripted_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GatewayError("cannot open scripted trace file: " + path);
  std::vector<ScriptedTrace> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw GatewayError(where + ": invalid JSON");
    ScriptedTrace t;
    try {
      t = j.get<ScriptedTrace>();
    } catch (const std::exception& e) {
      throw GatewayError(where + ": " + e.what());
    }
    validate_trace(t, where);
    out.push_back(std::move(t));
  }
  return out;
}

void save_scripted_traces(const std::string& path,
                          const std::vector<ScriptedTrace>& traces) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw GatewayError("cannot write scripted trace file: " + path);
  for (const auto& t : traces) out << json(t).dump() << "\n";
}

std::optional<int> longest_path_prefix(const std::string& prompt,
                                       const std::vector<TokenEvent>& path,
                                       std::string_view full_text) {
  if (full_text.substr(0, prompt.size()) != prompt) return std::nullopt;
  std::string_view rest = full_text.substr(prompt.size());
  size_t consumed = 0;
  int t = 0;
  for (const auto& e : path) {
    const std::string& txt = e.emitted.token_text;
    if (rest.substr(consumed, txt.size()) != txt) break;
    consumed += txt.size();
    ++t;
  }
  return t;
}

std::optional<int> exact_path_prefix(const std::string& prompt,
                                     const std::vector<TokenEvent>& path,
                                     std::string_view full_text) {
  auto t = longest_path_prefix(prompt, path, full_text);
  if (!t) return std::nullopt;
  size_t len = prompt.size();
  for (int i = 0; i < *t; ++i) len += path[i].emitted.token_text.size();
  if (len != full_text.size()) return std::nullopt;
  return t;
}

namespace {

class ReplayStream : public TokenStream {
 public:
  explicit ReplayStream(std::vector<TokenEvent> events)
      : events_(std::move(events)) {}

  std::optional<TokenEvent> next() override {
    if (aborted_ || idx_ >= events_.size()) return std::nullopt;
    return events_[idx_++];
  }

  void abort() override { aborted_ = true; }

 private:
  std::vector<TokenEvent> events_;
  size_t idx_ = 0;
  bool aborted_ = false;
};

std::vector<TokenEvent> biased_path(const std::vector<TokenEvent>& path,
                                    const std::optional<BiasMap>& bias,
                                    size_t max_tokens,
                                    const std::string& trial_id) {
  std::vector<TokenEvent> out;
  out.reserve(std::min(path.size(), max_tokens));
  for (const auto& e : path) {
    if (out.size() >= max_tokens) break;
    if (bias && !bias->empty()) {
      TokenEvent adj = e;
      adj.alternatives = apply_bias(e.alternatives, *bias);
      if (adj.alternatives.entries.front().token_id != e.emitted.token_id)
        throw GatewayError("scripted trace " + trial_id +
                           " diverged under logit bias at position " +
                           std::to_string(e.position) +
                           " (recorded path cannot answer counterfactual decoding)");
      adj.emitted = adj.alternatives.entries.front();
      out.push_back(std::move(adj));
    } else {
      out.push_back(e);
    }
  }
  return out;
}

}  // namespace

ScriptedProvider::ScriptedProvider(std::vector<ScriptedTrace> traces)
    : traces_(std::move(traces)) {
  for (size_t i = 0; i < traces_.size(); ++i) {
    if (!by_id_.emplace(traces_[i].trial_id, i).second)
      throw GatewayError("duplicate trial_id in scripted traces: " +
                         traces_[i].trial_id);
  }
}

const ScriptedTrace& ScriptedProvider::resolve(
    const std::string& prefix_text, const std::string& trial_hint) const {
  if (!trial_hint.empty()) {
    auto it = by_id_.find(trial_hint);
    if (it == by_id_.end())
      throw GatewayError("no scripted trace for trial " + trial_hint);
    return traces_[it->second];
  }
  const ScriptedTrace* best = nullptr;
  for (const auto& t : traces_) {
    if (prefix_text.compare(0, t.prompt.size(), t.prompt) != 0) continue;
    if (!best || t.prompt.size() > best->prompt.size()) best = &t;
  }
  if (!best)
    throw GatewayError("no scripted trace matches the request prefix");
  return *best;
}

std::unique_ptr<TokenStream> ScriptedProvider::stream_generate(
    const GenerationRequest& req) {
  const ScriptedTrace& t = resolve(req.prefix_text, req.trial_hint);
  if (req.prefix_text != t.prompt)
    throw GatewayError("scripted trace " + t.trial_id +
                       ": stream prefix does not equal the recorded prompt");
  return std::make_unique<ReplayStream>(biased_path(
      t.main_path, req.bias, static_cast<size_t>(req.max_tokens), t.trial_id));
}

const TopKDistribution& ScriptedProvider::probe_for(
    const ScriptedTrace& trace, std::string_view full_prefix) const {
  auto tmax = longest_path_prefix(trace.prompt, trace.main_path, full_prefix);
  if (tmax) {
    for (int t = *tmax; t >= 0; --t) {
      auto it = trace.probes.find(t);
      if (it != trace.probes.end()) return it->second;
    }
  }
  throw GatewayError("no probe recorded for trial " + trace.trial_id +
                     (tmax ? " at after_tokens<=" + std::to_string(*tmax)
                           : " (prefix does not match the prompt)"));
}

TopKDistribution ScriptedProvider::probe_next(const std::string& prefix_text,
                                              int /*top_logprobs*/,
                                              const std::string& trial_hint) {
  const ScriptedTrace& t = resolve(prefix_text, trial_hint);
  return probe_for(t, prefix_text);
}

const std::vector<TokenEvent>& ScriptedProvider::continuation_for(
    const ScriptedTrace& trace, std::string_view full_prefix) const {
  auto tmax = longest_path_prefix(trace.prompt, trace.main_path, full_prefix);
  if (tmax) {
    for (int t = *tmax; t >= 0; --t) {
      auto it = trace.continuations.find(t);
      if (it != trace.continuations.end()) return it->second;
    }
  }
  throw GatewayError("no continuation recorded for trial " + trace.trial_id +
                     (tmax ? " at after_tokens<=" + std::to_string(*tmax)
                           : " (prefix does not match the prompt)"));
}

std::vector<TokenEvent> ScriptedProvider::continue_from(
    const std::string& prefix_text, const std::string& /*injection*/,
    const GenerationRequest& req) {
  const ScriptedTrace& t = resolve(prefix_text, req.trial_hint);
  auto exact = exact_path_prefix(t.prompt, t.main_path, prefix_text);
  if (!exact)
    throw GatewayError("scripted trace " + t.trial_id +
                       ": continuation prefix does not align with the "
                       "recorded token path");
  auto it = t.continuations.find(*exact);
  if (it == t.continuations.end())
    throw GatewayError("no continuation recorded for trial " + t.trial_id +
                       " at after_tokens=" + std::to_string(*exact));
  auto out = it->second;
  if (out.size() > static_cast<size_t>(req.max_tokens))
    out.resize(static_cast<size_t>(req.max_tokens));
  return out;
}

std::shared_ptr<ScriptedProvider> load_scripted(const std::string& path) {
  return std::make_shared<ScriptedProvider>(load_scripted_traces(path));
}

}  // namespace thinkbrake
