#include "thinkbrake/recorder.hpp"

#include <algorithm>

namespace thinkbrake {

namespace {

std::string key_of(const std::string& trial_hint, const std::string& prompt) {
  return trial_hint.empty() ? prompt : trial_hint;
}

}  // namespace

class TeeStream : public TokenStream {
 public:
  TeeStream(std::unique_ptr<TokenStream> inner, RecordingProvider* rec,
            std::string key)
      : inner_(std::move(inner)), rec_(rec), key_(std::move(key)) {}

  std::optional<TokenEvent> next() override {
    auto ev = inner_->next();
    if (ev) rec_->record_event(key_, *ev);
    return ev;
  }

  void abort() override { inner_->abort(); }

 private:
  std::unique_ptr<TokenStream> inner_;
  RecordingProvider* rec_;
  std::string key_;
};

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner)
    : inner_(std::move(inner)) {}

ScriptedTrace& RecordingProvider::trace_for(const std::string& trial_hint,
                                            const std::string& prompt) {
  const std::string key = key_of(trial_hint, prompt);
  ScriptedTrace& t = traces_[key];
  if (t.trial_id.empty()) {
    t.trial_id = trial_hint.empty() ? key : trial_hint;
    t.prompt = prompt;
  }
  return t;
}

void RecordingProvider::record_event(const std::string& key,
                                     const TokenEvent& ev) {
  std::lock_guard<std::mutex> lock(mu_);
  traces_[key].main_path.push_back(ev);
}

std::unique_ptr<TokenStream> RecordingProvider::stream_generate(
    const GenerationRequest& req) {
  auto stream = inner_->stream_generate(req);
  std::string key;
  {
    std::lock_guard<std::mutex> lock(mu_);
    ScriptedTrace& t = trace_for(req.trial_hint, req.prefix_text);
    t.main_path.clear();  // a fresh stream re-records the trial's path
    key = key_of(req.trial_hint, req.prefix_text);
  }
  return std::make_unique<TeeStream>(std::move(stream), this, key);
}

TopKDistribution RecordingProvider::probe_next(const std::string& prefix_text,
                                               int top_logprobs,
                                               const std::string& trial_hint) {
  TopKDistribution d = inner_->probe_next(prefix_text, top_logprobs, trial_hint);
  std::lock_guard<std::mutex> lock(mu_);
  ScriptedTrace* target = nullptr;
  if (!trial_hint.empty()) {
    auto it = traces_.find(trial_hint);
    if (it != traces_.end()) target = &it->second;
  } else {
    // No hint: attach to the recorded trace whose prompt prefixes the probe.
    for (auto& [_, t] : traces_)
      if (prefix_text.compare(0, t.prompt.size(), t.prompt) == 0 &&
          (!target || t.prompt.size() > target->prompt.size()))
        target = &t;
  }
  if (target) {
    auto t = longest_path_prefix(target->prompt, target->main_path, prefix_text);
    if (t) target->probes[*t] = d;
  }
  return d;
}

std::vector<TokenEvent> RecordingProvider::continue_from(
    const std::string& prefix_text, const std::string& injection,
    const GenerationRequest& req) {
  auto events = inner_->continue_from(prefix_text, injection, req);
  std::lock_guard<std::mutex> lock(mu_);
  ScriptedTrace* target = nullptr;
  if (!req.trial_hint.empty()) {
    target = &trace_for(req.trial_hint, prefix_text);
  } else {
    for (auto& [_, t] : traces_)
      if (prefix_text.compare(0, t.prompt.size(), t.prompt) == 0 &&
          (!target || t.prompt.size() > target->prompt.size()))
        target = &t;
    if (!target) target = &trace_for("", prefix_text);
  }
  auto at = exact_path_prefix(target->prompt, target->main_path, prefix_text);
  if (!at)
    at = longest_path_prefix(target->prompt, target->main_path, prefix_text);
  if (at) target->continuations[*at] = events;
  return events;
}

std::vector<ScriptedTrace> RecordingProvider::traces() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<ScriptedTrace> out;
  out.reserve(traces_.size());
  for (const auto& [_, t] : traces_) out.push_back(t);
  std::sort(out.begin(), out.end(),
            [](const ScriptedTrace& a, const ScriptedTrace& b) {
              return a.trial_id < b.trial_id;
            });
  return out;
}

void RecordingProvider::save(const std::string& path) const {
  save_scripted_traces(path, traces());
}

}  // namespace thinkbrake
