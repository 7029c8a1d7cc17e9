#pragma once

// Deterministic replay provider. A ScriptedTrace records one trial's main
// decode path plus the branches a run may take off it: continuations (the
// completion produced when </think> is injected after a given number of
// main-path tokens) and probe distributions. Traces are stored as JSONL,
// one trial per line; the recorder (recorder.hpp) writes the same format.

#include "thinkbrake/gateway.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace thinkbrake {

struct ScriptedTrace {
  std::string trial_id;
  std::string prompt;
  std::vector<TokenEvent> main_path;
  // Branch keys count main-path tokens covered by the request prefix
  // ("after_tokens"); fixtures keep them on sentence boundaries.
  std::map<int, std::vector<TokenEvent>> continuations;
  std::map<int, TopKDistribution> probes;
};

void to_json(json& j, const ScriptedTrace& t);
void from_json(const json& j, ScriptedTrace& t);

std::vector<ScriptedTrace> load_scripted_traces(const std::string& path);
void save_scripted_traces(const std::string& path,
                          const std::vector<ScriptedTrace>& traces);

/// Largest t in [0, path.size()] such that prompt + text(path[0..t)) is a
/// prefix of full_text; nullopt when full_text does not start with prompt.
std::optional<int> longest_path_prefix(const std::string& prompt,
                                       const std::vector<TokenEvent>& path,
                                       std::string_view full_text);

/// t such that prompt + text(path[0..t)) equals full_text exactly.
std::optional<int> exact_path_prefix(const std::string& prompt,
                                     const std::vector<TokenEvent>& path,
                                     std::string_view full_text);

class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(std::vector<ScriptedTrace> traces);

  std::unique_ptr<TokenStream> stream_generate(
      const GenerationRequest& req) override;
  TopKDistribution probe_next(const std::string& prefix_text, int top_logprobs,
                              const std::string& trial_hint) override;
  std::vector<TokenEvent> continue_from(const std::string& prefix_text,
                                        const std::string& injection,
                                        const GenerationRequest& req) override;

  // Lookup helpers shared with the HTTP mock adapter in the test suite.
  const ScriptedTrace& resolve(const std::string& prefix_text,
                               const std::string& trial_hint) const;
  /// Continuation lookup tolerating a non-path remainder (prefix+injection
  /// merged into one string, as seen on the wire).
  const std::vector<TokenEvent>& continuation_for(const ScriptedTrace& trace,
                                                  std::string_view full_prefix) const;
  const TopKDistribution& probe_for(const ScriptedTrace& trace,
                                    std::string_view full_prefix) const;

  const std::vector<ScriptedTrace>& traces() const { return traces_; }

 private:
  std::vector<ScriptedTrace> traces_;
  std::map<std::string, size_t> by_id_;
};

std::shared_ptr<ScriptedProvider> load_scripted(const std::string& path);

}  // namespace thinkbrake
