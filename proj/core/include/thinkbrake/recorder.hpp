#pragma once

// Decorator that captures everything a provider serves into ScriptedTraces,
// so any run (live or scripted) can be replayed bit-for-bit later.

#include "thinkbrake/scripted.hpp"

#include <memory>
#include <mutex>

namespace thinkbrake {

class RecordingProvider : public Provider {
 public:
  explicit RecordingProvider(std::shared_ptr<Provider> inner);

  std::unique_ptr<TokenStream> stream_generate(
      const GenerationRequest& req) override;
  TopKDistribution probe_next(const std::string& prefix_text, int top_logprobs,
                              const std::string& trial_hint) override;
  std::vector<TokenEvent> continue_from(const std::string& prefix_text,
                                        const std::string& injection,
                                        const GenerationRequest& req) override;

  /// Snapshot of everything recorded so far, sorted by trial id.
  std::vector<ScriptedTrace> traces() const;
  void save(const std::string& path) const;

 private:
  ScriptedTrace& trace_for(const std::string& trial_hint,
                           const std::string& prompt);
  void record_event(const std::string& key, const TokenEvent& ev);

  std::shared_ptr<Provider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, ScriptedTrace> traces_;

  friend class TeeStream;
};

}  // namespace thinkbrake
