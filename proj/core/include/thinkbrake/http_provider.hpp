#pragma once

// Live client for OpenAI-compatible completions endpoints that expose
// per-token top-k log probabilities. Requests are raw completions (chat
// template pre-applied) so mid-thought continuation after an injected
// </think> keeps exact prefix control.

#include "thinkbrake/gateway.hpp"

#include <map>
#include <string>

namespace thinkbrake {

struct LiveEndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000
  std::string completions_path = "/v1/completions";
  std::string model;
  std::string api_key;  // resolved from an environment variable by config
  int timeout_s = 120;
  int retries = 3;
  int retry_backoff_ms = 500;
  bool supports_logit_bias = true;
  bool use_streaming = true;
  // Optional token-text -> id map; without it, ids are synthesized from a
  // text hash in a reserved range (>= 2^30) and specials match by text.
  std::map<std::string, int64_t> vocab;
};

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(LiveEndpointConfig cfg);

  std::unique_ptr<TokenStream> stream_generate(
      const GenerationRequest& req) override;
  TopKDistribution probe_next(const std::string& prefix_text, int top_logprobs,
                              const std::string& trial_hint) override;
  std::vector<TokenEvent> continue_from(const std::string& prefix_text,
                                        const std::string& injection,
                                        const GenerationRequest& req) override;

  const LiveEndpointConfig& config() const { return cfg_; }

  /// Maps one completions-API choice (tokens / token_logprobs /
  /// top_logprobs arrays) to TokenEvents. Exposed for the stream reader.
  std::vector<TokenEvent> events_from_choice(const json& choice,
                                             int64_t start_pos) const;

 private:
  json build_body(const GenerationRequest& req, bool stream) const;
  json post_completion(const json& body) const;
  int64_t token_id_for(const std::string& text) const;

  LiveEndpointConfig cfg_;
};

}  // namespace thinkbrake
