#pragma once

// Uniform token-level generation interface. Two providers implement it: a
// live OpenAI-compatible completions client and a deterministic scripted
// replay provider; a recording decorator captures any run as a replayable
// trace.

#include "thinkbrake/trace.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace thinkbrake {

/// Additive logit adjustments keyed by token id (token suppression uses a
/// large negative constant).
struct BiasMap {
  std::map<int64_t, double> entries;

  bool empty() const { return entries.empty(); }
  bool contains(int64_t id) const { return entries.count(id) != 0; }

  bool operator==(const BiasMap&) const = default;
};

struct GenerationRequest {
  std::string prefix_text;  // raw completion prompt, template pre-applied
  int max_tokens = 512;
  int top_logprobs = 20;
  double temperature = 0.0;
  std::vector<std::string> stop_sequences;
  std::optional<BiasMap> bias;
  bool stream = true;
  std::string trial_hint;  // optional trial id, for replay lookup / recording
};

struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Pull-based token stream. `next` returns nullopt at end of stream; `abort`
/// stops delivery early and leaves the provider usable for further requests.
class TokenStream {
 public:
  virtual ~TokenStream() = default;
  virtual std::optional<TokenEvent> next() = 0;
  virtual void abort() = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;

  virtual std::unique_ptr<TokenStream> stream_generate(
      const GenerationRequest& req) = 0;

  /// Next-token distribution for a prefix (a max_tokens=1 request).
  virtual TopKDistribution probe_next(const std::string& prefix_text,
                                      int top_logprobs,
                                      const std::string& trial_hint) = 0;

  /// Completion after prefix+injection until a stop condition. `injection`
  /// is typically "</think>" plus a separator, or empty.
  virtual std::vector<TokenEvent> continue_from(const std::string& prefix_text,
                                                const std::string& injection,
                                                const GenerationRequest& req) = 0;
};

/// Re-rank a distribution under a bias map (no renormalization); ties keep
/// the original order.
TopKDistribution apply_bias(const TopKDistribution& d, const BiasMap& bias);

}  // namespace thinkbrake
