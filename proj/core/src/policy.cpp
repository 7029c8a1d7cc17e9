#include "thinkbrake/policy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace thinkbrake {

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::base: return "base";
    case PolicyKind::thinkbrake: return "thinkbrake";
    case PolicyKind::thinkbrake_prob: return "thinkbrake-prob";
    case PolicyKind::nowait: return "nowait";
    case PolicyKind::thinkless: return "thinkless";
    case PolicyKind::toolcall_confidence: return "toolcall-confidence";
  }
  return "?";
}

std::optional<PolicyKind> policy_kind_from_string(std::string_view s) {
  if (s == "base") return PolicyKind::base;
  if (s == "thinkbrake") return PolicyKind::thinkbrake;
  if (s == "thinkbrake-prob" || s == "thinkbrake_prob")
    return PolicyKind::thinkbrake_prob;
  if (s == "nowait") return PolicyKind::nowait;
  if (s == "thinkless") return PolicyKind::thinkless;
  if (s == "toolcall-confidence" || s == "toolcall_confidence")
    return PolicyKind::toolcall_confidence;
  return std::nullopt;
}

const std::vector<std::string>& default_nowait_keywords() {
  static const std::vector<std::string> kw{
      "wait", "hmm", "hmmm", "but", "however", "check", "verify",
      "alternatively"};
  return kw;
}

void PolicyConfig::validate() const {
  if (tau_threshold < 0.0)
    throw std::invalid_argument("policy: tau_threshold must be >= 0");
  if (tau_threshold_prob < 0.0)
    throw std::invalid_argument("policy: tau_threshold_prob must be >= 0");
  if (confidence_k < 1)
    throw std::invalid_argument("policy: confidence_k must be >= 1");
  if (max_thinking_tokens <= 0)
    throw std::invalid_argument("policy: max_thinking_tokens must be > 0");
}

double confidence_value(const TopKDistribution& d) {
  if (d.entries.empty())
    throw GatewayError("no logprobs from provider");
  double sum = 0.0;
  for (const auto& e : d.entries) sum += e.logprob;
  return -sum / static_cast<double>(d.entries.size());
}

ConfidenceProbe make_confidence_probe(TopKDistribution d) {
  ConfidenceProbe p;
  p.c_value = confidence_value(d);
  p.distribution = std::move(d);
  return p;
}

PolicyDecision thinkbrake_decide(const TopKDistribution& alts,
                                 const SpecialTokens& specials,
                                 const PolicyConfig& cfg) {
  const LogProbEntry& top = alts.top();
  const LogProbEntry* close =
      alts.find(specials.think_close.id, specials.think_close.text);
  PolicyDecision d;
  if (!close) {
    d.margin = std::numeric_limits<double>::infinity();
    d.action = PolicyAction::continue_thinking;
    return d;
  }
  const double m = top.logprob - close->logprob;
  d.margin = m;
  d.action = m <= cfg.tau_threshold ? PolicyAction::terminate_thinking
                                    : PolicyAction::continue_thinking;
  return d;
}

PolicyDecision thinkbrake_prob_decide(const TopKDistribution& alts,
                                      const SpecialTokens& specials,
                                      const PolicyConfig& cfg) {
  const LogProbEntry& top = alts.top();
  const LogProbEntry* close =
      alts.find(specials.think_close.id, specials.think_close.text);
  const double p_close = close ? std::exp(close->logprob) : 0.0;
  const double m = std::exp(top.logprob) - p_close;
  PolicyDecision d;
  d.margin = m;
  d.action = m <= cfg.tau_threshold_prob ? PolicyAction::terminate_thinking
                                         : PolicyAction::continue_thinking;
  return d;
}

namespace {

std::string capitalize(const std::string& s) {
  std::string out = s;
  if (!out.empty())
    out[0] = static_cast<char>(
        std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

NoWaitBias nowait_bias(const std::vector<std::string>& keywords,
                       const std::map<std::string, int64_t>& vocab,
                       double suppression_bias) {
  if (keywords.empty())
    throw std::invalid_argument("nowait: keyword list is empty");
  NoWaitBias out;
  for (const auto& kw : keywords) {
    std::vector<std::string> variants{kw, capitalize(kw), " " + kw,
                                      " " + capitalize(kw)};
    variants.erase(std::unique(variants.begin(), variants.end()),
                   variants.end());
    for (const auto& v : variants) {
      auto it = vocab.find(v);
      if (it == vocab.end()) {
        out.missing.push_back(v);
      } else {
        out.bias.entries[it->second] = suppression_bias;
        out.matched.push_back(v);
      }
    }
  }
  return out;
}

std::string thinkless_prefill(const SpecialTokens& specials,
                              std::string_view separator) {
  return specials.think_open.text + specials.think_close.text +
         std::string(separator);
}

PolicyDecision toolcall_confidence_decide(const ConfidenceProbe& probe,
                                          const SpecialTokens& specials,
                                          const PolicyConfig& cfg) {
  if (probe.distribution.k() < cfg.confidence_k)
    throw GatewayError("insufficient top-k from provider (" +
                       std::to_string(probe.distribution.k()) + " < " +
                       std::to_string(cfg.confidence_k) + ")");
  PolicyDecision d;
  d.margin = probe.c_value;
  bool pass = cfg.confidence_terminate_above
                  ? probe.c_value >= cfg.confidence_threshold
                  : probe.c_value <= cfg.confidence_threshold;
  if (pass && cfg.confidence_require_toolcall_top)
    pass = matches_special(probe.distribution.top(), specials.tool_call_open);
  d.action = pass ? PolicyAction::terminate_thinking
                  : PolicyAction::continue_thinking;
  return d;
}

namespace {

TokenEvent synthetic_marker_event(int64_t position, const SpecialToken& tok,
                                  double logprob) {
  LogProbEntry e{tok.id, tok.text, logprob};
  TokenEvent ev;
  ev.position = position;
  ev.emitted = e;
  ev.alternatives.entries = {e};
  return ev;
}

}  // namespace

PolicyRunResult run_policy(const Trial& trial, const PolicyConfig& cfg,
                           Provider& gateway, const RunPolicyOptions& opt) {
  cfg.validate();
  opt.specials.validate();
  opt.boundary.validate();

  PolicyRunResult res;
  DecodeTranscript& tr = res.transcript;
  tr.trial_id = trial.id;

  const SpecialToken& open = opt.specials.think_open;
  const SpecialToken& close = opt.specials.think_close;

  auto make_request = [&](int max_tokens, bool stream) {
    GenerationRequest r;
    r.prefix_text = trial.prompt;
    r.max_tokens = max_tokens;
    r.top_logprobs = opt.top_logprobs;
    r.temperature = 0.0;
    r.stop_sequences = opt.stop_sequences;
    r.stream = stream;
    r.trial_hint = trial.id;
    if (cfg.kind == PolicyKind::nowait && opt.bias) r.bias = opt.bias;
    return r;
  };

  if (cfg.kind == PolicyKind::thinkless) {
    const std::string prefill = thinkless_prefill(opt.specials, opt.separator);
    auto events = gateway.continue_from(trial.prompt, prefill,
                                        make_request(opt.max_answer_tokens,
                                                     /*stream=*/false));
    tr.events.push_back(synthetic_marker_event(0, open, 0.0));
    tr.events.push_back(synthetic_marker_event(1, close, 0.0));
    tr.thinking_open_pos = 0;
    tr.thinking_close_pos = 1;
    tr.injected_close = true;
    int64_t pos = 2;
    for (auto ev : events) {
      ev.position = pos++;
      tr.events.push_back(std::move(ev));
    }
    finalize_transcript(tr);
    return res;
  }

  const bool margin_kind = cfg.kind == PolicyKind::thinkbrake ||
                           cfg.kind == PolicyKind::thinkbrake_prob;
  const bool probe_kind = cfg.kind == PolicyKind::toolcall_confidence;
  const bool consults = margin_kind || probe_kind;

  if (cfg.kind == PolicyKind::nowait && (!opt.bias || opt.bias->empty()))
    throw std::invalid_argument(
        "nowait requires a keyword bias map (is a vocabulary configured?)");

  auto stream = gateway.stream_generate(make_request(opt.max_total_tokens,
                                                     /*stream=*/true));

  BoundaryDetector detector(opt.boundary);
  std::string gen_text;  // text of every committed event, markers included
  bool pending_consult = false;
  int64_t last_consult_pos = -1;
  bool terminated = false;
  double injected_close_logprob = 0.0;

  auto consult = [&](const TokenEvent& ev) {
    PolicyDecision d;
    if (margin_kind) {
      d = cfg.kind == PolicyKind::thinkbrake
              ? thinkbrake_decide(ev.alternatives, opt.specials, cfg)
              : thinkbrake_prob_decide(ev.alternatives, opt.specials, cfg);
      if (d.action == PolicyAction::terminate_thinking) {
        const LogProbEntry* c = ev.alternatives.find(close.id, close.text);
        injected_close_logprob = c ? c->logprob : 0.0;
      }
    } else {
      const std::string probe_prefix =
          trial.prompt + gen_text + close.text + opt.separator;
      auto dist = gateway.probe_next(probe_prefix, cfg.confidence_k, trial.id);
      ++res.probe_requests;
      d = toolcall_confidence_decide(make_confidence_probe(std::move(dist)),
                                     opt.specials, cfg);
    }
    d.boundary_index = detector.boundaries_reported();
    res.decisions.push_back(d);
    return d;
  };

  while (auto ev_opt = stream->next()) {
    TokenEvent ev = std::move(*ev_opt);
    const int64_t pos = static_cast<int64_t>(tr.events.size());
    ev.position = pos;

    if (cfg.kind == PolicyKind::nowait && opt.bias &&
        opt.bias->contains(ev.emitted.token_id))
      tr.add_warning(kWarnSuppressedTokenEmitted);
    if (!ev.alternatives.entries.empty() &&
        !(ev.emitted == ev.alternatives.entries.front()))
      tr.add_warning(kWarnNonGreedyEvent);

    const bool in_thinking = tr.thinking_open_pos && !tr.thinking_close_pos;

    if (!tr.thinking_open_pos && !tr.thinking_close_pos &&
        matches_special(ev.emitted, open)) {
      gen_text += ev.emitted.token_text;
      tr.events.push_back(std::move(ev));
      tr.thinking_open_pos = pos;
      continue;
    }
    // A decoded </think> always wins over a pending consultation: under
    // greedy decoding a tie with the top token means the close IS the top.
    if (!tr.thinking_close_pos && matches_special(ev.emitted, close)) {
      gen_text += ev.emitted.token_text;
      tr.events.push_back(std::move(ev));
      tr.thinking_close_pos = pos;
      pending_consult = false;
      continue;
    }

    if (in_thinking && consults) {
      if (pending_consult) {
        pending_consult = false;
        if (last_consult_pos != pos) {
          last_consult_pos = pos;
          auto d = consult(ev);
          if (d.action == PolicyAction::terminate_thinking) {
            terminated = true;
            res.triggered_boundary = d.boundary_index;
            break;  // ev is not part of the thinking section
          }
        }
      }
      const size_t tok_start = detector.chars_fed();
      const size_t seen = detector.boundary_offsets().size();
      detector.feed_token(ev.emitted.token_text);
      const auto& offsets = detector.boundary_offsets();
      bool boundary_before_token = false;
      bool boundary_in_token = false;
      for (size_t i = seen; i < offsets.size(); ++i) {
        if (offsets[i] < tok_start)
          boundary_before_token = true;
        else
          boundary_in_token = true;
      }
      if (boundary_before_token && last_consult_pos != pos) {
        last_consult_pos = pos;
        auto d = consult(ev);
        if (d.action == PolicyAction::terminate_thinking) {
          terminated = true;
          res.triggered_boundary = d.boundary_index;
          break;  // boundary precedes ev, so ev is discarded
        }
      }
      gen_text += ev.emitted.token_text;
      tr.events.push_back(std::move(ev));
      if (boundary_in_token) pending_consult = true;
    } else {
      gen_text += ev.emitted.token_text;
      tr.events.push_back(std::move(ev));
    }

    if (tr.thinking_open_pos && !tr.thinking_close_pos) {
      const int64_t thinking_so_far =
          static_cast<int64_t>(tr.events.size()) - *tr.thinking_open_pos - 1;
      if (thinking_so_far >= cfg.max_thinking_tokens) {
        terminated = true;
        tr.add_warning(kWarnSafetyCapHit);
        break;
      }
    }
  }

  if (terminated) {
    stream->abort();
    const int64_t close_pos = static_cast<int64_t>(tr.events.size());
    tr.events.push_back(
        synthetic_marker_event(close_pos, close, injected_close_logprob));
    tr.thinking_close_pos = close_pos;
    tr.injected_close = true;

    auto creq = make_request(opt.max_answer_tokens, /*stream=*/false);
    creq.prefix_text = trial.prompt + gen_text;
    auto events = gateway.continue_from(trial.prompt + gen_text,
                                        close.text + opt.separator, creq);
    int64_t pos = close_pos + 1;
    for (auto ev : events) {
      ev.position = pos++;
      tr.events.push_back(std::move(ev));
    }
  }

  finalize_transcript(tr);
  return res;
}

}  // namespace thinkbrake
