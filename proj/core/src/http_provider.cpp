#include "thinkbrake/http_provider.hpp"

#include "httplib.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace thinkbrake {

namespace {

uint32_t fnv1a(const std::string& s) {
  uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

httplib::Headers auth_headers(const LiveEndpointConfig& cfg) {
  httplib::Headers h;
  if (!cfg.api_key.empty())
    h.emplace("Authorization", "Bearer " + cfg.api_key);
  return h;
}

std::unique_ptr<httplib::Client> make_client(const LiveEndpointConfig& cfg) {
  auto cli = std::make_unique<httplib::Client>(cfg.base_url);
  cli->set_connection_timeout(10, 0);
  cli->set_read_timeout(cfg.timeout_s, 0);
  cli->set_write_timeout(cfg.timeout_s, 0);
  return cli;
}

}  // namespace

HttpProvider::HttpProvider(LiveEndpointConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty())
    throw GatewayError("live provider: endpoint URL is empty");
}

int64_t HttpProvider::token_id_for(const std::string& text) const {
  auto it = cfg_.vocab.find(text);
  if (it != cfg_.vocab.end()) return it->second;
  // Reserved synthetic range, far above real vocabulary ids.
  return static_cast<int64_t>(0x40000000u | (fnv1a(text) & 0x3FFFFFFFu));
}

json HttpProvider::build_body(const GenerationRequest& req, bool stream) const {
  json body{{"model", cfg_.model},
            {"prompt", req.prefix_text},
            {"max_tokens", req.max_tokens},
            {"temperature", req.temperature},
            {"logprobs", req.top_logprobs},
            {"echo", false},
            {"stream", stream}};
  if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
  if (req.bias && !req.bias->empty()) {
    if (!cfg_.supports_logit_bias)
      throw GatewayError(
          "endpoint lacks logit bias support; cannot run a biased request");
    json bias = json::object();
    for (const auto& [id, v] : req.bias->entries)
      bias[std::to_string(id)] = v;
    body["logit_bias"] = std::move(bias);
  }
  return body;
}

json HttpProvider::post_completion(const json& body) const {
  std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(
          cfg_.retry_backoff_ms * (1 << (attempt - 1))));
    auto cli = make_client(cfg_);
    auto res = cli->Post(cfg_.completions_path, auth_headers(cfg_), payload,
                         "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 404 || res->status == 405)
      throw GatewayError("endpoint lacks completion mode (HTTP " +
                         std::to_string(res->status) + " on " +
                         cfg_.completions_path + ")");
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + ": " +
                   res->body.substr(0, 300);
      if (res->status >= 400 && res->status < 500)
        throw GatewayError("completion request failed: " + last_error);
      continue;  // retry 5xx
    }
    json parsed = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded())
      throw GatewayError("endpoint returned invalid JSON");
    return parsed;
  }
  throw GatewayError("completion request failed after " +
                     std::to_string(cfg_.retries + 1) + " attempts (" +
                     last_error + ")");
}

std::vector<TokenEvent> HttpProvider::events_from_choice(
    const json& choice, int64_t start_pos) const {
  if (!choice.contains("logprobs") || choice["logprobs"].is_null())
    throw GatewayError("provider lacks logprobs");
  const json& lp = choice["logprobs"];
  if (!lp.contains("tokens") || !lp.contains("token_logprobs"))
    throw GatewayError("provider lacks logprobs");
  const json& tokens = lp["tokens"];
  const json& token_lps = lp["token_logprobs"];
  const json* top = lp.contains("top_logprobs") ? &lp["top_logprobs"] : nullptr;

  std::vector<TokenEvent> out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    TokenEvent ev;
    ev.position = start_pos + static_cast<int64_t>(i);
    const std::string text = tokens[i].get<std::string>();
    const double emitted_lp =
        token_lps[i].is_null() ? 0.0 : token_lps[i].get<double>();
    ev.emitted = LogProbEntry{token_id_for(text), text, emitted_lp};

    std::vector<LogProbEntry> entries;
    if (top && i < top->size() && !(*top)[i].is_null()) {
      for (auto it = (*top)[i].begin(); it != (*top)[i].end(); ++it)
        entries.push_back(LogProbEntry{token_id_for(it.key()), it.key(),
                                       it.value().get<double>()});
    }
    bool has_emitted = std::any_of(
        entries.begin(), entries.end(),
        [&](const LogProbEntry& e) { return e.token_text == text; });
    if (!has_emitted) entries.push_back(ev.emitted);
    // Deterministic order: logprob desc, text asc on ties, emitted first
    // among exact ties with the top.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const LogProbEntry& a, const LogProbEntry& b) {
                       if (a.logprob != b.logprob) return a.logprob > b.logprob;
                       return a.token_text < b.token_text;
                     });
    if (!entries.empty() && entries.front().token_text != text) {
      auto it = std::find_if(entries.begin(), entries.end(),
                             [&](const LogProbEntry& e) {
                               return e.token_text == text &&
                                      e.logprob == entries.front().logprob;
                             });
      if (it != entries.end()) std::rotate(entries.begin(), it, it + 1);
    }
    // Resolve duplicate synthesized ids (hash collisions) within one
    // distribution by bumping.
    for (size_t a = 0; a < entries.size(); ++a)
      for (size_t b = 0; b < a; ++b)
        if (entries[a].token_id == entries[b].token_id &&
            entries[a].token_text != entries[b].token_text)
          ++entries[a].token_id;
    ev.alternatives.entries = std::move(entries);
    ev.emitted = *ev.alternatives.find(-1, text);
    out.push_back(std::move(ev));
  }
  return out;
}

namespace {

/// Pull-based view over a server-sent-event completion stream. A worker
/// thread feeds a queue; abort() cancels the transfer from the receiver.
class SseTokenStream : public TokenStream {
 public:
  SseTokenStream(const HttpProvider* provider, const LiveEndpointConfig& cfg,
                 json body)
      : provider_(provider), cfg_(cfg), body_(std::move(body)) {
    worker_ = std::thread([this] { run(); });
  }

  ~SseTokenStream() override {
    abort();
    if (worker_.joinable()) worker_.join();
  }

  std::optional<TokenEvent> next() override {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || done_; });
    if (!queue_.empty()) {
      TokenEvent ev = std::move(queue_.front());
      queue_.pop_front();
      return ev;
    }
    if (!error_.empty() && !aborted_)
      throw GatewayError(error_);
    return std::nullopt;
  }

  void abort() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      aborted_ = true;
    }
    cv_.notify_all();
  }

 private:
  void run() {
    std::string buffer;
    int64_t next_pos = 0;
    int status = 0;
    std::string error_body;

    httplib::Request req;
    req.method = "POST";
    req.path = cfg_.completions_path;
    req.headers = auth_headers(cfg_);
    req.set_header("Content-Type", "application/json");
    req.set_header("Accept", "text/event-stream");
    req.body = body_.dump();
    req.response_handler = [&](const httplib::Response& res) {
      status = res.status;
      return true;
    };
    req.content_receiver = [&](const char* data, size_t len, uint64_t,
                               uint64_t) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (aborted_) return false;
      }
      if (status != 200) {
        error_body.append(data, len);
        return true;
      }
      buffer.append(data, len);
      size_t sep;
      while ((sep = buffer.find("\n\n")) != std::string::npos) {
        std::string chunk = buffer.substr(0, sep);
        buffer.erase(0, sep + 2);
        handle_chunk(chunk, next_pos);
      }
      return true;
    };

    auto cli = make_client(cfg_);
    auto result = cli->send(req);

    std::lock_guard<std::mutex> lock(mu_);
    if (!aborted_) {
      if (status != 0 && status != 200)
        error_ = "HTTP " + std::to_string(status) + ": " +
                 error_body.substr(0, 300);
      else if (!result && result.error() != httplib::Error::Canceled)
        error_ = "stream connection error: " +
                 httplib::to_string(result.error());
    }
    done_ = true;
    cv_.notify_all();
  }

  void handle_chunk(const std::string& chunk, int64_t& next_pos) {
    // An SSE event may span several "data:" lines; ours carry one each.
    for (size_t start = 0; start < chunk.size();) {
      size_t eol = chunk.find('\n', start);
      if (eol == std::string::npos) eol = chunk.size();
      std::string line = chunk.substr(start, eol - start);
      start = eol + 1;
      if (line.rfind("data:", 0) != 0) continue;
      std::string payload = line.substr(5);
      while (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
      if (payload == "[DONE]") return;
      json j = json::parse(payload, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
        continue;
      std::vector<TokenEvent> events;
      try {
        events = provider_->events_from_choice(j["choices"][0], next_pos);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu_);
        if (error_.empty()) error_ = e.what();
        return;
      }
      next_pos += static_cast<int64_t>(events.size());
      std::lock_guard<std::mutex> lock(mu_);
      for (auto& ev : events) queue_.push_back(std::move(ev));
      cv_.notify_all();
    }
  }

  const HttpProvider* provider_;
  LiveEndpointConfig cfg_;
  json body_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<TokenEvent> queue_;
  bool done_ = false;
  bool aborted_ = false;
  std::string error_;
  std::thread worker_;
};

class BufferedTokenStream : public TokenStream {
 public:
  explicit BufferedTokenStream(std::vector<TokenEvent> events)
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

}  // namespace

std::unique_ptr<TokenStream> HttpProvider::stream_generate(
    const GenerationRequest& req) {
  if (cfg_.use_streaming && req.stream)
    return std::make_unique<SseTokenStream>(this, cfg_,
                                            build_body(req, /*stream=*/true));
  json res = post_completion(build_body(req, /*stream=*/false));
  if (!res.contains("choices") || res["choices"].empty())
    throw GatewayError("completion response has no choices");
  return std::make_unique<BufferedTokenStream>(
      events_from_choice(res["choices"][0], 0));
}

TopKDistribution HttpProvider::probe_next(const std::string& prefix_text,
                                          int top_logprobs,
                                          const std::string& /*trial_hint*/) {
  GenerationRequest req;
  req.prefix_text = prefix_text;
  req.max_tokens = 1;
  req.top_logprobs = top_logprobs;
  json res = post_completion(build_body(req, /*stream=*/false));
  if (!res.contains("choices") || res["choices"].empty())
    throw GatewayError("probe response has no choices");
  auto events = events_from_choice(res["choices"][0], 0);
  if (events.empty()) throw GatewayError("probe returned no tokens");
  return events.front().alternatives;
}

std::vector<TokenEvent> HttpProvider::continue_from(
    const std::string& prefix_text, const std::string& injection,
    const GenerationRequest& req) {
  GenerationRequest merged = req;
  merged.prefix_text = prefix_text + injection;
  json res = post_completion(build_body(merged, /*stream=*/false));
  if (!res.contains("choices") || res["choices"].empty())
    throw GatewayError("continuation response has no choices");
  return events_from_choice(res["choices"][0], 0);
}

}  // namespace thinkbrake
