#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mova/error.hpp"

namespace mova {

struct RequestConfig {
  std::string model = "gpt-4o-mini";
  double temperature = 0.0;
  double top_p = 0.0;  // 0 = smallest backend-legal value (deterministic decode)
  int max_tokens = 4096;
  int top_logprobs = 20;
  bool logprobs = true;

  void validate() const;
  std::string key_material() const;  // stable serialization for cache keys
};

struct TokenCandidate {
  std::string token;
  double logprob = 0.0;  // <= 0 from real backends; -9999.0 marks degraded output
};

struct TokenPosition {
  std::string token;                // emitted token
  std::vector<TokenCandidate> top;  // ranked, logprob non-increasing
};

struct Completion {
  std::string text;
  std::optional<std::vector<TokenPosition>> logprobs;
  std::string model;
  double latency_ms = 0.0;
  bool degraded = false;  // backend produced no usable log-probabilities
};

std::string completion_to_json(const Completion& completion);
Completion completion_from_json(const std::string& json_text);  // throws ParseError

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const std::string& prompt, const RequestConfig& config) = 0;
  virtual std::string name() const = 0;
};

// Deterministic backend scripted by prompt hash. Script files map
// sha256(prompt) hex (or the raw prompt text) to a serialized completion.
class MockBackend : public Backend {
 public:
  MockBackend() = default;
  void load_script_file(const std::filesystem::path& path);

  void add(const std::string& prompt, Completion completion);
  void add_hashed(const std::string& prompt_hash_hex, Completion completion);

  Completion complete(const std::string& prompt, const RequestConfig& config) override;
  std::string name() const override { return "mock"; }

  int calls() const { return calls_.load(); }
  std::vector<std::string> prompts_seen() const;

 private:
  std::unordered_map<std::string, Completion> scripted_;
  mutable std::mutex mu_;
  std::vector<std::string> seen_;
  std::atomic<int> calls_{0};
};

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";  // credentials only via environment
  int timeout_seconds = 120;
};

// OpenAI-style chat-completions adapter.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  Completion complete(const std::string& prompt, const RequestConfig& config) override;
  std::string name() const override { return "openai"; }

 private:
  HttpBackendConfig cfg_;
};

std::string prompt_hash(const std::string& prompt);  // sha256 hex
// Cache key over (model, prompt, decoding hyperparameters).
std::string request_key(const std::string& prompt, const RequestConfig& config);

// On-disk response cache: one content-addressed JSON file per key. Tolerates
// concurrent readers/writers; identical keys are last-write-wins.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory);
  std::optional<Completion> get(const std::string& key) const;  // corrupt -> warn + miss
  void put(const std::string& key, const Completion& completion) const;
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{200};  // doubled per attempt, jittered
};

// Cache-first client with bounded exponential backoff on transport failures.
// Auth failures are never retried. Safe for concurrent use.
class Client {
 public:
  explicit Client(Backend& backend, ResponseCache* cache = nullptr, RetryPolicy retry = {});
  Completion complete(const std::string& prompt, const RequestConfig& config);
  Backend& backend() { return backend_; }

 private:
  Backend& backend_;
  ResponseCache* cache_;
  RetryPolicy retry_;
};

struct Extraction {
  double u_m = 0.0;      // probability that the label is 1
  double u_prime = 0.0;  // renormalized probability of the emitted label token
  bool anti_found = false;
  bool degraded = false;  // candidate logprobs unusable (e.g. all -9999.0)
};

// Anti-token renormalization at one output position: if the opposite label
// appears among the top-K candidates, u' = exp(lp_pred) / (exp(lp_pred) +
// exp(lp_anti)); otherwise u' = 1. u_m maps u' onto the label-1 direction.
// `predicted_token` must be "0" or "1" and present among the candidates.
Extraction extract_label_probability(const TokenPosition& position,
                                     std::string_view predicted_token);

}  // namespace mova
