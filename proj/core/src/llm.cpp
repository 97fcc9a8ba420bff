#include "mova/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mova/hash.hpp"

namespace mova {

namespace {

using json = nlohmann::json;

constexpr double kDegradedLogprob = -9000.0;  // DeepSeek-style -9999.0 sentinels

std::string_view strip_token(std::string_view token) {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front())))
    token.remove_prefix(1);
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back())))
    token.remove_suffix(1);
  // Leading tokenizer boundary markers: GPT-style Ġ, SentencePiece ▁.
  if (token.size() >= 2 && static_cast<unsigned char>(token[0]) == 0xc4 &&
      static_cast<unsigned char>(token[1]) == 0xa0)
    token.remove_prefix(2);
  if (token.size() >= 3 && static_cast<unsigned char>(token[0]) == 0xe2 &&
      static_cast<unsigned char>(token[1]) == 0x96 &&
      static_cast<unsigned char>(token[2]) == 0x81)
    token.remove_prefix(3);
  return token;
}

json completion_json(const Completion& completion) {
  json out;
  out["text"] = completion.text;
  out["model"] = completion.model;
  out["latency_ms"] = completion.latency_ms;
  out["degraded"] = completion.degraded;
  if (completion.logprobs) {
    json positions = json::array();
    for (const auto& position : *completion.logprobs) {
      json top = json::array();
      for (const auto& candidate : position.top)
        top.push_back(json::array({candidate.token, candidate.logprob}));
      positions.push_back(json{{"token", position.token}, {"top", std::move(top)}});
    }
    out["logprobs"] = std::move(positions);
  } else {
    out["logprobs"] = nullptr;
  }
  return out;
}

Completion completion_from(const json& in) {
  if (!in.is_object() || !in.contains("text"))
    throw ParseError("completion JSON needs a 'text' field");
  Completion completion;
  completion.text = in["text"].get<std::string>();
  completion.model = in.value("model", std::string());
  completion.latency_ms = in.value("latency_ms", 0.0);
  completion.degraded = in.value("degraded", false);
  if (in.contains("logprobs") && !in["logprobs"].is_null()) {
    std::vector<TokenPosition> positions;
    for (const auto& entry : in["logprobs"]) {
      TokenPosition position;
      position.token = entry.at("token").get<std::string>();
      for (const auto& pair : entry.value("top", json::array())) {
        TokenCandidate candidate;
        if (pair.is_array()) {
          candidate.token = pair.at(0).get<std::string>();
          candidate.logprob = pair.at(1).get<double>();
        } else {
          candidate.token = pair.at("token").get<std::string>();
          candidate.logprob = pair.at("logprob").get<double>();
        }
        position.top.push_back(std::move(candidate));
      }
      std::stable_sort(position.top.begin(), position.top.end(),
                       [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
      positions.push_back(std::move(position));
    }
    completion.logprobs = std::move(positions);
  }
  return completion;
}

bool looks_like_hash(const std::string& key) {
  if (key.size() != 64) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

}  // namespace

void RequestConfig::validate() const {
  if (model.empty()) throw UsageError("model must be set");
  if (temperature < 0.0) throw UsageError("temperature must be >= 0");
  if (top_p < 0.0 || top_p > 1.0) throw UsageError("top_p must lie in [0,1]");
  if (max_tokens < 1) throw UsageError("max_tokens must be >= 1");
  if (top_logprobs < 1) throw UsageError("top_logprobs must be >= 1");
}

std::string RequestConfig::key_material() const {
  std::ostringstream out;
  out.precision(17);
  out << "model=" << model << ";temperature=" << temperature << ";top_p=" << top_p
      << ";max_tokens=" << max_tokens << ";top_logprobs=" << top_logprobs
      << ";logprobs=" << (logprobs ? 1 : 0);
  return out.str();
}

std::string completion_to_json(const Completion& completion) {
  return completion_json(completion).dump();
}

Completion completion_from_json(const std::string& json_text) {
  try {
    return completion_from(json::parse(json_text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad completion JSON: ") + e.what());
  }
}

void MockBackend::load_script_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open mock script " + path.string());
  json script;
  try {
    script = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!script.is_object()) throw ParseError(path.string() + ": expected a JSON object");
  for (const auto& [key, value] : script.items()) {
    Completion completion = completion_from(value);
    if (looks_like_hash(key))
      add_hashed(key, std::move(completion));
    else
      add(key, std::move(completion));
  }
}

void MockBackend::add(const std::string& prompt, Completion completion) {
  scripted_[prompt_hash(prompt)] = std::move(completion);
}

void MockBackend::add_hashed(const std::string& prompt_hash_hex, Completion completion) {
  scripted_[prompt_hash_hex] = std::move(completion);
}

Completion MockBackend::complete(const std::string& prompt, const RequestConfig& config) {
  config.validate();
  calls_.fetch_add(1);
  {
    std::lock_guard lock(mu_);
    seen_.push_back(prompt);
  }
  const std::string key = prompt_hash(prompt);
  auto it = scripted_.find(key);
  if (it == scripted_.end())
    throw TransportError("mock backend has no scripted response for prompt hash " + key);
  Completion completion = it->second;
  if (completion.model.empty()) completion.model = config.model;
  return completion;
}

std::vector<std::string> MockBackend::prompts_seen() const {
  std::lock_guard lock(mu_);
  return seen_;
}

std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

std::string request_key(const std::string& prompt, const RequestConfig& config) {
  return sha256_hex(config.key_material() + '\x1f' + prompt);
}

ResponseCache::ResponseCache(std::filesystem::path directory) : dir_(std::move(directory)) {
  std::filesystem::create_directories(dir_);
}

std::optional<Completion> ResponseCache::get(const std::string& key) const {
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return completion_from_json(text);
  } catch (const ParseError& e) {
    std::cerr << "warning: corrupt cache entry " << path.string() << " (" << e.what()
              << "); treating as miss\n";
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const Completion& completion) const {
  const auto path = dir_ / (key + ".json");
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::this_thread::get_id();
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw UsageError("cannot write cache entry " + tmp.string());
    out << completion_to_json(completion);
  }
  std::filesystem::rename(tmp, path);  // last write wins
}

Client::Client(Backend& backend, ResponseCache* cache, RetryPolicy retry)
    : backend_(backend), cache_(cache), retry_(retry) {}

Completion Client::complete(const std::string& prompt, const RequestConfig& config) {
  if (prompt.empty()) throw UsageError("empty prompt");
  config.validate();
  const std::string key = request_key(prompt, config);
  if (cache_) {
    if (auto cached = cache_->get(key)) return *cached;
  }

  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  const int attempts = std::max(1, retry_.attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      Completion completion = backend_.complete(prompt, config);
      if (cache_) cache_->put(key, completion);
      return completion;
    } catch (const TransportError&) {
      if (attempt >= attempts) throw;
      auto delay = retry_.base_delay * (1 << (attempt - 1));
      if (delay.count() > 0) {
        std::uniform_int_distribution<long> jitter(0, delay.count() / 2 + 1);
        std::this_thread::sleep_for(delay + std::chrono::milliseconds(jitter(jitter_rng)));
      }
    }
  }
}

Extraction extract_label_probability(const TokenPosition& position,
                                     std::string_view predicted_token) {
  if (predicted_token != "0" && predicted_token != "1")
    throw UsageError("predicted token must be '0' or '1'");
  const std::string_view anti_token = predicted_token == "1" ? "0" : "1";

  const TokenCandidate* predicted = nullptr;
  const TokenCandidate* anti = nullptr;
  for (const auto& candidate : position.top) {
    const auto stripped = strip_token(candidate.token);
    if (!predicted && stripped == predicted_token) predicted = &candidate;
    if (!anti && stripped == anti_token) anti = &candidate;
    if (predicted && anti) break;
  }
  if (!predicted)
    throw UsageError("predicted token '" + std::string(predicted_token) +
                     "' absent from the candidate list");

  Extraction extraction;
  extraction.degraded = predicted->logprob <= kDegradedLogprob;
  extraction.anti_found = anti != nullptr && anti->logprob > kDegradedLogprob;
  if (extraction.degraded || !extraction.anti_found) {
    // The predicted token is the only usable binary candidate.
    extraction.u_prime = 1.0;
  } else {
    extraction.u_prime = 1.0 / (1.0 + std::exp(anti->logprob - predicted->logprob));
  }
  extraction.u_m =
      predicted_token == "1" ? extraction.u_prime : 1.0 - extraction.u_prime;
  return extraction;
}

}  // namespace mova
