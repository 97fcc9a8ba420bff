#include <chrono>
#include <cstdlib>

#ifdef MOVA_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mova/llm.hpp"

namespace mova {

namespace {

using json = nlohmann::json;

Completion parse_chat_response(const json& body, const RequestConfig& config,
                               double latency_ms) {
  if (!body.contains("choices") || body["choices"].empty())
    throw ParseError("chat response has no choices");
  const auto& choice = body["choices"][0];
  Completion completion;
  completion.model = body.value("model", config.model);
  completion.latency_ms = latency_ms;
  completion.text = choice.at("message").at("content").get<std::string>();

  if (config.logprobs) {
    if (choice.contains("logprobs") && !choice["logprobs"].is_null() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<TokenPosition> positions;
      for (const auto& entry : choice["logprobs"]["content"]) {
        TokenPosition position;
        position.token = entry.at("token").get<std::string>();
        TokenCandidate self;
        self.token = position.token;
        self.logprob = entry.value("logprob", 0.0);
        bool self_listed = false;
        for (const auto& alt : entry.value("top_logprobs", json::array())) {
          TokenCandidate candidate;
          candidate.token = alt.at("token").get<std::string>();
          candidate.logprob = alt.at("logprob").get<double>();
          if (candidate.token == self.token) self_listed = true;
          position.top.push_back(std::move(candidate));
        }
        if (!self_listed) position.top.push_back(self);
        std::stable_sort(position.top.begin(), position.top.end(),
                         [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
        positions.push_back(std::move(position));
      }
      completion.logprobs = std::move(positions);
    } else {
      // Logprobs were requested but the backend did not return them.
      completion.degraded = true;
    }
  }
  return completion;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig config) : cfg_(std::move(config)) {}

Completion HttpBackend::complete(const std::string& prompt, const RequestConfig& config) {
  config.validate();
  const char* api_key = std::getenv(cfg_.api_key_env.c_str());
  if (!api_key || !*api_key)
    throw AuthError("environment variable " + cfg_.api_key_env + " is not set");

  json body;
  body["model"] = config.model;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = config.temperature;
  body["top_p"] = config.top_p;
  body["max_tokens"] = config.max_tokens;
  if (config.logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = config.top_logprobs;
  }

  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(cfg_.timeout_seconds);
  client.set_read_timeout(cfg_.timeout_seconds);
  client.set_bearer_token_auth(api_key);

  const auto start = std::chrono::steady_clock::now();
  auto result = client.Post(cfg_.path, body.dump(), "application/json");
  const double latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();

  if (!result)
    throw TransportError("transport failure: " + httplib::to_string(result.error()));
  if (result->status == 401 || result->status == 403)
    throw AuthError("backend rejected credentials (HTTP " +
                    std::to_string(result->status) + ")");
  if (result->status == 429 || result->status >= 500)
    throw TransportError("backend returned HTTP " + std::to_string(result->status));
  if (result->status != 200)
    throw Error("backend returned HTTP " + std::to_string(result->status) + ": " +
                result->body);

  try {
    return parse_chat_response(json::parse(result->body), config, latency_ms);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad chat response JSON: ") + e.what());
  }
}

}  // namespace mova
