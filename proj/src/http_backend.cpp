#include "flowdet/http_backend.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "flowdet/errors.hpp"

namespace flowdet {

namespace {

struct Endpoint {
  std::string base;         // scheme://host[:port]
  std::string path_prefix;  // e.g. "/v1", no trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ClientError(ClientError::Kind::Transport,
                      "endpoint_base must include a scheme: " + url);
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.starts_with("https://")) {
    throw ClientError(ClientError::Kind::Transport,
                      "built without TLS support; use an http:// endpoint");
  }
#endif
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.base = url;
  } else {
    ep.base = url.substr(0, path_start);
    ep.path_prefix = url.substr(path_start);
  }
  while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
  return ep;
}

std::string bearer_token(const ModelConfig& config) {
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ClientError(ClientError::Kind::Auth,
                      "no API credentials: environment variable " + config.api_key_env +
                          " is not set");
  }
  return key;
}

nlohmann::json post_json(const std::string& path_suffix, const nlohmann::json& body,
                         const ModelConfig& config) {
  auto token = bearer_token(config);
  auto ep = split_endpoint(config.endpoint_base);

  httplib::Client client(ep.base);
  auto timeout_ms = config.request_timeout.count();
  client.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
  client.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

  httplib::Headers headers{{"Authorization", "Bearer " + token}};
  auto res = client.Post(ep.path_prefix + path_suffix, headers, body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout) {
      throw ClientError(ClientError::Kind::Timeout,
                        "request to " + ep.base + path_suffix + " timed out");
    }
    throw ClientError(ClientError::Kind::Transport,
                      "request to " + ep.base + path_suffix + " failed: " +
                          httplib::to_string(err));
  }
  if (res->status == 401 || res->status == 403) {
    throw ClientError(ClientError::Kind::Auth,
                      "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    auto snippet = res->body.substr(0, 200);
    throw ClientError(ClientError::Kind::Transport,
                      "HTTP " + std::to_string(res->status) + " from " + path_suffix + ": " +
                          snippet);
  }
  auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw ClientError(ClientError::Kind::Transport, "response from " + path_suffix +
                                                        " is not valid JSON");
  }
  return parsed;
}

}  // namespace

std::string HttpChatBackend::complete(const PromptDocument& prompt, const ModelConfig& config) {
  nlohmann::json body{{"model", config.model_name},
                      {"temperature", config.temperature},
                      {"max_tokens", config.max_output_tokens},
                      {"messages", nlohmann::json::array({nlohmann::json{
                                       {"role", "user"}, {"content", prompt.text}}})}};
  auto response = post_json("/chat/completions", body, config);
  const auto* content = response.contains("choices") && response["choices"].is_array() &&
                                !response["choices"].empty() &&
                                response["choices"][0].contains("message") &&
                                response["choices"][0]["message"].contains("content") &&
                                response["choices"][0]["message"]["content"].is_string()
                            ? &response["choices"][0]["message"]["content"]
                            : nullptr;
  if (content == nullptr) {
    throw ClientError(ClientError::Kind::Transport,
                      "chat response lacks choices[0].message.content");
  }
  return content->get<std::string>();
}

EmbeddingVector HttpEmbedBackend::embed(const std::string& text, const ModelConfig& config) {
  nlohmann::json body{{"model", config.model_name}, {"input", text}};
  auto response = post_json("/embeddings", body, config);
  if (!response.contains("data") || !response["data"].is_array() || response["data"].empty() ||
      !response["data"][0].contains("embedding") ||
      !response["data"][0]["embedding"].is_array()) {
    throw ClientError(ClientError::Kind::Transport,
                      "embeddings response lacks data[0].embedding");
  }
  EmbeddingVector vector;
  for (const auto& value : response["data"][0]["embedding"]) {
    if (!value.is_number()) {
      throw ClientError(ClientError::Kind::Transport, "embedding contains a non-number");
    }
    double v = value.get<double>();
    if (!std::isfinite(v)) {
      throw ClientError(ClientError::Kind::Transport, "embedding contains a non-finite value");
    }
    vector.values.push_back(v);
  }
  if (vector.values.empty()) {
    throw ClientError(ClientError::Kind::Transport, "embedding is empty");
  }
  return vector;
}

}  // namespace flowdet
