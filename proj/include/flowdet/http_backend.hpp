#pragma once

#include "flowdet/llm_client.hpp"

namespace flowdet {

/// Chat-completions wire client. POSTs {model, temperature, max_tokens,
/// messages:[{role:"user", content:<document text>}]} to
/// <endpoint_base>/chat/completions with a bearer token read from
/// config.api_key_env. One connection per call, so instances are thread safe.
class HttpChatBackend : public ChatBackend {
 public:
  std::string complete(const PromptDocument& prompt, const ModelConfig& config) override;
};

/// Embeddings wire client: POSTs {model, input} to <endpoint_base>/embeddings
/// and returns data[0].embedding.
class HttpEmbedBackend : public EmbedBackend {
 public:
  EmbeddingVector embed(const std::string& text, const ModelConfig& config) override;
};

}  // namespace flowdet
