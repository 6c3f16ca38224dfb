#pragma once

#include <chrono>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowdet/example_selector.hpp"
#include "flowdet/prompt_builder.hpp"
#include "flowdet/types.hpp"

namespace flowdet {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
};

struct ModelConfig {
  std::string endpoint_base = "http://localhost:8080/v1";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_tokens = 256;
  std::chrono::milliseconds request_timeout{30000};
  RetryPolicy retry_policy;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "LLM_API_KEY";

  void validate() const;  // throws HarnessError(Config)
};

enum class FailureKind { FormatViolation, Refusal, TransportError };
std::string_view to_string(FailureKind kind);

struct DetectionOutcome {
  std::optional<TrafficLabel> predicted;
  std::optional<std::string> reasoning;
  std::string raw_response;
  std::optional<FailureKind> failure;  // exactly one of predicted / failure is set
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the model's raw text for the document. Throws ClientError.
  virtual std::string complete(const PromptDocument& prompt, const ModelConfig& config) = 0;
};

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual EmbeddingVector embed(const std::string& text, const ModelConfig& config) = 0;
};

struct ChatResult {
  std::string text;
  int attempts = 1;
};

struct EmbedResult {
  EmbeddingVector vector;
  int attempts = 1;
};

/// Retry shell around the backends: Transport and Timeout failures are
/// retried with exponential backoff (base_backoff * 2^(attempt-1)), Auth
/// fails immediately. Thread safe whenever the backends are.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbedBackend> embed);

  /// Request text equals prompt.text exactly.
  ChatResult chat_complete(const PromptDocument& prompt, const ModelConfig& config) const;
  EmbedResult embed_text(const std::string& text, const ModelConfig& config) const;

  /// Binds embed_text for EmbeddingIndex::build.
  Embedder embedder(ModelConfig config) const;

  ChatBackend& chat_backend() const { return *chat_; }
  EmbedBackend& embed_backend() const { return *embed_; }

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbedBackend> embed_;
};

/// Patterns consulted (case-insensitively) only when no $$$-delimited span
/// exists. Deliberately narrow so that plain failures to answer stay
/// FormatViolation.
const std::vector<std::string>& default_refusal_patterns();

/// Total on arbitrary text: extracts the first "$$$...$$$" span, trims it,
/// canonicalizes the label case-insensitively; text outside the delimiters
/// becomes reasoning when nonempty. No span and a refusal pattern match =>
/// Refusal; otherwise FormatViolation.
DetectionOutcome parse_detection_response(std::string_view raw);
DetectionOutcome parse_detection_response(std::string_view raw,
                                          std::span<const std::string> refusal_patterns);

/// Writes one JSON record per pool example ({"prompt": zero-shot detection
/// prompt for the example's unlabeled row, "completion": canonical label}),
/// newline-delimited. Returns the record count. Throws ClientError
/// (EmptyPool, Sink).
std::size_t export_finetune_dataset(std::span<const LabeledExample> pool,
                                    const PromptTemplate& tmpl, std::ostream& sink);

}  // namespace flowdet
