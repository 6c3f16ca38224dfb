#include "flowdet/llm_client.hpp"

#include <ostream>
#include <thread>

#include <json.hpp>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

void ModelConfig::validate() const {
  if (temperature < 0) {
    throw HarnessError(HarnessError::Kind::Config, "temperature must be >= 0");
  }
  if (retry_policy.max_attempts < 1) {
    throw HarnessError(HarnessError::Kind::Config, "retry max_attempts must be >= 1");
  }
  if (max_output_tokens < 1) {
    throw HarnessError(HarnessError::Kind::Config, "max_output_tokens must be >= 1");
  }
  if (endpoint_base.empty() || model_name.empty()) {
    throw HarnessError(HarnessError::Kind::Config, "endpoint_base and model_name are required");
  }
}

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::FormatViolation: return "FormatViolation";
    case FailureKind::Refusal: return "Refusal";
    case FailureKind::TransportError: return "TransportError";
  }
  return "TransportError";
}

LlmClient::LlmClient(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbedBackend> embed)
    : chat_(std::move(chat)), embed_(std::move(embed)) {}

namespace {

template <class Call>
auto with_retries(const RetryPolicy& policy, Call&& call) {
  for (int attempt = 1;; ++attempt) {
    try {
      return call(attempt);
    } catch (const ClientError& e) {
      if (e.kind == ClientError::Kind::Auth) {
        throw ClientError(e.kind, e.what(), attempt);
      }
      if (attempt >= policy.max_attempts) {
        throw ClientError(e.kind,
                          std::string(e.what()) + " (giving up after " + std::to_string(attempt) +
                              (attempt == 1 ? " attempt)" : " attempts)"),
                          attempt);
      }
      auto backoff = policy.base_backoff * (1LL << (attempt - 1));
      if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    }
  }
}

}  // namespace

ChatResult LlmClient::chat_complete(const PromptDocument& prompt, const ModelConfig& config) const {
  config.validate();
  return with_retries(config.retry_policy, [&](int attempt) {
    return ChatResult{chat_->complete(prompt, config), attempt};
  });
}

EmbedResult LlmClient::embed_text(const std::string& text, const ModelConfig& config) const {
  config.validate();
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  return with_retries(config.retry_policy, [&](int attempt) {
    return EmbedResult{embed_->embed(text, config), attempt};
  });
}

Embedder LlmClient::embedder(ModelConfig config) const {
  return [this, config = std::move(config)](const std::string& text) {
    return embed_text(text, config).vector;
  };
}

const std::vector<std::string>& default_refusal_patterns() {
  static const std::vector<std::string> patterns = {
      "i'm sorry",          "i am sorry", "i cannot assist",
      "i can't assist",     "i refuse",   "as an ai language model",
      "i won't",
  };
  return patterns;
}

DetectionOutcome parse_detection_response(std::string_view raw) {
  return parse_detection_response(raw, default_refusal_patterns());
}

DetectionOutcome parse_detection_response(std::string_view raw,
                                          std::span<const std::string> refusal_patterns) {
  constexpr std::string_view kDelim = "$$$";
  DetectionOutcome out;
  out.raw_response = std::string(raw);

  auto open = raw.find(kDelim);
  auto close = open == std::string_view::npos
                   ? std::string_view::npos
                   : raw.find(kDelim, open + kDelim.size());
  if (open != std::string_view::npos && close != std::string_view::npos) {
    auto span = raw.substr(open + kDelim.size(), close - open - kDelim.size());
    if (auto label = parse_label(span)) {
      out.predicted = *label;
      std::string outside;
      outside += raw.substr(0, open);
      outside += raw.substr(close + kDelim.size());
      auto trimmed = util::trim(outside);
      if (!trimmed.empty()) out.reasoning = std::string(trimmed);
    } else {
      out.failure = FailureKind::FormatViolation;
    }
    return out;
  }

  for (const auto& pattern : refusal_patterns) {
    if (util::icontains(raw, pattern)) {
      out.failure = FailureKind::Refusal;
      return out;
    }
  }
  out.failure = FailureKind::FormatViolation;
  return out;
}

std::size_t export_finetune_dataset(std::span<const LabeledExample> pool,
                                    const PromptTemplate& tmpl, std::ostream& sink) {
  if (pool.empty()) {
    throw ClientError(ClientError::Kind::EmptyPool, "fine-tune export needs a nonempty pool");
  }
  std::size_t count = 0;
  for (const auto& example : pool) {
    auto doc = build_detection_prompt({}, example, tmpl);
    nlohmann::json record{{"prompt", doc.text},
                          {"completion", std::string(to_string(example.label))}};
    sink << record.dump() << '\n';
    if (!sink) throw ClientError(ClientError::Kind::Sink, "fine-tune sink write failed");
    ++count;
  }
  return count;
}

}  // namespace flowdet
