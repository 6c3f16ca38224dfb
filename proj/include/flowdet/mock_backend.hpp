#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>

#include "flowdet/llm_client.hpp"

namespace flowdet {

/// Offline chat stand-in keyed by rendered flow rows. Oracle answers with
/// the gold label, Adversarial with the flipped one, Step answers correctly
/// iff the prompt carries at least `step_threshold` examples, and Hash
/// ignores the gold mapping and picks a label from the prompt text hash.
/// Reason-mode prompts get a fixed-template explanation ending in the gold
/// label.
class MockChatBackend : public ChatBackend {
 public:
  enum class Behavior { Oracle, Adversarial, Step, Hash };

  MockChatBackend(Behavior behavior, std::span<const LabeledExample> known,
                  const PromptTemplate& row_template, std::size_t step_threshold = 0);

  std::string complete(const PromptDocument& prompt, const ModelConfig& config) override;

 private:
  Behavior behavior_;
  std::size_t step_threshold_;
  std::unordered_map<std::string, TrafficLabel> by_unlabeled_row_;
  std::unordered_map<std::string, TrafficLabel> by_labeled_row_;
};

/// Deterministic, platform-stable embedding: each whitespace/pipe token is
/// hashed and expanded into a fixed-dimension vector of values in [-1, 1);
/// the text embedding is the token-vector sum. Shared tokens correlate,
/// distinct texts diverge.
class HashEmbedder : public EmbedBackend {
 public:
  explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0x5eedf10d);

  EmbeddingVector embed(const std::string& text, const ModelConfig& config) override;
  EmbeddingVector embed(const std::string& text);

  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

}  // namespace flowdet
