#include "flowdet/mock_backend.hpp"

#include <stdexcept>

#include "flowdet/util.hpp"

namespace flowdet {

MockChatBackend::MockChatBackend(Behavior behavior, std::span<const LabeledExample> known,
                                 const PromptTemplate& row_template, std::size_t step_threshold)
    : behavior_(behavior), step_threshold_(step_threshold) {
  for (const auto& example : known) {
    by_unlabeled_row_[render_row(example, false, row_template)] = example.label;
    by_labeled_row_[render_row(example, true, row_template)] = example.label;
  }
}

std::string MockChatBackend::complete(const PromptDocument& prompt, const ModelConfig&) {
  if (behavior_ == Behavior::Hash && prompt.mode == PromptMode::Detect) {
    // fnv1a's low bit only sees the byte multiset (each round multiplies by
    // an odd prime), so it cannot react to example reordering; mix first.
    auto bit = util::mix64(util::fnv1a64(prompt.text)) & 1;
    auto label = bit ? TrafficLabel::DDOS : TrafficLabel::Benign;
    return "$$$" + std::string(to_string(label)) + "$$$";
  }

  std::string row(prompt.test_row());
  TrafficLabel gold;
  if (auto it = by_unlabeled_row_.find(row); it != by_unlabeled_row_.end()) {
    gold = it->second;
  } else if (auto lt = by_labeled_row_.find(row); lt != by_labeled_row_.end()) {
    gold = lt->second;
  } else {
    return "This flow is not in my training data.";
  }

  if (prompt.mode == PromptMode::Reason) {
    std::string label(to_string(gold));
    return "The feature values of this flow follow the pattern of " + label +
           " traffic. Conclusion: " + label + ".";
  }

  TrafficLabel answer = gold;
  switch (behavior_) {
    case Behavior::Oracle:
    case Behavior::Hash: break;
    case Behavior::Adversarial: answer = flipped(gold); break;
    case Behavior::Step:
      answer = prompt.example_count >= step_threshold_ ? gold : flipped(gold);
      break;
  }
  return "$$$" + std::string(to_string(answer)) + "$$$";
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

EmbeddingVector HashEmbedder::embed(const std::string& text, const ModelConfig&) {
  return embed(text);
}

EmbeddingVector HashEmbedder::embed(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  EmbeddingVector out;
  out.values.assign(dimension_, 0.0);
  bool any_token = false;
  std::size_t i = 0;
  auto is_separator = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '|';
  };
  while (i < text.size()) {
    while (i < text.size() && is_separator(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_separator(text[i])) ++i;
    if (i == start) break;
    any_token = true;
    std::uint64_t token_hash = util::fnv1a64(std::string_view(text).substr(start, i - start));
    for (std::size_t d = 0; d < dimension_; ++d) {
      std::uint64_t h = util::mix64(token_hash ^ util::mix64(seed_ + d));
      double unit = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
      out.values[d] += unit * 2.0 - 1.0;
    }
  }
  if (!any_token) throw std::invalid_argument("cannot embed whitespace-only text");
  return out;
}

}  // namespace flowdet
