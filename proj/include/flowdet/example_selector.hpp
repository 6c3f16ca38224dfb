#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowdet/prompt_builder.hpp"
#include "flowdet/types.hpp"

namespace flowdet {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

/// Throws SelectError: DimensionMismatch on unequal dimensions,
/// DegenerateVector when either vector has zero norm.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

using Embedder = std::function<EmbeddingVector(const std::string&)>;

struct IndexEntry {
  std::size_t source_index = 0;
  EmbeddingVector vector;
  LabeledExample example;
};

/// Exact in-memory similarity index over a training pool. Immutable once
/// built; concurrent reads are safe.
class EmbeddingIndex {
 public:
  /// Embeds each example's unlabeled row rendering. Entries end up ordered
  /// by source_index. Throws SelectError (EmbedderFailure wraps whatever the
  /// embedder threw, DimensionMismatch on inconsistent dimensions).
  static EmbeddingIndex build(std::span<const LabeledExample> pool, const Embedder& embedder,
                              const PromptTemplate& tmpl = PromptTemplate::detect_default());

  std::size_t size() const { return entries_.size(); }
  std::size_t dimension() const { return dimension_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  /// Flat versioned text format: header (magic, dimension, count, feature
  /// names), then one tab-separated record per entry.
  void save(std::ostream& out) const;
  static EmbeddingIndex load(std::istream& in);  // throws SelectError(BadIndexFile)

 private:
  std::vector<IndexEntry> entries_;
  std::size_t dimension_ = 0;
};

enum class OrderingStrategy { DescendingRelevance, MostRelevantMiddle, MostRelevantEnds, AsGiven };

std::string_view to_string(OrderingStrategy strategy);
std::optional<OrderingStrategy> parse_ordering(std::string_view raw);

/// Uniform sample without replacement, order = draw order, deterministic
/// under seed. Throws SelectError(NTooLarge) when n exceeds the pool.
std::vector<LabeledExample> select_random(std::span<const LabeledExample> pool, std::size_t n,
                                          std::uint64_t seed);

/// k highest-cosine entries against query, ties broken by ascending
/// source_index, then arranged per strategy. Throws SelectError
/// (KTooLarge, DimensionMismatch).
std::vector<LabeledExample> select_top_k(const EmbeddingIndex& index, const EmbeddingVector& query,
                                         std::size_t k, OrderingStrategy strategy);

/// Input is most-relevant-first. DescendingRelevance and AsGiven keep it;
/// MostRelevantEnds interleaves odd ranks forward then even ranks reversed
/// (best items land on both ends); MostRelevantMiddle applies the same
/// interleave to the reversed ranking (best items land in the middle).
std::vector<LabeledExample> reorder(std::vector<LabeledExample> ranked,
                                    OrderingStrategy strategy);

}  // namespace flowdet
