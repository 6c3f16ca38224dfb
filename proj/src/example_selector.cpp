#include "flowdet/example_selector.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw SelectError(SelectError::Kind::DimensionMismatch,
                      "cosine over dimensions " + std::to_string(a.dimension()) + " and " +
                          std::to_string(b.dimension()));
  }
  double dot = 0, norm_a = 0, norm_b = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    norm_a += a.values[i] * a.values[i];
    norm_b += b.values[i] * b.values[i];
  }
  if (norm_a == 0 || norm_b == 0) {
    throw SelectError(SelectError::Kind::DegenerateVector, "cosine against a zero vector");
  }
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

EmbeddingIndex EmbeddingIndex::build(std::span<const LabeledExample> pool,
                                     const Embedder& embedder, const PromptTemplate& tmpl) {
  EmbeddingIndex index;
  for (const auto& example : pool) {
    EmbeddingVector vector;
    try {
      vector = embedder(render_row(example, false, tmpl));
    } catch (const std::exception& e) {
      throw SelectError(SelectError::Kind::EmbedderFailure,
                        "embedder failed on source_index " +
                            std::to_string(example.source_index) + ": " + e.what());
    }
    for (double v : vector.values) {
      if (!std::isfinite(v)) {
        throw SelectError(SelectError::Kind::EmbedderFailure,
                          "non-finite embedding value at source_index " +
                              std::to_string(example.source_index));
      }
    }
    if (index.entries_.empty()) {
      if (vector.dimension() == 0) {
        throw SelectError(SelectError::Kind::DimensionMismatch, "embedder returned dimension 0");
      }
      index.dimension_ = vector.dimension();
    } else if (vector.dimension() != index.dimension_) {
      throw SelectError(SelectError::Kind::DimensionMismatch,
                        "embedder dimension changed from " + std::to_string(index.dimension_) +
                            " to " + std::to_string(vector.dimension()));
    }
    index.entries_.push_back({example.source_index, std::move(vector), example});
  }
  std::sort(index.entries_.begin(), index.entries_.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.source_index < b.source_index; });
  return index;
}

namespace {

constexpr std::string_view kIndexMagic = "flowdet-index v1";

std::string escape_tsv(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_tsv(std::string_view raw) {
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '\\' || i + 1 == raw.size()) {
      out += raw[i];
      continue;
    }
    switch (raw[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += raw[i];
    }
  }
  return out;
}

[[noreturn]] void bad_index(const std::string& what) {
  throw SelectError(SelectError::Kind::BadIndexFile, what);
}

}  // namespace

void EmbeddingIndex::save(std::ostream& out) const {
  if (entries_.empty()) bad_index("refusing to save an empty index");
  out << kIndexMagic << '\n';
  out << "dimension\t" << dimension_ << '\n';
  out << "count\t" << entries_.size() << '\n';
  out << "features";
  for (const auto& pair : entries_.front().example.pairs) out << '\t' << escape_tsv(pair.name);
  out << '\n';
  for (const auto& entry : entries_) {
    out << entry.source_index;
    for (const auto& pair : entry.example.pairs) out << '\t' << escape_tsv(pair.value);
    out << '\t' << to_string(entry.example.label);
    for (double v : entry.vector.values) out << '\t' << util::format_double(v);
    out << '\n';
  }
}

EmbeddingIndex EmbeddingIndex::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kIndexMagic) bad_index("missing index magic header");

  auto read_header = [&](std::string_view key) -> std::string {
    if (!std::getline(in, line)) bad_index("truncated index header");
    auto fields = util::split(line, '\t');
    if (fields.size() < 2 || fields[0] != key) bad_index("expected header line \"" + std::string(key) + "\"");
    return fields[1];
  };
  std::size_t dimension = 0, count = 0;
  try {
    dimension = std::stoul(read_header("dimension"));
    count = std::stoul(read_header("count"));
  } catch (const std::exception&) {
    bad_index("non-numeric dimension or count");
  }
  if (dimension == 0 || count == 0) bad_index("index must have positive dimension and count");

  if (!std::getline(in, line)) bad_index("missing features header");
  auto feature_fields = util::split(line, '\t');
  if (feature_fields.size() != 1 + kFeatureCount || feature_fields[0] != "features") {
    bad_index("features header must list exactly " + std::to_string(kFeatureCount) + " names");
  }

  EmbeddingIndex index;
  index.dimension_ = dimension;
  for (std::size_t row = 0; row < count; ++row) {
    if (!std::getline(in, line)) bad_index("expected " + std::to_string(count) + " entries");
    auto fields = util::split(line, '\t');
    if (fields.size() != 1 + kFeatureCount + 1 + dimension) {
      bad_index("entry " + std::to_string(row) + " has wrong field count");
    }
    IndexEntry entry;
    try {
      entry.source_index = std::stoul(fields[0]);
    } catch (const std::exception&) {
      bad_index("entry " + std::to_string(row) + " has a non-numeric source_index");
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      entry.example.pairs[i].name = unescape_tsv(feature_fields[1 + i]);
      entry.example.pairs[i].value = unescape_tsv(fields[1 + i]);
      entry.example.numeric_view[i] = parse_numeric_value(entry.example.pairs[i].value);
    }
    auto label = parse_label(fields[1 + kFeatureCount]);
    if (!label) bad_index("entry " + std::to_string(row) + " has an unknown label");
    entry.example.label = *label;
    entry.example.source_index = entry.source_index;
    entry.vector.values.reserve(dimension);
    for (std::size_t i = 0; i < dimension; ++i) {
      auto value = parse_numeric_value(fields[2 + kFeatureCount + i]);
      if (!value) bad_index("entry " + std::to_string(row) + " has a non-numeric vector value");
      entry.vector.values.push_back(*value);
    }
    index.entries_.push_back(std::move(entry));
  }
  for (std::size_t i = 1; i < index.entries_.size(); ++i) {
    if (index.entries_[i - 1].source_index >= index.entries_[i].source_index) {
      bad_index("entries must be strictly ordered by source_index");
    }
  }
  return index;
}

std::string_view to_string(OrderingStrategy strategy) {
  switch (strategy) {
    case OrderingStrategy::DescendingRelevance: return "DescendingRelevance";
    case OrderingStrategy::MostRelevantMiddle: return "MostRelevantMiddle";
    case OrderingStrategy::MostRelevantEnds: return "MostRelevantEnds";
    case OrderingStrategy::AsGiven: return "AsGiven";
  }
  return "AsGiven";
}

std::optional<OrderingStrategy> parse_ordering(std::string_view raw) {
  std::string key;
  for (char c : raw) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "descendingrelevance") return OrderingStrategy::DescendingRelevance;
  if (key == "mostrelevantmiddle") return OrderingStrategy::MostRelevantMiddle;
  if (key == "mostrelevantends") return OrderingStrategy::MostRelevantEnds;
  if (key == "asgiven") return OrderingStrategy::AsGiven;
  return std::nullopt;
}

std::vector<LabeledExample> select_random(std::span<const LabeledExample> pool, std::size_t n,
                                          std::uint64_t seed) {
  if (n > pool.size()) {
    throw SelectError(SelectError::Kind::NTooLarge,
                      "cannot draw " + std::to_string(n) + " from a pool of " +
                          std::to_string(pool.size()));
  }
  std::vector<std::size_t> indices(pool.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<LabeledExample> drawn;
  drawn.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + util::uniform_below(rng, indices.size() - i);
    std::swap(indices[i], indices[j]);
    drawn.push_back(pool[indices[i]]);
  }
  return drawn;
}

std::vector<LabeledExample> select_top_k(const EmbeddingIndex& index, const EmbeddingVector& query,
                                         std::size_t k, OrderingStrategy strategy) {
  if (k < 1 || k > index.size()) {
    throw SelectError(SelectError::Kind::KTooLarge,
                      "k=" + std::to_string(k) + " outside [1, " + std::to_string(index.size()) +
                          "]");
  }
  struct Scored {
    double similarity;
    std::size_t source_index;
    const LabeledExample* example;
  };
  std::vector<Scored> scored;
  scored.reserve(index.size());
  for (const auto& entry : index.entries()) {
    scored.push_back({cosine_similarity(entry.vector, query), entry.source_index, &entry.example});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.source_index < b.source_index;
  });
  std::vector<LabeledExample> ranked;
  ranked.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ranked.push_back(*scored[i].example);
  return reorder(std::move(ranked), strategy);
}

namespace {

std::vector<LabeledExample> best_at_ends(std::vector<LabeledExample> ranked) {
  std::vector<LabeledExample> out;
  out.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); i += 2) out.push_back(std::move(ranked[i]));
  std::size_t n = ranked.size();
  if (n >= 2) {
    std::size_t last_odd = (n - 1) % 2 == 1 ? n - 1 : n - 2;
    for (std::size_t i = last_odd;; i -= 2) {
      out.push_back(std::move(ranked[i]));
      if (i < 3) break;
    }
  }
  return out;
}

}  // namespace

std::vector<LabeledExample> reorder(std::vector<LabeledExample> ranked,
                                    OrderingStrategy strategy) {
  switch (strategy) {
    case OrderingStrategy::DescendingRelevance:
    case OrderingStrategy::AsGiven:
      return ranked;
    case OrderingStrategy::MostRelevantEnds:
      return best_at_ends(std::move(ranked));
    case OrderingStrategy::MostRelevantMiddle:
      std::reverse(ranked.begin(), ranked.end());
      return best_at_ends(std::move(ranked));
  }
  return ranked;
}

}  // namespace flowdet
