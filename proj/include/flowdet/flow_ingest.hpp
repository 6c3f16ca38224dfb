#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowdet/types.hpp"

namespace flowdet {

/// Column layout shared by every record parsed from one source.
/// Header names are stored whitespace-trimmed.
struct FlowSchema {
  std::vector<std::string> columns;
  std::size_t label_column = 0;

  /// Position of a column, or npos.
  std::size_t column_index(std::string_view name) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// One parsed flow row: the full raw value set plus the canonical label.
class FlowRecord {
 public:
  FlowRecord(std::shared_ptr<const FlowSchema> schema, std::vector<std::string> values,
             TrafficLabel label, std::size_t source_index);

  const FlowSchema& schema() const { return *schema_; }
  const std::vector<std::string>& values() const { return values_; }
  /// Raw value of a column; throws IngestError(MissingFeature) if absent.
  const std::string& value(std::string_view column) const;
  TrafficLabel label() const { return label_; }
  std::size_t source_index() const { return source_index_; }

  bool operator==(const FlowRecord& other) const;

 private:
  std::shared_ptr<const FlowSchema> schema_;
  std::vector<std::string> values_;
  TrafficLabel label_;
  std::size_t source_index_;
};

/// Parse a comma-separated flow export. First line is the header; header
/// names are trimmed ("` Destination Port`" addressing quirk). Label values
/// canonicalize case-insensitively. Throws IngestError with row context on
/// a missing label column, an unknown label value or a ragged row.
std::vector<FlowRecord> parse_flow_csv(std::istream& source, std::string_view label_column = "Label");

/// Inverse of parse_flow_csv for records sharing one schema (header plus
/// rows, original column order). Values are quoted only when they need it.
void write_flow_csv(std::ostream& out, std::span<const FlowRecord> records);

/// Project a record onto the selected 4 features. Values are copied
/// verbatim; numeric_view is parsed best-effort.
LabeledExample project(const FlowRecord& record, const FeatureSelection& selection);

struct Dataset {
  std::vector<LabeledExample> train_pool;  // size <= kTrainPoolCap
  std::vector<LabeledExample> eval_set;
  std::uint64_t selection_seed = 0;
};

/// Deterministic label-stratified sampling of disjoint train/eval pools.
/// Both pools get at least one example of each label whenever the source
/// and the requested sizes allow it. Pools come back sorted by source row.
Dataset build_dataset(std::span<const FlowRecord> records, const FeatureSelection& selection,
                      std::size_t train_size, std::size_t eval_size, std::uint64_t seed);

/// Pool dump used by the CLI: feature1..feature4,label,source_index.
void write_example_csv(std::ostream& out, std::span<const LabeledExample> pool);

namespace csv {
// Minimal quote-aware CSV primitives (shared with the report writer).
std::vector<std::string> parse_line(std::string_view line);
std::string escape_field(std::string_view field);
}  // namespace csv

}  // namespace flowdet
