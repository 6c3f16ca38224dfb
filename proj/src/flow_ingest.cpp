#include "flowdet/flow_ingest.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <random>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

namespace csv {

std::vector<std::string> parse_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current += c;
      }
    } else if (c == '"' && current.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string escape_field(std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace csv

std::size_t FlowSchema::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  return npos;
}

FlowRecord::FlowRecord(std::shared_ptr<const FlowSchema> schema, std::vector<std::string> values,
                       TrafficLabel label, std::size_t source_index)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      label_(label),
      source_index_(source_index) {}

const std::string& FlowRecord::value(std::string_view column) const {
  auto idx = schema_->column_index(column);
  if (idx == FlowSchema::npos) {
    throw IngestError(IngestError::Kind::MissingFeature,
                      "column \"" + std::string(column) + "\" not present in schema");
  }
  return values_[idx];
}

bool FlowRecord::operator==(const FlowRecord& other) const {
  return schema_->columns == other.schema_->columns && values_ == other.values_ &&
         label_ == other.label_ && source_index_ == other.source_index_;
}

std::vector<FlowRecord> parse_flow_csv(std::istream& source, std::string_view label_column) {
  std::string line;
  if (!std::getline(source, line)) {
    throw IngestError(IngestError::Kind::MissingLabelColumn, "empty input: no header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto schema = std::make_shared<FlowSchema>();
  for (auto& name : csv::parse_line(line)) {
    schema->columns.emplace_back(util::trim(name));
  }
  auto label_idx = schema->column_index(util::trim(label_column));
  if (label_idx == FlowSchema::npos) {
    throw IngestError(IngestError::Kind::MissingLabelColumn,
                      "label column \"" + std::string(label_column) + "\" not found in header");
  }
  schema->label_column = label_idx;

  std::vector<FlowRecord> records;
  std::size_t row = 0;  // data-row index, 0-based
  while (std::getline(source, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::parse_line(line);
    if (fields.size() != schema->columns.size()) {
      throw IngestError(IngestError::Kind::RaggedRow,
                        "row " + std::to_string(row + 1) + ": expected " +
                            std::to_string(schema->columns.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    auto label = parse_label(fields[label_idx]);
    if (!label) {
      throw IngestError(IngestError::Kind::UnknownLabelValue,
                        "row " + std::to_string(row + 1) + ": unknown label value \"" +
                            fields[label_idx] + "\"");
    }
    records.emplace_back(schema, std::move(fields), *label, row);
    ++row;
  }
  return records;
}

void write_flow_csv(std::ostream& out, std::span<const FlowRecord> records) {
  if (records.empty()) return;
  const auto& columns = records.front().schema().columns;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out << ',';
    out << csv::escape_field(columns[i]);
  }
  out << '\n';
  for (const auto& record : records) {
    const auto& values = record.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ',';
      out << csv::escape_field(values[i]);
    }
    out << '\n';
  }
}

LabeledExample project(const FlowRecord& record, const FeatureSelection& selection) {
  LabeledExample example;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto& value = record.value(selection.names[i]);
    example.pairs[i] = {selection.names[i], value};
    example.numeric_view[i] = parse_numeric_value(value);
  }
  example.label = record.label();
  example.source_index = record.source_index();
  return example;
}

namespace {

// Rounded proportional split of `want` across two groups, at least one from
// each group whenever both are nonempty and `want` allows.
std::pair<std::size_t, std::size_t> stratified_counts(std::size_t want, std::size_t group_a,
                                                      std::size_t group_b) {
  if (group_a == 0) return {0, std::min(want, group_b)};
  if (group_b == 0) return {std::min(want, group_a), 0};
  std::size_t total = group_a + group_b;
  std::size_t take_a = (want * group_a + total / 2) / total;
  if (want >= 2) {
    take_a = std::clamp(take_a, std::size_t{1}, want - 1);
  }
  // feasibility against actual group sizes
  std::size_t low = want > group_b ? want - group_b : 0;
  take_a = std::clamp(take_a, low, std::min(group_a, want));
  return {take_a, want - take_a};
}

}  // namespace

Dataset build_dataset(std::span<const FlowRecord> records, const FeatureSelection& selection,
                      std::size_t train_size, std::size_t eval_size, std::uint64_t seed) {
  if (train_size == 0 || eval_size == 0) {
    throw IngestError(IngestError::Kind::InsufficientRecords,
                      "train and eval sizes must both be positive");
  }
  if (train_size > kTrainPoolCap) {
    throw IngestError(IngestError::Kind::TrainSizeExceedsCap,
                      "train_size " + std::to_string(train_size) + " exceeds cap of " +
                          std::to_string(kTrainPoolCap));
  }
  if (records.size() < train_size + eval_size) {
    throw IngestError(IngestError::Kind::InsufficientRecords,
                      "need " + std::to_string(train_size + eval_size) + " records, have " +
                          std::to_string(records.size()));
  }

  std::vector<std::size_t> benign, ddos;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (records[i].label() == TrafficLabel::Benign ? benign : ddos).push_back(i);
  }
  std::mt19937_64 rng(seed);
  util::shuffle(benign, rng);
  util::shuffle(ddos, rng);

  auto draw = [&](std::size_t want) {
    auto [from_benign, from_ddos] = stratified_counts(want, benign.size(), ddos.size());
    std::vector<std::size_t> chosen;
    chosen.insert(chosen.end(), benign.end() - static_cast<std::ptrdiff_t>(from_benign), benign.end());
    chosen.insert(chosen.end(), ddos.end() - static_cast<std::ptrdiff_t>(from_ddos), ddos.end());
    benign.resize(benign.size() - from_benign);
    ddos.resize(ddos.size() - from_ddos);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  };

  Dataset dataset;
  dataset.selection_seed = seed;
  for (auto idx : draw(train_size)) dataset.train_pool.push_back(project(records[idx], selection));
  for (auto idx : draw(eval_size)) dataset.eval_set.push_back(project(records[idx], selection));
  return dataset;
}

void write_example_csv(std::ostream& out, std::span<const LabeledExample> pool) {
  if (pool.empty()) {
    out << "feature1,feature2,feature3,feature4,label,source_index\n";
    return;
  }
  for (const auto& pair : pool.front().pairs) out << csv::escape_field(pair.name) << ',';
  out << "label,source_index\n";
  for (const auto& example : pool) {
    for (const auto& pair : example.pairs) out << csv::escape_field(pair.value) << ',';
    out << to_string(example.label) << ',' << example.source_index << '\n';
  }
}

}  // namespace flowdet
