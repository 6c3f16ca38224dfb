#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowdet {

/// Number of features carried into prompts and the numeric baseline.
inline constexpr std::size_t kFeatureCount = 4;
/// Hard cap on the training pool size.
inline constexpr std::size_t kTrainPoolCap = 70;

enum class TrafficLabel { Benign, DDOS };

std::string_view to_string(TrafficLabel label);
TrafficLabel flipped(TrafficLabel label);
/// Case-insensitive canonicalization ("BENIGN" -> Benign, "DDoS" -> DDOS);
/// surrounding whitespace ignored. nullopt for anything else.
std::optional<TrafficLabel> parse_label(std::string_view raw);

struct FeaturePair {
  std::string name;
  std::string value;
  bool operator==(const FeaturePair&) const = default;
};

/// The configured 4-column projection applied to every flow record.
struct FeatureSelection {
  std::array<std::string, kFeatureCount> names;

  /// Throws IngestError unless exactly kFeatureCount distinct names are given.
  static FeatureSelection from_names(const std::vector<std::string>& names);
};

/// Full-string finite parse; "NaN", "Infinity", "" and partial numbers
/// all come back nullopt.
std::optional<double> parse_numeric_value(std::string_view raw);

/// One flow in its 4-feature semantic form: the unit of prompting,
/// embedding and MLP training.
struct LabeledExample {
  std::array<FeaturePair, kFeatureCount> pairs;
  std::array<std::optional<double>, kFeatureCount> numeric_view;
  TrafficLabel label{TrafficLabel::Benign};
  std::size_t source_index = 0;

  bool numeric() const;  // all 4 features parse to finite numbers
  bool operator==(const LabeledExample&) const = default;
};

}  // namespace flowdet
