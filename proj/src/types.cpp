#include "flowdet/types.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

std::string_view to_string(TrafficLabel label) {
  return label == TrafficLabel::Benign ? "Benign" : "DDOS";
}

TrafficLabel flipped(TrafficLabel label) {
  return label == TrafficLabel::Benign ? TrafficLabel::DDOS : TrafficLabel::Benign;
}

std::optional<TrafficLabel> parse_label(std::string_view raw) {
  auto t = util::trim(raw);
  if (util::iequals(t, "benign")) return TrafficLabel::Benign;
  if (util::iequals(t, "ddos")) return TrafficLabel::DDOS;
  return std::nullopt;
}

FeatureSelection FeatureSelection::from_names(const std::vector<std::string>& names) {
  if (names.size() != kFeatureCount) {
    throw IngestError(IngestError::Kind::MissingFeature,
                      "feature selection needs exactly " + std::to_string(kFeatureCount) +
                          " names, got " + std::to_string(names.size()));
  }
  std::set<std::string> unique(names.begin(), names.end());
  if (unique.size() != kFeatureCount) {
    throw IngestError(IngestError::Kind::MissingFeature, "feature selection has duplicate names");
  }
  FeatureSelection sel;
  for (std::size_t i = 0; i < kFeatureCount; ++i) sel.names[i] = names[i];
  return sel;
}

std::optional<double> parse_numeric_value(std::string_view raw) {
  auto t = util::trim(raw);
  if (t.empty()) return std::nullopt;
  std::string buf(t);
  char* end = nullptr;
  double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

bool LabeledExample::numeric() const {
  for (const auto& v : numeric_view)
    if (!v.has_value()) return false;
  return true;
}

}  // namespace flowdet
