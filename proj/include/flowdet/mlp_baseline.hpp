#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "flowdet/types.hpp"

namespace flowdet {

inline constexpr std::size_t kHiddenWidth = 20;

/// Train-set standardization. Population statistics; a constant feature gets
/// std 1 so scaling stays defined.
struct Scaler {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> std{};

  /// Throws MlpError(NonNumericFeature) when any feature fails to parse.
  std::array<double, kFeatureCount> transform(const LabeledExample& example) const;
};

Scaler fit_scaler(std::span<const LabeledExample> train);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 500;
  std::uint64_t seed = 7;
};

/// sigmoid(w2 . relu(w1 x + b1) + b2) on scaled inputs. train() always
/// produces input_width 4 and hidden_width 20; the widths stay explicit so
/// tests can drive small hand-built networks through the same arithmetic.
struct MlpModel {
  std::size_t input_width = kFeatureCount;
  std::size_t hidden_width = kHiddenWidth;
  std::vector<double> w1;  // hidden_width x input_width, row-major by hidden unit
  std::vector<double> b1;  // hidden_width
  std::vector<double> w2;  // hidden_width
  double b2 = 0.0;
  Scaler scaler;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
};

/// Score in (0,1) for one already-scaled input of size input_width.
double forward(const MlpModel& model, std::span<const double> scaled_input);

struct BatchGradients {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
};

/// Mean binary cross-entropy over the batch and its analytic gradients.
/// Exposed so tests can hold it against central finite differences.
double loss_and_gradients(const MlpModel& model, std::span<const std::vector<double>> inputs,
                          std::span<const double> targets, BatchGradients& gradients);

/// Full-batch gradient descent on standardized features, targets Benign=0 /
/// DDOS=1, Glorot-uniform init from config.seed. Throws MlpError
/// (SingleClassPool, NonNumericFeature, DivergedLoss).
MlpModel train(std::span<const LabeledExample> pool, const TrainConfig& config);

/// Label is DDOS iff score >= 0.5.
std::pair<TrafficLabel, double> predict(const MlpModel& model, const LabeledExample& example);

/// Versioned text format, fixed field order, round-trip exact doubles.
void save_model(const MlpModel& model, std::ostream& out);
MlpModel load_model(std::istream& in);  // throws MlpError(BadModelFile)

}  // namespace flowdet
