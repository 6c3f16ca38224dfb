#include "flowdet/mlp_baseline.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

std::array<double, kFeatureCount> Scaler::transform(const LabeledExample& example) const {
  std::array<double, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!example.numeric_view[i]) {
      throw MlpError(MlpError::Kind::NonNumericFeature,
                     "source_index " + std::to_string(example.source_index) + ": feature \"" +
                         example.pairs[i].name + "\" value \"" + example.pairs[i].value +
                         "\" is not numeric");
    }
    out[i] = (*example.numeric_view[i] - mean[i]) / std[i];
  }
  return out;
}

Scaler fit_scaler(std::span<const LabeledExample> train) {
  if (train.empty()) throw std::invalid_argument("cannot fit a scaler on an empty pool");
  Scaler scaler;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    double sum = 0;
    for (const auto& example : train) {
      if (!example.numeric_view[i]) {
        throw MlpError(MlpError::Kind::NonNumericFeature,
                       "source_index " + std::to_string(example.source_index) + ": feature \"" +
                           example.pairs[i].name + "\" value \"" + example.pairs[i].value +
                           "\" is not numeric");
      }
      sum += *example.numeric_view[i];
    }
    double mean = sum / static_cast<double>(train.size());
    double sq = 0;
    for (const auto& example : train) {
      double d = *example.numeric_view[i] - mean;
      sq += d * d;
    }
    double std_dev = std::sqrt(sq / static_cast<double>(train.size()));
    scaler.mean[i] = mean;
    scaler.std[i] = std_dev > 0 ? std_dev : 1.0;
  }
  return scaler;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// BCE expressed on the logit; stable for large |z|.
double bce_from_logit(double z, double target) {
  return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

double output_logit(const MlpModel& model, std::span<const double> x, std::vector<double>& hidden) {
  hidden.assign(model.hidden_width, 0.0);
  for (std::size_t j = 0; j < model.hidden_width; ++j) {
    double z = model.b1[j];
    const double* row = model.w1.data() + j * model.input_width;
    for (std::size_t i = 0; i < model.input_width; ++i) z += row[i] * x[i];
    hidden[j] = z > 0 ? z : 0.0;
  }
  double z2 = model.b2;
  for (std::size_t j = 0; j < model.hidden_width; ++j) z2 += model.w2[j] * hidden[j];
  return z2;
}

}  // namespace

double forward(const MlpModel& model, std::span<const double> scaled_input) {
  std::vector<double> hidden;
  return sigmoid(output_logit(model, scaled_input, hidden));
}

double loss_and_gradients(const MlpModel& model, std::span<const std::vector<double>> inputs,
                          std::span<const double> targets, BatchGradients& gradients) {
  gradients.w1.assign(model.w1.size(), 0.0);
  gradients.b1.assign(model.b1.size(), 0.0);
  gradients.w2.assign(model.w2.size(), 0.0);
  gradients.b2 = 0.0;

  double loss = 0;
  std::vector<double> hidden;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const auto& x = inputs[s];
    double z2 = output_logit(model, x, hidden);
    loss += bce_from_logit(z2, targets[s]);

    double dz2 = sigmoid(z2) - targets[s];
    gradients.b2 += dz2;
    for (std::size_t j = 0; j < model.hidden_width; ++j) {
      gradients.w2[j] += dz2 * hidden[j];
      if (hidden[j] > 0) {
        double dz1 = dz2 * model.w2[j];
        gradients.b1[j] += dz1;
        double* row = gradients.w1.data() + j * model.input_width;
        for (std::size_t i = 0; i < model.input_width; ++i) row[i] += dz1 * x[i];
      }
    }
  }

  double inv = 1.0 / static_cast<double>(inputs.size());
  for (auto& g : gradients.w1) g *= inv;
  for (auto& g : gradients.b1) g *= inv;
  for (auto& g : gradients.w2) g *= inv;
  gradients.b2 *= inv;
  return loss * inv;
}

MlpModel train(std::span<const LabeledExample> pool, const TrainConfig& config) {
  if (pool.empty()) throw std::invalid_argument("training pool is empty");
  if (config.learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  bool has_benign = false, has_ddos = false;
  for (const auto& example : pool) {
    (example.label == TrafficLabel::Benign ? has_benign : has_ddos) = true;
  }
  if (!has_benign || !has_ddos) {
    throw MlpError(MlpError::Kind::SingleClassPool,
                   "training pool holds a single class; both labels are required");
  }

  MlpModel model;
  model.seed = config.seed;
  model.scaler = fit_scaler(pool);

  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  inputs.reserve(pool.size());
  targets.reserve(pool.size());
  for (const auto& example : pool) {
    auto scaled = model.scaler.transform(example);
    inputs.emplace_back(scaled.begin(), scaled.end());
    targets.push_back(example.label == TrafficLabel::DDOS ? 1.0 : 0.0);
  }

  std::mt19937_64 rng(config.seed);
  double r1 = std::sqrt(6.0 / static_cast<double>(model.input_width + model.hidden_width));
  double r2 = std::sqrt(6.0 / static_cast<double>(model.hidden_width + 1));
  model.w1.resize(model.hidden_width * model.input_width);
  model.b1.assign(model.hidden_width, 0.0);
  model.w2.resize(model.hidden_width);
  for (auto& w : model.w1) w = util::uniform_in(rng, -r1, r1);
  for (auto& w : model.w2) w = util::uniform_in(rng, -r2, r2);

  BatchGradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = loss_and_gradients(model, inputs, targets, grads);
    if (!std::isfinite(loss)) {
      throw MlpError(MlpError::Kind::DivergedLoss,
                     "non-finite loss at epoch " + std::to_string(epoch));
    }
    for (std::size_t i = 0; i < model.w1.size(); ++i) model.w1[i] -= config.learning_rate * grads.w1[i];
    for (std::size_t j = 0; j < model.hidden_width; ++j) {
      model.b1[j] -= config.learning_rate * grads.b1[j];
      model.w2[j] -= config.learning_rate * grads.w2[j];
    }
    model.b2 -= config.learning_rate * grads.b2;
  }

  double final_loss = 0;
  std::vector<double> hidden;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    final_loss += bce_from_logit(output_logit(model, inputs[s], hidden), targets[s]);
  }
  model.final_loss = final_loss / static_cast<double>(inputs.size());
  if (!std::isfinite(model.final_loss)) {
    throw MlpError(MlpError::Kind::DivergedLoss, "non-finite final loss");
  }
  return model;
}

std::pair<TrafficLabel, double> predict(const MlpModel& model, const LabeledExample& example) {
  auto scaled = model.scaler.transform(example);
  double score = forward(model, scaled);
  return {score >= 0.5 ? TrafficLabel::DDOS : TrafficLabel::Benign, score};
}

namespace {

constexpr std::string_view kModelMagic = "flowdet-mlp v1";

void write_values(std::ostream& out, std::string_view key, std::span<const double> values) {
  out << key;
  for (double v : values) out << ' ' << util::format_double(v);
  out << '\n';
}

[[noreturn]] void bad_model(const std::string& what) {
  throw MlpError(MlpError::Kind::BadModelFile, what);
}

std::vector<double> read_values(std::istream& in, std::string_view key, std::size_t count) {
  std::string line;
  if (!std::getline(in, line)) bad_model("truncated model file at \"" + std::string(key) + "\"");
  std::istringstream fields(line);
  std::string name;
  fields >> name;
  if (name != key) bad_model("expected field \"" + std::string(key) + "\", found \"" + name + "\"");
  std::vector<double> values;
  double v;
  while (fields >> v) values.push_back(v);
  if (values.size() != count) {
    bad_model("field \"" + std::string(key) + "\" holds " + std::to_string(values.size()) +
              " values, expected " + std::to_string(count));
  }
  return values;
}

}  // namespace

void save_model(const MlpModel& model, std::ostream& out) {
  out << kModelMagic << '\n';
  out << "input " << model.input_width << '\n';
  out << "hidden " << model.hidden_width << '\n';
  out << "seed " << model.seed << '\n';
  out << "final_loss " << util::format_double(model.final_loss) << '\n';
  write_values(out, "scaler_mean", model.scaler.mean);
  write_values(out, "scaler_std", model.scaler.std);
  write_values(out, "w1", model.w1);
  write_values(out, "b1", model.b1);
  write_values(out, "w2", model.w2);
  write_values(out, "b2", std::span<const double>(&model.b2, 1));
}

MlpModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic) bad_model("missing model magic header");

  auto read_uint = [&](std::string_view key) -> std::uint64_t {
    std::string field_line;
    if (!std::getline(in, field_line)) bad_model("truncated model file at \"" + std::string(key) + "\"");
    auto fields = util::split(field_line, ' ');
    if (fields.size() != 2 || fields[0] != key) {
      bad_model("expected integer field \"" + std::string(key) + "\"");
    }
    try {
      return std::stoull(fields[1]);
    } catch (const std::exception&) {
      bad_model("field \"" + std::string(key) + "\" is not an integer");
    }
  };
  MlpModel model;
  model.input_width = read_uint("input");
  model.hidden_width = read_uint("hidden");
  if (model.input_width != kFeatureCount || model.hidden_width != kHiddenWidth) {
    bad_model("format v1 requires input " + std::to_string(kFeatureCount) + " and hidden " +
              std::to_string(kHiddenWidth));
  }
  model.seed = read_uint("seed");
  model.final_loss = read_values(in, "final_loss", 1)[0];
  auto mean = read_values(in, "scaler_mean", kFeatureCount);
  auto std_dev = read_values(in, "scaler_std", kFeatureCount);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    model.scaler.mean[i] = mean[i];
    model.scaler.std[i] = std_dev[i];
    if (model.scaler.std[i] <= 0) bad_model("scaler std values must be strictly positive");
  }
  model.w1 = read_values(in, "w1", model.hidden_width * model.input_width);
  model.b1 = read_values(in, "b1", model.hidden_width);
  model.w2 = read_values(in, "w2", model.hidden_width);
  model.b2 = read_values(in, "b2", 1)[0];
  return model;
}

}  // namespace flowdet
