#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flowdet/example_selector.hpp"
#include "flowdet/flow_ingest.hpp"
#include "flowdet/llm_client.hpp"
#include "flowdet/mlp_baseline.hpp"
#include "flowdet/prompt_builder.hpp"

namespace flowdet {

enum class DetectorKind { LlmRandom, LlmTopK, LlmFineTuned, MlpRandom, MlpTopK };

std::string_view to_string(DetectorKind kind);
std::optional<DetectorKind> parse_detector_kind(std::string_view raw);

struct DetectorSpec {
  DetectorKind kind = DetectorKind::LlmRandom;
  std::size_t n_or_k = 0;
  /// ModelConfig for the Llm* kinds, TrainConfig for the Mlp* kinds.
  std::variant<ModelConfig, TrainConfig> model;
  OrderingStrategy ordering = OrderingStrategy::DescendingRelevance;  // LlmTopK only

  void validate() const;  // throws HarnessError(Config)
  /// Series key: kind plus ordering when it deviates from the default.
  std::string series_key() const;
  /// Cell identity carried by every case record: "<series_key>/n=<n>".
  std::string cell_id() const;
};

struct CaseRecord {
  std::size_t case_index = 0;   // position within the eval set
  std::size_t source_index = 0;
  std::string detector_id;      // cell identity
  TrafficLabel gold = TrafficLabel::Benign;
  std::optional<TrafficLabel> predicted;
  std::string failure_class;    // "" when predicted; else FormatViolation,
                                // Refusal, TransportError, TrainingError,
                                // PredictError or CaseError
  std::string failure_detail;
  std::string raw_response;     // LLM cases keep the full reply for audit
  std::string response_digest;  // fnv1a64 hex of raw_response, "" when none
  std::optional<double> score;  // MLP cases keep the sigmoid output
};

struct SeriesPoint {
  std::size_t n = 0;
  double accuracy = 0.0;
};

struct SkippedCell {
  std::string detector_id;
  std::size_t n = 0;
  std::string reason;
};

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::map<std::string, std::vector<SeriesPoint>> series;
  std::vector<SkippedCell> skipped;
  std::vector<CaseRecord> cases;
};

/// Fraction of cases whose prediction equals gold; absent predictions count
/// as incorrect. Throws HarnessError(EmptyCases).
double compute_accuracy(
    std::span<const std::pair<std::optional<TrafficLabel>, TrafficLabel>> cases);
double compute_accuracy(std::span<const CaseRecord> cases);

struct ReviewEntry {
  std::size_t case_index = 0;
  std::size_t source_index = 0;
  std::string features;  // unlabeled row rendering
  TrafficLabel gold = TrafficLabel::Benign;
  bool label_shown = false;
  std::string prompt_text;
  std::string reasoning;  // model text verbatim, or the error note when failed
  bool failed = false;
};

using Clock = std::function<std::string()>;
std::string utc_timestamp();  // current time, ISO-8601 Z

struct HarnessDeps {
  std::shared_ptr<LlmClient> client;
  ModelConfig chat_config;
  ModelConfig embed_config;
  ModelConfig finetuned_config;
  TrainConfig train_config;
  PromptTemplate detect_template = PromptTemplate::detect_default();
  std::uint64_t seed = 7;
  std::size_t parallelism = 4;
  Clock clock = utc_timestamp;  // swapped for a fixed clock in mock runs
};

/// Runs detectors over one dataset. Case records are indexed by eval-set
/// position and each case derives its own seed from the global one, so
/// results do not depend on the parallelism limit.
class Harness {
 public:
  Harness(Dataset dataset, HarnessDeps deps);

  const Dataset& dataset() const { return dataset_; }

  /// One record per eval case. Client and parser failures become per-case
  /// failure records; configuration errors throw.
  std::vector<CaseRecord> run_detector(const DetectorSpec& spec);

  /// Cross-product of kinds and n_values. Cells that are undefined at their
  /// n (top-k at 0, baselines without training data) are recorded under
  /// `skipped` instead of running.
  EvaluationReport run_sweep(std::span<const std::size_t> n_values,
                             std::span<const DetectorKind> kinds);

  /// Retrieval is computed once per case and only the arrangement varies, so
  /// the comparison isolates ordering. Requires k >= 2. When report is given
  /// it receives one series and the case records per strategy.
  std::map<OrderingStrategy, double> run_ordering_experiment(
      std::size_t k, std::span<const OrderingStrategy> strategies,
      EvaluationReport* report = nullptr);

  /// One review entry per case, reasoning text verbatim. No scoring.
  std::vector<ReviewEntry> run_reasoning_pass(std::span<const LabeledExample> cases,
                                              bool include_label);

  /// Lazily built index over the training pool, shared by the TopK paths.
  const EmbeddingIndex& index();

 private:
  DetectorSpec spec_for(DetectorKind kind, std::size_t n) const;
  std::optional<std::string> skip_reason(DetectorKind kind, std::size_t n) const;
  /// Embedding of one eval case's unlabeled row, computed once and shared by
  /// every TopK path. Safe to call from the case workers.
  const EmbeddingVector& query_embedding(std::size_t case_index);

  Dataset dataset_;
  HarnessDeps deps_;
  std::optional<EmbeddingIndex> index_;
  std::vector<std::optional<EmbeddingVector>> query_cache_;
  std::mutex query_mutex_;
};

/// Versioned structured report. Raw responses stay out of this file (the
/// cases line format keeps them); each case carries an fnv1a64 digest of its
/// raw response instead.
void write_report_json(std::ostream& out, const EvaluationReport& report);
EvaluationReport load_report_json(std::istream& in);  // throws HarnessError(Config)

/// Plot-ready companion table: detector,n,accuracy.
void write_accuracy_csv(std::ostream& out, const EvaluationReport& report);

/// Full per-case records, one JSON object per line, raw responses included.
void write_cases_jsonl(std::ostream& out, std::span<const CaseRecord> cases);

/// Plain-text review file, one block per case.
void write_review_file(std::ostream& out, std::span<const ReviewEntry> entries);

}  // namespace flowdet
