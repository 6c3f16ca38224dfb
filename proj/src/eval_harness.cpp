#include "flowdet/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

namespace flowdet {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::LlmRandom: return "LlmRandom";
    case DetectorKind::LlmTopK: return "LlmTopK";
    case DetectorKind::LlmFineTuned: return "LlmFineTuned";
    case DetectorKind::MlpRandom: return "MlpRandom";
    case DetectorKind::MlpTopK: return "MlpTopK";
  }
  return "LlmRandom";
}

std::optional<DetectorKind> parse_detector_kind(std::string_view raw) {
  std::string key;
  for (char c : raw) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "llmrandom") return DetectorKind::LlmRandom;
  if (key == "llmtopk") return DetectorKind::LlmTopK;
  if (key == "llmfinetuned") return DetectorKind::LlmFineTuned;
  if (key == "mlprandom") return DetectorKind::MlpRandom;
  if (key == "mlptopk") return DetectorKind::MlpTopK;
  return std::nullopt;
}

void DetectorSpec::validate() const {
  if (n_or_k > kTrainPoolCap) {
    throw HarnessError(HarnessError::Kind::Config,
                       "n_or_k " + std::to_string(n_or_k) + " exceeds the cap of " +
                           std::to_string(kTrainPoolCap));
  }
  bool is_mlp = kind == DetectorKind::MlpRandom || kind == DetectorKind::MlpTopK;
  if (is_mlp != std::holds_alternative<TrainConfig>(model)) {
    throw HarnessError(HarnessError::Kind::Config,
                       std::string(to_string(kind)) + " carries the wrong model config type");
  }
  if (!is_mlp) std::get<ModelConfig>(model).validate();
}

std::string DetectorSpec::series_key() const {
  std::string key(to_string(kind));
  if (kind == DetectorKind::LlmTopK && ordering != OrderingStrategy::DescendingRelevance) {
    key += "/";
    key += to_string(ordering);
  }
  return key;
}

std::string DetectorSpec::cell_id() const {
  return series_key() + "/n=" + std::to_string(n_or_k);
}

double compute_accuracy(
    std::span<const std::pair<std::optional<TrafficLabel>, TrafficLabel>> cases) {
  if (cases.empty()) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "accuracy over zero cases is undefined");
  }
  std::size_t correct = 0;
  for (const auto& [predicted, gold] : cases) {
    if (predicted && *predicted == gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(cases.size());
}

double compute_accuracy(std::span<const CaseRecord> cases) {
  if (cases.empty()) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "accuracy over zero cases is undefined");
  }
  std::size_t correct = 0;
  for (const auto& record : cases) {
    if (record.predicted && *record.predicted == record.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(cases.size());
}

std::string utc_timestamp() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

/// Runs work(0..count) across min(parallelism, count) threads. Results must
/// be written to per-index slots so the schedule cannot affect them.
void parallel_cases(std::size_t count, std::size_t parallelism,
                    const std::function<void(std::size_t)>& work) {
  if (count == 0) return;
  std::size_t width = std::clamp<std::size_t>(parallelism, 1, count);
  if (width == 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(width);
  for (std::size_t t = 0; t < width; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (error) std::rethrow_exception(error);
}

std::string digest_of(std::string_view raw) {
  return raw.empty() ? std::string{} : util::hex64(util::fnv1a64(raw));
}

}  // namespace

Harness::Harness(Dataset dataset, HarnessDeps deps)
    : dataset_(std::move(dataset)), deps_(std::move(deps)) {
  if (!deps_.client) {
    throw HarnessError(HarnessError::Kind::Config, "harness needs an LLM client");
  }
  if (deps_.parallelism == 0) deps_.parallelism = 1;
  deps_.detect_template.validate();
  query_cache_.resize(dataset_.eval_set.size());
}

const EmbeddingVector& Harness::query_embedding(std::size_t case_index) {
  {
    std::lock_guard lock(query_mutex_);
    if (query_cache_[case_index]) return *query_cache_[case_index];
  }
  auto text = render_row(dataset_.eval_set[case_index], false, deps_.detect_template);
  auto vector = deps_.client->embed_text(text, deps_.embed_config).vector;
  std::lock_guard lock(query_mutex_);
  auto& slot = query_cache_[case_index];
  if (!slot) slot = std::move(vector);
  return *slot;
}

const EmbeddingIndex& Harness::index() {
  if (!index_) {
    index_ = EmbeddingIndex::build(dataset_.train_pool, deps_.client->embedder(deps_.embed_config),
                                   deps_.detect_template);
  }
  return *index_;
}

DetectorSpec Harness::spec_for(DetectorKind kind, std::size_t n) const {
  DetectorSpec spec;
  spec.kind = kind;
  spec.n_or_k = n;
  switch (kind) {
    case DetectorKind::LlmRandom:
    case DetectorKind::LlmTopK: spec.model = deps_.chat_config; break;
    case DetectorKind::LlmFineTuned: spec.model = deps_.finetuned_config; break;
    case DetectorKind::MlpRandom:
    case DetectorKind::MlpTopK: spec.model = deps_.train_config; break;
  }
  return spec;
}

std::optional<std::string> Harness::skip_reason(DetectorKind kind, std::size_t n) const {
  if (n == 0) {
    if (kind == DetectorKind::LlmTopK || kind == DetectorKind::MlpTopK) {
      return "top-k undefined at k=0";
    }
    if (kind == DetectorKind::MlpRandom) {
      return "baseline needs training examples";
    }
  }
  return std::nullopt;
}

std::vector<CaseRecord> Harness::run_detector(const DetectorSpec& spec) {
  spec.validate();
  if (dataset_.eval_set.empty()) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "evaluation set is empty");
  }
  if (spec.n_or_k > dataset_.train_pool.size()) {
    throw HarnessError(HarnessError::Kind::Config,
                       "n_or_k " + std::to_string(spec.n_or_k) + " exceeds the training pool of " +
                           std::to_string(dataset_.train_pool.size()));
  }
  if (auto reason = skip_reason(spec.kind, spec.n_or_k)) {
    throw HarnessError(HarnessError::Kind::Config, spec.cell_id() + ": " + *reason);
  }

  const auto& eval = dataset_.eval_set;
  std::vector<CaseRecord> records(eval.size());
  auto base_record = [&](std::size_t i) {
    CaseRecord record;
    record.case_index = i;
    record.source_index = eval[i].source_index;
    record.detector_id = spec.cell_id();
    record.gold = eval[i].label;
    return record;
  };

  bool is_llm = spec.kind == DetectorKind::LlmRandom || spec.kind == DetectorKind::LlmTopK ||
                spec.kind == DetectorKind::LlmFineTuned;
  if (is_llm) {
    const auto& config = std::get<ModelConfig>(spec.model);
    if (spec.kind == DetectorKind::LlmTopK) index();  // build before the workers fan out
    parallel_cases(eval.size(), deps_.parallelism, [&](std::size_t i) {
      auto record = base_record(i);
      try {
        std::vector<LabeledExample> examples;
        if (spec.kind == DetectorKind::LlmRandom) {
          // per-case reseeding: seed = global seed XOR case index
          examples = select_random(dataset_.train_pool, spec.n_or_k,
                                   deps_.seed ^ static_cast<std::uint64_t>(i));
        } else if (spec.kind == DetectorKind::LlmTopK) {
          examples = select_top_k(*index_, query_embedding(i), spec.n_or_k, spec.ordering);
        }
        auto doc = build_detection_prompt(examples, eval[i], deps_.detect_template);
        auto raw = deps_.client->chat_complete(doc, config).text;
        auto outcome = parse_detection_response(raw);
        record.raw_response = outcome.raw_response;
        record.response_digest = digest_of(record.raw_response);
        if (outcome.predicted) {
          record.predicted = outcome.predicted;
        } else {
          record.failure_class = to_string(*outcome.failure);
        }
      } catch (const ClientError& e) {
        if (e.kind == ClientError::Kind::Auth) throw;  // credentials are a config problem
        record.failure_class = "TransportError";
        record.failure_detail = e.what();
      } catch (const std::exception& e) {
        record.failure_class = "CaseError";
        record.failure_detail = e.what();
      }
      records[i] = std::move(record);
    });
    return records;
  }

  // MLP cells: one model per cell, shared by every case.
  const auto& train_config = std::get<TrainConfig>(spec.model);
  std::optional<MlpModel> model;
  std::string train_error;
  try {
    std::vector<LabeledExample> selection;
    std::uint64_t cell_seed = util::mix64(deps_.seed ^ util::fnv1a64(spec.cell_id()));
    if (spec.kind == DetectorKind::MlpRandom) {
      selection = select_random(dataset_.train_pool, spec.n_or_k, cell_seed);
    } else {
      // one training set per cell: top n against the centroid of the eval
      // queries, over the same index the LLM mode retrieves from
      index();
      EmbeddingVector centroid;
      centroid.values.assign(index_->dimension(), 0.0);
      for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto& q = query_embedding(i);
        for (std::size_t d = 0; d < centroid.values.size(); ++d) centroid.values[d] += q.values[d];
      }
      for (auto& v : centroid.values) v /= static_cast<double>(eval.size());
      selection = select_top_k(*index_, centroid, spec.n_or_k,
                               OrderingStrategy::DescendingRelevance);
    }
    model = train(selection, train_config);
  } catch (const ClientError& e) {
    if (e.kind == ClientError::Kind::Auth) throw;
    train_error = e.what();
  } catch (const std::exception& e) {
    train_error = e.what();
  }

  parallel_cases(eval.size(), deps_.parallelism, [&](std::size_t i) {
    auto record = base_record(i);
    if (!model) {
      record.failure_class = "TrainingError";
      record.failure_detail = train_error;
    } else {
      try {
        auto [label, score] = predict(*model, eval[i]);
        record.predicted = label;
        record.score = score;
      } catch (const std::exception& e) {
        record.failure_class = "PredictError";
        record.failure_detail = e.what();
      }
    }
    records[i] = std::move(record);
  });
  return records;
}

EvaluationReport Harness::run_sweep(std::span<const std::size_t> n_values,
                                    std::span<const DetectorKind> kinds) {
  if (n_values.empty() || kinds.empty()) {
    throw HarnessError(HarnessError::Kind::Config, "sweep needs detector kinds and n values");
  }
  for (auto n : n_values) {
    if (n > kTrainPoolCap || n > dataset_.train_pool.size()) {
      throw HarnessError(HarnessError::Kind::Config,
                         "n=" + std::to_string(n) + " exceeds the training pool");
    }
  }

  EvaluationReport report;
  report.seed = deps_.seed;
  report.started = deps_.clock();
  for (auto kind : kinds) {
    for (auto n : n_values) {
      auto spec = spec_for(kind, n);
      if (auto reason = skip_reason(kind, n)) {
        report.skipped.push_back({spec.cell_id(), n, *reason});
        continue;
      }
      auto records = run_detector(spec);
      report.series[spec.series_key()].push_back({n, compute_accuracy(records)});
      report.cases.insert(report.cases.end(), std::make_move_iterator(records.begin()),
                          std::make_move_iterator(records.end()));
    }
  }
  report.finished = deps_.clock();
  return report;
}

std::map<OrderingStrategy, double> Harness::run_ordering_experiment(
    std::size_t k, std::span<const OrderingStrategy> strategies, EvaluationReport* report) {
  if (k < 2) {
    throw HarnessError(HarnessError::Kind::Config, "ordering experiment requires k >= 2");
  }
  if (strategies.empty()) {
    throw HarnessError(HarnessError::Kind::Config, "ordering experiment needs strategies");
  }
  if (k > dataset_.train_pool.size()) {
    throw HarnessError(HarnessError::Kind::Config,
                       "k=" + std::to_string(k) + " exceeds the training pool");
  }
  if (dataset_.eval_set.empty()) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "evaluation set is empty");
  }

  std::string started = deps_.clock();
  index();
  const auto& eval = dataset_.eval_set;
  std::vector<std::vector<CaseRecord>> per_case(eval.size());

  parallel_cases(eval.size(), deps_.parallelism, [&](std::size_t i) {
    std::vector<LabeledExample> ranked;
    std::string retrieval_error;
    try {
      ranked = select_top_k(*index_, query_embedding(i), k, OrderingStrategy::DescendingRelevance);
    } catch (const ClientError& e) {
      if (e.kind == ClientError::Kind::Auth) throw;
      retrieval_error = e.what();
    } catch (const std::exception& e) {
      retrieval_error = e.what();
    }

    auto& out = per_case[i];
    out.reserve(strategies.size());
    for (auto strategy : strategies) {
      CaseRecord record;
      record.case_index = i;
      record.source_index = eval[i].source_index;
      record.detector_id =
          "LlmTopK/" + std::string(to_string(strategy)) + "/n=" + std::to_string(k);
      record.gold = eval[i].label;
      if (!retrieval_error.empty()) {
        record.failure_class = "TransportError";
        record.failure_detail = retrieval_error;
        out.push_back(std::move(record));
        continue;
      }
      try {
        auto doc = build_detection_prompt(reorder(ranked, strategy), eval[i],
                                          deps_.detect_template);
        auto raw = deps_.client->chat_complete(doc, deps_.chat_config).text;
        auto outcome = parse_detection_response(raw);
        record.raw_response = outcome.raw_response;
        record.response_digest = digest_of(record.raw_response);
        if (outcome.predicted) {
          record.predicted = outcome.predicted;
        } else {
          record.failure_class = to_string(*outcome.failure);
        }
      } catch (const ClientError& e) {
        if (e.kind == ClientError::Kind::Auth) throw;
        record.failure_class = "TransportError";
        record.failure_detail = e.what();
      } catch (const std::exception& e) {
        record.failure_class = "CaseError";
        record.failure_detail = e.what();
      }
      out.push_back(std::move(record));
    }
  });

  std::map<OrderingStrategy, double> accuracies;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    std::vector<CaseRecord> records;
    records.reserve(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) records.push_back(per_case[i][s]);
    double accuracy = compute_accuracy(records);
    accuracies[strategies[s]] = accuracy;
    if (report) {
      report->series["LlmTopK/" + std::string(to_string(strategies[s]))].push_back({k, accuracy});
      report->cases.insert(report->cases.end(), std::make_move_iterator(records.begin()),
                           std::make_move_iterator(records.end()));
    }
  }
  if (report) {
    report->seed = deps_.seed;
    report->started = started;
    report->finished = deps_.clock();
  }
  return accuracies;
}

std::vector<ReviewEntry> Harness::run_reasoning_pass(std::span<const LabeledExample> cases,
                                                     bool include_label) {
  if (cases.empty()) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "reasoning pass needs cases");
  }
  auto tmpl = PromptTemplate::reason_default(include_label);
  std::vector<ReviewEntry> entries(cases.size());
  parallel_cases(cases.size(), deps_.parallelism, [&](std::size_t i) {
    ReviewEntry entry;
    entry.case_index = i;
    entry.source_index = cases[i].source_index;
    entry.features = render_row(cases[i], false, tmpl);
    entry.gold = cases[i].label;
    entry.label_shown = include_label;
    auto doc = build_reasoning_prompt(cases[i], tmpl, include_label);
    entry.prompt_text = doc.text;
    try {
      entry.reasoning = deps_.client->chat_complete(doc, deps_.chat_config).text;
    } catch (const ClientError& e) {
      if (e.kind == ClientError::Kind::Auth) throw;
      entry.failed = true;
      entry.reasoning = std::string("client failure: ") + e.what();
    }
    entries[i] = std::move(entry);
  });
  return entries;
}

namespace {

nlohmann::json case_to_json(const CaseRecord& record, bool include_raw) {
  nlohmann::json j{{"case_index", record.case_index},
                   {"source_index", record.source_index},
                   {"detector", record.detector_id},
                   {"gold", std::string(to_string(record.gold))},
                   {"failure_class", record.failure_class},
                   {"failure_detail", record.failure_detail},
                   {"response_digest", record.response_digest}};
  if (record.predicted) {
    j["predicted"] = std::string(to_string(*record.predicted));
  } else {
    j["predicted"] = nullptr;
  }
  if (record.score) {
    j["score"] = *record.score;
  } else {
    j["score"] = nullptr;
  }
  if (include_raw) j["raw_response"] = record.raw_response;
  return j;
}

CaseRecord case_from_json(const nlohmann::json& j) {
  CaseRecord record;
  record.case_index = j.at("case_index").get<std::size_t>();
  record.source_index = j.at("source_index").get<std::size_t>();
  record.detector_id = j.at("detector").get<std::string>();
  auto gold = parse_label(j.at("gold").get<std::string>());
  if (!gold) throw HarnessError(HarnessError::Kind::Config, "report case has an unknown gold label");
  record.gold = *gold;
  if (!j.at("predicted").is_null()) {
    auto predicted = parse_label(j.at("predicted").get<std::string>());
    if (!predicted) {
      throw HarnessError(HarnessError::Kind::Config, "report case has an unknown prediction");
    }
    record.predicted = *predicted;
  }
  record.failure_class = j.at("failure_class").get<std::string>();
  record.failure_detail = j.at("failure_detail").get<std::string>();
  record.response_digest = j.at("response_digest").get<std::string>();
  if (!j.at("score").is_null()) record.score = j.at("score").get<double>();
  if (j.contains("raw_response")) record.raw_response = j.at("raw_response").get<std::string>();
  return record;
}

constexpr std::string_view kReportFormat = "flowdet-report v1";

}  // namespace

void write_report_json(std::ostream& out, const EvaluationReport& report) {
  nlohmann::json j;
  j["format"] = std::string(kReportFormat);
  j["seed"] = report.seed;
  j["started"] = report.started;
  j["finished"] = report.finished;
  j["series"] = nlohmann::json::object();
  for (const auto& [key, points] : report.series) {
    auto& series = j["series"][key];
    series = nlohmann::json::array();
    for (const auto& point : points) {
      series.push_back({{"n", point.n}, {"accuracy", point.accuracy}});
    }
  }
  j["skipped"] = nlohmann::json::array();
  for (const auto& cell : report.skipped) {
    j["skipped"].push_back({{"detector", cell.detector_id}, {"n", cell.n}, {"reason", cell.reason}});
  }
  j["cases"] = nlohmann::json::array();
  for (const auto& record : report.cases) j["cases"].push_back(case_to_json(record, false));
  out << j.dump(2) << '\n';
}

EvaluationReport load_report_json(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("format", "") != kReportFormat) {
    throw HarnessError(HarnessError::Kind::Config, "not a " + std::string(kReportFormat) + " file");
  }
  EvaluationReport report;
  try {
    report.seed = j.at("seed").get<std::uint64_t>();
    report.started = j.at("started").get<std::string>();
    report.finished = j.at("finished").get<std::string>();
    for (const auto& [key, points] : j.at("series").items()) {
      auto& series = report.series[key];
      for (const auto& point : points) {
        series.push_back({point.at("n").get<std::size_t>(), point.at("accuracy").get<double>()});
      }
    }
    for (const auto& cell : j.at("skipped")) {
      report.skipped.push_back({cell.at("detector").get<std::string>(),
                                cell.at("n").get<std::size_t>(),
                                cell.at("reason").get<std::string>()});
    }
    for (const auto& record : j.at("cases")) report.cases.push_back(case_from_json(record));
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(HarnessError::Kind::Config,
                       std::string("malformed report file: ") + e.what());
  }
  return report;
}

void write_accuracy_csv(std::ostream& out, const EvaluationReport& report) {
  out << "detector,n,accuracy\n";
  for (const auto& [key, points] : report.series) {
    for (const auto& point : points) {
      out << csv::escape_field(key) << ',' << point.n << ','
          << util::format_double(point.accuracy) << '\n';
    }
  }
}

void write_cases_jsonl(std::ostream& out, std::span<const CaseRecord> cases) {
  for (const auto& record : cases) out << case_to_json(record, true).dump() << '\n';
}

void write_review_file(std::ostream& out, std::span<const ReviewEntry> entries) {
  for (const auto& entry : entries) {
    out << "=== case " << entry.case_index << " (source_index " << entry.source_index << ") ===\n";
    out << "features: " << entry.features << '\n';
    out << "gold label: " << to_string(entry.gold) << '\n';
    out << "label shown to model: " << (entry.label_shown ? "yes" : "no") << '\n';
    out << (entry.failed ? "error:\n" : "model reasoning:\n");
    out << entry.reasoning << "\n\n";
  }
}

}  // namespace flowdet
