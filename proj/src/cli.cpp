#include "flowdet/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "flowdet/errors.hpp"
#include "flowdet/eval_harness.hpp"
#include "flowdet/example_selector.hpp"
#include "flowdet/flow_ingest.hpp"
#include "flowdet/http_backend.hpp"
#include "flowdet/llm_client.hpp"
#include "flowdet/mlp_baseline.hpp"
#include "flowdet/mock_backend.hpp"
#include "flowdet/prompt_builder.hpp"
#include "flowdet/util.hpp"

namespace flowdet {
namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string csv_path = "data/sample_flows.csv";
  std::string label_column = "Label";
  std::vector<std::string> features = {"Bwd Packet Length Std", "Average Packet Size",
                                       "Flow Duration", "Flow IAT Std"};
  std::size_t train_size = 70;
  std::size_t eval_size = 40;

  std::uint64_t seed = 7;
  std::vector<std::size_t> n_values = {0, 10, 20, 30};
  std::vector<std::string> detectors = {"LlmRandom", "LlmTopK", "MlpRandom", "MlpTopK"};
  std::size_t parallelism = 4;
  std::string output_dir = "out";

  std::string chat_endpoint = "http://localhost:8080/v1";
  std::string chat_model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_output_tokens = 256;
  long timeout_ms = 30000;
  int max_attempts = 3;
  long backoff_ms = 250;
  std::string api_key_env = "LLM_API_KEY";

  std::string embed_endpoint = "http://localhost:8080/v1";
  std::string embed_model = "text-embedding-ada-002";
  std::string finetuned_model;

  TrainConfig mlp;

  std::string template_path;
  std::string mock;
};

struct MockSpec {
  MockChatBackend::Behavior behavior = MockChatBackend::Behavior::Oracle;
  std::size_t step_threshold = 0;
};

std::optional<MockSpec> parse_mock(const std::string& raw) {
  if (raw == "oracle") return MockSpec{MockChatBackend::Behavior::Oracle, 0};
  if (raw == "adversarial") return MockSpec{MockChatBackend::Behavior::Adversarial, 0};
  if (raw == "hash") return MockSpec{MockChatBackend::Behavior::Hash, 0};
  if (raw.rfind("step:", 0) == 0) {
    try {
      std::size_t consumed = 0;
      auto m = std::stoul(raw.substr(5), &consumed);
      if (consumed == raw.size() - 5) return MockSpec{MockChatBackend::Behavior::Step, m};
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HarnessError(HarnessError::Kind::Config, "cannot open " + path.string());
  }
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw HarnessError(HarnessError::Kind::Config, "cannot write " + path.string());
  }
  return out;
}

ModelConfig chat_config(const RunConfig& cfg) {
  ModelConfig mc;
  mc.endpoint_base = cfg.chat_endpoint;
  mc.model_name = cfg.chat_model;
  mc.temperature = cfg.temperature;
  mc.max_output_tokens = cfg.max_output_tokens;
  mc.request_timeout = std::chrono::milliseconds(cfg.timeout_ms);
  mc.retry_policy = {cfg.max_attempts, std::chrono::milliseconds(cfg.backoff_ms)};
  mc.api_key_env = cfg.api_key_env;
  return mc;
}

ModelConfig embed_config(const RunConfig& cfg) {
  auto mc = chat_config(cfg);
  mc.endpoint_base = cfg.embed_endpoint;
  mc.model_name = cfg.embed_model;
  return mc;
}

ModelConfig finetuned_config(const RunConfig& cfg) {
  auto mc = chat_config(cfg);
  if (!cfg.finetuned_model.empty()) mc.model_name = cfg.finetuned_model;
  return mc;
}

std::vector<FlowRecord> load_records(const RunConfig& cfg) {
  auto in = open_input(cfg.csv_path);
  return parse_flow_csv(in, cfg.label_column);
}

PromptTemplate make_template(const RunConfig& cfg) {
  auto tmpl = PromptTemplate::detect_default();
  if (!cfg.template_path.empty()) {
    auto in = open_input(cfg.template_path);
    tmpl.layout = load_layout(in);
    tmpl.name = fs::path(cfg.template_path).stem().string();
    tmpl.validate();
  }
  return tmpl;
}

Dataset make_dataset(const RunConfig& cfg, std::span<const FlowRecord> records) {
  auto selection = FeatureSelection::from_names(cfg.features);
  return build_dataset(records, selection, cfg.train_size, cfg.eval_size, cfg.seed);
}

std::shared_ptr<LlmClient> make_client(const RunConfig& cfg, const Dataset& dataset,
                                       const PromptTemplate& tmpl) {
  if (cfg.mock.empty()) {
    return std::make_shared<LlmClient>(std::make_shared<HttpChatBackend>(),
                                       std::make_shared<HttpEmbedBackend>());
  }
  auto spec = parse_mock(cfg.mock);
  if (!spec) {
    throw HarnessError(HarnessError::Kind::Config, "unknown mock \"" + cfg.mock + "\"");
  }
  std::vector<LabeledExample> known;
  known.reserve(dataset.train_pool.size() + dataset.eval_set.size());
  known.insert(known.end(), dataset.train_pool.begin(), dataset.train_pool.end());
  known.insert(known.end(), dataset.eval_set.begin(), dataset.eval_set.end());
  auto chat = std::make_shared<MockChatBackend>(spec->behavior, known, tmpl, spec->step_threshold);
  auto embed = std::make_shared<HashEmbedder>();
  return std::make_shared<LlmClient>(std::move(chat), std::move(embed));
}

HarnessDeps make_deps(const RunConfig& cfg, const Dataset& dataset, const PromptTemplate& tmpl) {
  HarnessDeps deps;
  deps.client = make_client(cfg, dataset, tmpl);
  deps.chat_config = chat_config(cfg);
  deps.embed_config = embed_config(cfg);
  deps.finetuned_config = finetuned_config(cfg);
  deps.train_config = cfg.mlp;
  deps.detect_template = tmpl;
  deps.seed = cfg.seed;
  deps.parallelism = cfg.parallelism;
  if (cfg.mock.empty()) {
    deps.clock = utc_timestamp;
  } else {
    deps.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
  }
  return deps;
}

std::vector<DetectorKind> parse_detectors(const std::vector<std::string>& names) {
  std::vector<DetectorKind> kinds;
  for (const auto& name : names) {
    auto kind = parse_detector_kind(name);
    if (!kind) {
      throw HarnessError(HarnessError::Kind::Config, "unknown detector \"" + name + "\"");
    }
    kinds.push_back(*kind);
  }
  return kinds;
}

OrderingStrategy parse_ordering_or_throw(const std::string& name) {
  auto strategy = parse_ordering(name);
  if (!strategy) {
    throw HarnessError(HarnessError::Kind::Config, "unknown ordering \"" + name + "\"");
  }
  return *strategy;
}

std::string format_accuracy(double accuracy) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << accuracy;
  return out.str();
}

void print_report(std::ostream& out, const EvaluationReport& report) {
  std::size_t width = 12;
  for (const auto& [key, points] : report.series) width = std::max(width, key.size());
  out << std::left << std::setw(static_cast<int>(width + 2)) << "detector" << std::right
      << std::setw(4) << "n" << "  accuracy\n";
  for (const auto& [key, points] : report.series) {
    for (const auto& point : points) {
      out << std::left << std::setw(static_cast<int>(width + 2)) << key << std::right
          << std::setw(4) << point.n << "  " << format_accuracy(point.accuracy) << '\n';
    }
  }
  if (!report.skipped.empty()) {
    out << "skipped cells:\n";
    for (const auto& cell : report.skipped) {
      out << "  " << cell.detector_id << ": " << cell.reason << '\n';
    }
  }
}

/// Chooses the few-shot examples for the one-off subcommands (preview,
/// detect). The sweep path lives in Harness.
std::vector<LabeledExample> pick_examples(const RunConfig& cfg, const Dataset& dataset,
                                          const PromptTemplate& tmpl,
                                          const std::shared_ptr<LlmClient>& client,
                                          std::size_t case_index, std::size_t n,
                                          const std::string& selection,
                                          const std::string& ordering) {
  if (n == 0) return {};
  if (n > dataset.train_pool.size()) {
    throw HarnessError(HarnessError::Kind::Config, "n exceeds the training pool");
  }
  if (selection == "random") {
    return select_random(dataset.train_pool, n, cfg.seed ^ case_index);
  }
  auto config = embed_config(cfg);
  auto index = EmbeddingIndex::build(dataset.train_pool, client->embedder(config), tmpl);
  auto query =
      client->embed_text(render_row(dataset.eval_set[case_index], false, tmpl), config).vector;
  return select_top_k(index, query, n, parse_ordering_or_throw(ordering));
}

const LabeledExample& eval_case(const Dataset& dataset, std::size_t case_index) {
  if (case_index >= dataset.eval_set.size()) {
    throw HarnessError(HarnessError::Kind::Config,
                       "case " + std::to_string(case_index) + " outside the eval set of " +
                           std::to_string(dataset.eval_set.size()));
  }
  return dataset.eval_set[case_index];
}

int cmd_ingest(const RunConfig& cfg) {
  auto records = load_records(cfg);
  std::size_t benign = 0;
  for (const auto& record : records) {
    if (record.label() == TrafficLabel::Benign) ++benign;
  }
  auto dataset = make_dataset(cfg, records);
  auto pool_path = fs::path(cfg.output_dir) / "ingest" / "pool.csv";
  auto eval_path = fs::path(cfg.output_dir) / "ingest" / "eval.csv";
  {
    auto out = open_output(pool_path);
    write_example_csv(out, dataset.train_pool);
  }
  {
    auto out = open_output(eval_path);
    write_example_csv(out, dataset.eval_set);
  }
  std::cout << "parsed " << records.size() << " records: " << benign << " Benign / "
            << records.size() - benign << " DDOS\n"
            << "train pool " << dataset.train_pool.size() << " -> " << pool_path.string() << '\n'
            << "eval set " << dataset.eval_set.size() << " -> " << eval_path.string() << '\n';
  return 0;
}

int cmd_index_build(const RunConfig& cfg) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  auto client = make_client(cfg, dataset, tmpl);
  auto index = EmbeddingIndex::build(dataset.train_pool, client->embedder(embed_config(cfg)), tmpl);
  auto path = fs::path(cfg.output_dir) / "index" / "pool.index";
  auto out = open_output(path);
  index.save(out);
  std::cout << "indexed " << index.size() << " examples, dimension " << index.dimension()
            << " -> " << path.string() << '\n';
  return 0;
}

struct CaseOpts {
  std::size_t case_index = 0;
  std::size_t n = 10;
  std::string selection = "random";
  std::string ordering = "DescendingRelevance";
  bool save = false;
};

int cmd_prompt_preview(const RunConfig& cfg, const CaseOpts& opts) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  auto client = make_client(cfg, dataset, tmpl);
  const auto& test_case = eval_case(dataset, opts.case_index);
  auto examples = pick_examples(cfg, dataset, tmpl, client, opts.case_index, opts.n,
                                opts.selection, opts.ordering);
  auto doc = build_detection_prompt(examples, test_case, tmpl);
  std::cout << doc.text << '\n';
  if (opts.save) {
    auto path = fs::path(cfg.output_dir) / "prompts" /
                ("preview_case" + std::to_string(opts.case_index) + "_n" +
                 std::to_string(opts.n) + ".txt");
    auto out = open_output(path);
    out << doc.text;
    std::cout << "saved -> " << path.string() << '\n';
  }
  return 0;
}

int cmd_detect(const RunConfig& cfg, const CaseOpts& opts) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  auto client = make_client(cfg, dataset, tmpl);
  const auto& test_case = eval_case(dataset, opts.case_index);
  auto examples = pick_examples(cfg, dataset, tmpl, client, opts.case_index, opts.n,
                                opts.selection, opts.ordering);
  auto doc = build_detection_prompt(examples, test_case, tmpl);
  auto result = client->chat_complete(doc, chat_config(cfg));
  auto outcome = parse_detection_response(result.text);

  std::cout << "case " << opts.case_index << " (source_index " << test_case.source_index
            << "), " << doc.example_count << "-shot\n";
  std::cout << "gold:      " << to_string(test_case.label) << '\n';
  if (outcome.predicted) {
    std::cout << "predicted: " << to_string(*outcome.predicted) << '\n';
    std::cout << "result:    "
              << (*outcome.predicted == test_case.label ? "correct" : "incorrect") << '\n';
  } else {
    std::cout << "predicted: none [" << to_string(*outcome.failure) << "]\n";
  }
  if (outcome.reasoning) std::cout << "reasoning: " << *outcome.reasoning << '\n';
  std::cout << "raw:       " << outcome.raw_response << '\n';
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  Harness harness(dataset, make_deps(cfg, dataset, tmpl));
  auto kinds = parse_detectors(cfg.detectors);
  auto report = harness.run_sweep(cfg.n_values, kinds);

  auto report_dir = fs::path(cfg.output_dir) / "reports";
  auto report_path = report_dir / "report.json";
  auto csv_path = report_dir / "accuracy.csv";
  auto cases_path = report_dir / "cases.jsonl";
  {
    auto out = open_output(report_path);
    write_report_json(out, report);
  }
  {
    auto out = open_output(csv_path);
    write_accuracy_csv(out, report);
  }
  {
    auto out = open_output(cases_path);
    write_cases_jsonl(out, report.cases);
  }
  print_report(std::cout, report);
  std::cout << "report -> " << report_path.string() << '\n'
            << "table  -> " << csv_path.string() << '\n'
            << "cases  -> " << cases_path.string() << '\n';
  return 0;
}

int cmd_ordering(const RunConfig& cfg, std::size_t k, const std::vector<std::string>& strategy_names) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  Harness harness(dataset, make_deps(cfg, dataset, tmpl));
  std::vector<OrderingStrategy> strategies;
  for (const auto& name : strategy_names) strategies.push_back(parse_ordering_or_throw(name));

  EvaluationReport report;
  auto accuracies = harness.run_ordering_experiment(k, strategies, &report);

  auto report_dir = fs::path(cfg.output_dir) / "reports";
  {
    auto out = open_output(report_dir / "ordering.json");
    write_report_json(out, report);
  }
  {
    auto out = open_output(report_dir / "ordering.csv");
    write_accuracy_csv(out, report);
  }
  {
    auto out = open_output(report_dir / "ordering_cases.jsonl");
    write_cases_jsonl(out, report.cases);
  }
  std::cout << "ordering experiment at k=" << k << ":\n";
  for (const auto& [strategy, accuracy] : accuracies) {
    std::cout << "  " << std::left << std::setw(20) << to_string(strategy)
              << format_accuracy(accuracy) << '\n';
  }
  std::cout << "report -> " << (report_dir / "ordering.json").string() << '\n';
  return 0;
}

int cmd_finetune_export(const RunConfig& cfg, std::string out_path) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  if (out_path.empty()) {
    out_path = (fs::path(cfg.output_dir) / "finetune" / "train.jsonl").string();
  }
  auto out = open_output(out_path);
  auto count = export_finetune_dataset(dataset.train_pool, tmpl, out);
  std::cout << "wrote " << count << " prompt/completion records -> " << out_path << '\n';
  return 0;
}

int cmd_baseline_train(const RunConfig& cfg, std::string out_path) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto model = train(dataset.train_pool, cfg.mlp);
  if (out_path.empty()) {
    out_path = (fs::path(cfg.output_dir) / "models" / "mlp.model").string();
  }
  {
    auto out = open_output(out_path);
    save_model(model, out);
  }
  std::size_t correct = 0;
  for (const auto& example : dataset.train_pool) {
    if (predict(model, example).first == example.label) ++correct;
  }
  std::cout << "trained on " << dataset.train_pool.size() << " examples, final loss "
            << util::format_double(model.final_loss) << ", train accuracy "
            << format_accuracy(static_cast<double>(correct) /
                               static_cast<double>(dataset.train_pool.size()))
            << '\n'
            << "model -> " << out_path << '\n';
  return 0;
}

int cmd_baseline_predict(const RunConfig& cfg, std::string model_path) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  if (model_path.empty()) {
    model_path = (fs::path(cfg.output_dir) / "models" / "mlp.model").string();
  }
  auto in = open_input(model_path);
  auto model = load_model(in);

  std::vector<std::pair<std::optional<TrafficLabel>, TrafficLabel>> outcomes;
  std::size_t failures = 0;
  for (const auto& example : dataset.eval_set) {
    std::optional<TrafficLabel> predicted;
    try {
      predicted = predict(model, example).first;
    } catch (const MlpError&) {
      ++failures;
    }
    outcomes.emplace_back(predicted, example.label);
  }
  std::cout << "eval accuracy " << format_accuracy(compute_accuracy(outcomes)) << " over "
            << outcomes.size() << " cases";
  if (failures > 0) std::cout << " (" << failures << " non-numeric cases counted incorrect)";
  std::cout << '\n';
  return 0;
}

int cmd_reason(const RunConfig& cfg, std::size_t case_count, bool with_label) {
  auto records = load_records(cfg);
  auto dataset = make_dataset(cfg, records);
  auto tmpl = make_template(cfg);
  Harness harness(dataset, make_deps(cfg, dataset, tmpl));
  case_count = std::min(case_count, dataset.eval_set.size());
  if (case_count == 0) {
    throw HarnessError(HarnessError::Kind::EmptyCases, "no eval cases to reason about");
  }
  auto entries = harness.run_reasoning_pass(
      std::span<const LabeledExample>(dataset.eval_set.data(), case_count), with_label);
  auto path = fs::path(cfg.output_dir) / "review" /
              (with_label ? "reasoning_with_label.txt" : "reasoning_without_label.txt");
  auto out = open_output(path);
  write_review_file(out, entries);
  std::cout << "wrote " << entries.size() << " review entries -> " << path.string() << '\n';
  return 0;
}

int cmd_report(const RunConfig& cfg, std::string file) {
  if (file.empty()) {
    file = (fs::path(cfg.output_dir) / "reports" / "report.json").string();
  }
  auto in = open_input(file);
  auto report = load_report_json(in);
  std::cout << "seed " << report.seed << ", started " << report.started << ", finished "
            << report.finished << '\n';
  print_report(std::cout, report);
  return 0;
}

}  // namespace

int dispatch(std::vector<std::string> args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

namespace {

/// CLI11 resolves config sections against subcommands; our sections mirror
/// the dotted option names on the root app instead, so fold the section path
/// back into the key.
class SectionedToml : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() || item.name == "++" || item.name == "--") continue;
      std::string flat;
      for (const auto& parent : item.parents) flat += parent + ".";
      item.name = flat + item.name;
      item.parents.clear();
    }
    return items;
  }
};

}  // namespace

int dispatch(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{
      "flowdet: few-shot LLM DDoS flow detection harness.\n"
      "Outputs land under <output-dir>/{ingest,index,prompts,reports,review,models,finetune}."};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML run configuration")->configurable(false);
  app.config_formatter(std::make_shared<SectionedToml>());

  app.add_option("--data.csv", cfg.csv_path, "Labeled flow CSV")->capture_default_str();
  app.add_option("--data.label-column", cfg.label_column, "Label column name")
      ->capture_default_str();
  app.add_option("--data.features", cfg.features, "The four feature columns to project");
  app.add_option("--data.train-size", cfg.train_size, "Training pool size (cap 70)")
      ->capture_default_str();
  app.add_option("--data.eval-size", cfg.eval_size, "Evaluation set size")->capture_default_str();

  app.add_option("--run.seed", cfg.seed, "Global seed")->capture_default_str();
  app.add_option("--run.n-values", cfg.n_values, "Sweep shot counts");
  app.add_option("--run.detectors", cfg.detectors,
                 "Detector kinds: LlmRandom, LlmTopK, LlmFineTuned, MlpRandom, MlpTopK");
  app.add_option("--run.parallelism", cfg.parallelism, "In-flight request limit")
      ->capture_default_str();
  app.add_option("--run.output-dir", cfg.output_dir, "Output directory")->capture_default_str();

  app.add_option("--chat.endpoint", cfg.chat_endpoint, "Chat completions base URL")
      ->capture_default_str();
  app.add_option("--chat.model", cfg.chat_model, "Chat model name")->capture_default_str();
  app.add_option("--chat.temperature", cfg.temperature, "Sampling temperature")
      ->capture_default_str();
  app.add_option("--chat.max-output-tokens", cfg.max_output_tokens, "Completion token cap")
      ->capture_default_str();
  app.add_option("--chat.timeout-ms", cfg.timeout_ms, "Request timeout")->capture_default_str();
  app.add_option("--chat.max-attempts", cfg.max_attempts, "Retry attempts")
      ->capture_default_str();
  app.add_option("--chat.backoff-ms", cfg.backoff_ms, "Base retry backoff")
      ->capture_default_str();
  app.add_option("--chat.api-key-env", cfg.api_key_env,
                 "Environment variable holding the bearer token")
      ->capture_default_str();

  app.add_option("--embed.endpoint", cfg.embed_endpoint, "Embeddings base URL")
      ->capture_default_str();
  app.add_option("--embed.model", cfg.embed_model, "Embedding model name")
      ->capture_default_str();
  app.add_option("--finetuned.model", cfg.finetuned_model,
                 "Fine-tuned model identifier for LlmFineTuned");

  app.add_option("--mlp.learning-rate", cfg.mlp.learning_rate, "Baseline learning rate")
      ->capture_default_str();
  app.add_option("--mlp.epochs", cfg.mlp.epochs, "Baseline epochs")->capture_default_str();
  app.add_option("--mlp.seed", cfg.mlp.seed, "Baseline init seed")->capture_default_str();

  app.add_option("--prompt.template", cfg.template_path,
                 "Layout file with {preamble},{examples},{separator},{test},{instruction}");

  auto* mock_opt =
      app.add_option("--mock", cfg.mock,
                     "Deterministic offline backend: oracle, adversarial, step:<m> or hash")
          ->check(CLI::Validator(
              [](std::string& input) -> std::string {
                return parse_mock(input) ? std::string{}
                                         : "expected oracle, adversarial, step:<m> or hash";
              },
              "MOCK"));
  auto* live_flag =
      app.add_flag("--live", "Force live HTTP backends even when the config names a mock");
  mock_opt->excludes(live_flag);

  auto* ingest = app.add_subcommand("ingest", "Parse the flow CSV and materialize the split");
  ingest->fallthrough();

  auto* index = app.add_subcommand("index", "Embedding index operations");
  index->fallthrough();
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Embed the training pool and save the index");
  index_build->fallthrough();

  CaseOpts preview_opts;
  auto* prompt = app.add_subcommand("prompt", "Prompt rendering");
  prompt->fallthrough();
  prompt->require_subcommand(1);
  auto* prompt_preview = prompt->add_subcommand("preview", "Render one detection prompt");
  prompt_preview->fallthrough();
  prompt_preview->add_option("--case", preview_opts.case_index, "Eval case index")
      ->capture_default_str();
  prompt_preview->add_option("--n", preview_opts.n, "Example count")->capture_default_str();
  prompt_preview->add_option("--selection", preview_opts.selection, "random or topk")
      ->check(CLI::IsMember({"random", "topk"}))
      ->capture_default_str();
  prompt_preview->add_option("--ordering", preview_opts.ordering, "Ordering strategy for topk")
      ->capture_default_str();
  prompt_preview->add_flag("--save", preview_opts.save, "Also write the prompt under prompts/");

  CaseOpts detect_opts;
  auto* detect = app.add_subcommand("detect", "Classify one eval case through the model");
  detect->fallthrough();
  detect->add_option("--case", detect_opts.case_index, "Eval case index")->capture_default_str();
  detect->add_option("--n", detect_opts.n, "Example count")->capture_default_str();
  detect->add_option("--selection", detect_opts.selection, "random or topk")
      ->check(CLI::IsMember({"random", "topk"}))
      ->capture_default_str();
  detect->add_option("--ordering", detect_opts.ordering, "Ordering strategy for topk")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Run the accuracy-vs-n sweep and write reports");
  sweep->fallthrough();

  std::size_t ordering_k = 10;
  std::vector<std::string> ordering_strategies = {"DescendingRelevance", "MostRelevantMiddle",
                                                  "MostRelevantEnds", "AsGiven"};
  auto* ordering = app.add_subcommand("ordering", "Compare example orderings at fixed k");
  ordering->fallthrough();
  ordering->add_option("--k", ordering_k, "Retrieved example count (>= 2)")
      ->capture_default_str();
  ordering->add_option("--strategies", ordering_strategies, "Strategies to compare");

  std::string finetune_out;
  auto* finetune = app.add_subcommand("finetune-export",
                                      "Write the prompt/completion fine-tune dataset");
  finetune->fallthrough();
  finetune->add_option("--out", finetune_out, "Output path (default finetune/train.jsonl)");

  auto* baseline = app.add_subcommand("baseline", "MLP baseline");
  baseline->fallthrough();
  baseline->require_subcommand(1);
  std::string baseline_out;
  auto* baseline_train = baseline->add_subcommand("train", "Train on the pool and save the model");
  baseline_train->fallthrough();
  baseline_train->add_option("--out", baseline_out, "Model path (default models/mlp.model)");
  std::string baseline_model;
  auto* baseline_predict =
      baseline->add_subcommand("predict", "Evaluate a saved model on the eval set");
  baseline_predict->fallthrough();
  baseline_predict->add_option("--model", baseline_model,
                               "Model path (default models/mlp.model)");

  std::size_t reason_cases = 5;
  bool reason_with_label = false;
  auto* reason = app.add_subcommand("reason", "Collect model explanations into a review file");
  reason->fallthrough();
  reason->add_option("--cases", reason_cases, "Number of eval cases")->capture_default_str();
  reason->add_flag("--with-label", reason_with_label, "Show the gold label and ask for a rationale");

  std::string report_file;
  auto* report_cmd = app.add_subcommand("report", "Pretty-print a saved report");
  report_cmd->fallthrough();
  report_cmd->add_option("--file", report_file, "Report path (default reports/report.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (live_flag->count() > 0) cfg.mock.clear();

  try {
    if (*ingest) return cmd_ingest(cfg);
    if (*index_build) return cmd_index_build(cfg);
    if (*prompt_preview) return cmd_prompt_preview(cfg, preview_opts);
    if (*detect) return cmd_detect(cfg, detect_opts);
    if (*sweep) return cmd_sweep(cfg);
    if (*ordering) return cmd_ordering(cfg, ordering_k, ordering_strategies);
    if (*finetune) return cmd_finetune_export(cfg, finetune_out);
    if (*baseline_train) return cmd_baseline_train(cfg, baseline_out);
    if (*baseline_predict) return cmd_baseline_predict(cfg, baseline_model);
    if (*reason) return cmd_reason(cfg, reason_cases, reason_with_label);
    if (*report_cmd) return cmd_report(cfg, report_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace flowdet
