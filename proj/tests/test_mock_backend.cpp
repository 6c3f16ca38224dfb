#include "flowdet/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

using namespace flowdet;

namespace {

LabeledExample mock_example(std::size_t i, TrafficLabel label) {
  LabeledExample ex;
  ex.source_index = i;
  ex.label = label;
  ex.pairs = {{{"Bwd Packet Length Std", std::to_string(i) + ".5"},
               {"Average Packet Size", std::to_string(200 + i)},
               {"Flow Duration", std::to_string(5000 + i)},
               {"Flow IAT Std", std::to_string(i)}}};
  return ex;
}

struct MockFixture {
  PromptTemplate tmpl = PromptTemplate::detect_default();
  std::vector<LabeledExample> pool;
  LabeledExample benign_case = mock_example(50, TrafficLabel::Benign);
  LabeledExample ddos_case = mock_example(51, TrafficLabel::DDOS);
  ModelConfig config;

  MockFixture() {
    for (std::size_t i = 0; i < 6; ++i) {
      pool.push_back(mock_example(i, i % 2 ? TrafficLabel::DDOS : TrafficLabel::Benign));
    }
    pool.push_back(benign_case);
    pool.push_back(ddos_case);
  }

  PromptDocument prompt(const LabeledExample& test, std::size_t n) const {
    return build_detection_prompt(std::span(pool).subspan(0, n), test, tmpl);
  }
};

}  // namespace

TEST_CASE("oracle answers the gold label for known rows") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Oracle, fx.pool, fx.tmpl);
  CHECK(mock.complete(fx.prompt(fx.benign_case, 3), fx.config) == "$$$Benign$$$");
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 3), fx.config) == "$$$DDOS$$$");
  CHECK(mock.complete(fx.prompt(fx.benign_case, 0), fx.config) == "$$$Benign$$$");
}

TEST_CASE("adversarial answers the flipped label") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Adversarial, fx.pool, fx.tmpl);
  CHECK(mock.complete(fx.prompt(fx.benign_case, 2), fx.config) == "$$$DDOS$$$");
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 2), fx.config) == "$$$Benign$$$");
}

TEST_CASE("step behavior keys on the example count") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Step, fx.pool, fx.tmpl, 3);
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 0), fx.config) == "$$$Benign$$$");
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 2), fx.config) == "$$$Benign$$$");
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 3), fx.config) == "$$$DDOS$$$");  // n == m correct
  CHECK(mock.complete(fx.prompt(fx.ddos_case, 4), fx.config) == "$$$DDOS$$$");
}

TEST_CASE("unknown test rows draw a malformed response") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Oracle, fx.pool, fx.tmpl);
  auto stranger = mock_example(99, TrafficLabel::Benign);
  auto raw = mock.complete(fx.prompt(stranger, 2), fx.config);
  auto outcome = parse_detection_response(raw);
  CHECK(outcome.failure == FailureKind::FormatViolation);
}

TEST_CASE("reason mode explains toward the gold label") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Oracle, fx.pool, fx.tmpl);
  auto labeled = build_reasoning_prompt(fx.ddos_case, PromptTemplate::reason_default(true), true);
  auto raw = mock.complete(labeled, fx.config);
  CHECK(raw.find("DDOS") != std::string::npos);
  CHECK(raw.find("Conclusion") != std::string::npos);
  CHECK(raw.find("$$$") == std::string::npos);

  auto unlabeled =
      build_reasoning_prompt(fx.benign_case, PromptTemplate::reason_default(false), false);
  CHECK(mock.complete(unlabeled, fx.config).find("Benign") != std::string::npos);
}

TEST_CASE("hash behavior is deterministic and sensitive to example order") {
  MockFixture fx;
  MockChatBackend mock(MockChatBackend::Behavior::Hash, fx.pool, fx.tmpl);
  auto doc = fx.prompt(fx.benign_case, 4);
  auto first = mock.complete(doc, fx.config);
  CHECK(mock.complete(doc, fx.config) == first);
  CHECK(parse_detection_response(first).predicted.has_value());

  // some permutation of the examples must flip the answer
  std::vector<LabeledExample> examples(fx.pool.begin(), fx.pool.begin() + 4);
  std::set<std::string> answers;
  std::sort(examples.begin(), examples.end(),
            [](const auto& a, const auto& b) { return a.source_index < b.source_index; });
  do {
    auto doc2 = build_detection_prompt(examples, fx.benign_case, fx.tmpl);
    answers.insert(mock.complete(doc2, fx.config));
  } while (std::next_permutation(examples.begin(), examples.end(),
                                 [](const auto& a, const auto& b) {
                                   return a.source_index < b.source_index;
                                 }));
  CHECK(answers.size() == 2);
}

TEST_CASE("hash embedder is deterministic with the configured dimension") {
  HashEmbedder embedder(32, 99);
  auto a = embedder.embed("Flow Duration: 80 | Flow IAT Std: 2");
  auto b = embedder.embed("Flow Duration: 80 | Flow IAT Std: 2");
  auto c = embedder.embed("Flow Duration: 81 | Flow IAT Std: 2");
  CHECK(a.dimension() == 32);
  CHECK(a == b);
  CHECK(a != c);
  for (double v : a.values) CHECK(std::isfinite(v));
}

TEST_CASE("hash embedder rejects empty text") {
  HashEmbedder embedder;
  CHECK_THROWS_AS(embedder.embed(""), std::invalid_argument);
  CHECK_THROWS_AS(embedder.embed("  \t "), std::invalid_argument);
  CHECK_THROWS_AS(HashEmbedder(0), std::invalid_argument);
}

TEST_CASE("shared tokens pull embeddings together") {
  HashEmbedder embedder;
  auto base = embedder.embed("Flow Duration: 1000 | Average Packet Size: 120");
  auto similar = embedder.embed("Flow Duration: 1000 | Average Packet Size: 121");
  auto far = embedder.embed("x: 1 | y: 2");
  CHECK(cosine_similarity(base, base) == doctest::Approx(1.0));
  CHECK(cosine_similarity(base, similar) > cosine_similarity(base, far));
}
