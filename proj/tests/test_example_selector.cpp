#include "flowdet/example_selector.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "flowdet/errors.hpp"
#include "flowdet/util.hpp"

using namespace flowdet;

namespace {

LabeledExample numbered_example(std::size_t i, TrafficLabel label = TrafficLabel::Benign) {
  LabeledExample ex;
  ex.source_index = i;
  ex.label = label;
  ex.pairs = {{{"Bwd Packet Length Std", std::to_string(i)},
               {"Average Packet Size", std::to_string(i * 2)},
               {"Flow Duration", std::to_string(100 + i)},
               {"Flow IAT Std", std::to_string(i) + ".5"}}};
  for (std::size_t f = 0; f < 4; ++f) {
    ex.numeric_view[f] = parse_numeric_value(ex.pairs[f].value);
  }
  return ex;
}

std::vector<LabeledExample> numbered_pool(std::size_t count) {
  std::vector<LabeledExample> pool;
  for (std::size_t i = 0; i < count; ++i) {
    pool.push_back(numbered_example(i, i % 2 ? TrafficLabel::DDOS : TrafficLabel::Benign));
  }
  return pool;
}

EmbeddingVector vec(std::initializer_list<double> values) {
  return EmbeddingVector{std::vector<double>(values)};
}

// Brute-force reference: cosine against every entry, stable ranking by
// (similarity desc, source_index asc), first k.
std::vector<std::size_t> brute_force_top_k(const EmbeddingIndex& index,
                                           const EmbeddingVector& query, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (const auto& entry : index.entries()) {
    scored.emplace_back(cosine_similarity(query, entry.vector), entry.source_index);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

}  // namespace

TEST_CASE("cosine similarity on known vectors") {
  CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({-1, 0})) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(vec({1, 1}), vec({1, 0})) == doctest::Approx(std::sqrt(0.5)));
  CHECK(cosine_similarity(vec({3, 4}), vec({6, 8})) == doctest::Approx(1.0));
}

TEST_CASE("cosine similarity rejects bad input") {
  CHECK_THROWS_AS(cosine_similarity(vec({1, 0}), vec({1, 0, 0})), SelectError);
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), SelectError);
  try {
    cosine_similarity(vec({0, 0}), vec({1, 0}));
  } catch (const SelectError& e) {
    CHECK(e.kind == SelectError::Kind::DegenerateVector);
  }
}

TEST_CASE("index build embeds rendered rows and keeps source order") {
  auto pool = numbered_pool(5);
  std::vector<std::string> seen;
  auto embedder = [&](const std::string& text) {
    seen.push_back(text);
    return vec({static_cast<double>(seen.size()), 1.0});
  };
  auto index = EmbeddingIndex::build(pool, embedder);
  CHECK(index.size() == 5);
  CHECK(index.dimension() == 2);
  REQUIRE(seen.size() == 5);
  CHECK(seen[0] == render_row(pool[0], false, PromptTemplate::detect_default()));
  CHECK(seen[0].find("Label") == std::string::npos);  // unlabeled renderings only
  for (std::size_t i = 1; i < index.entries().size(); ++i) {
    CHECK(index.entries()[i - 1].source_index < index.entries()[i].source_index);
  }
}

TEST_CASE("index build wraps embedder failures") {
  auto pool = numbered_pool(2);
  auto embedder = [](const std::string&) -> EmbeddingVector {
    throw std::runtime_error("backend down");
  };
  try {
    EmbeddingIndex::build(pool, embedder);
    FAIL("expected SelectError");
  } catch (const SelectError& e) {
    CHECK(e.kind == SelectError::Kind::EmbedderFailure);
    CHECK(std::string(e.what()).find("backend down") != std::string::npos);
  }
}

TEST_CASE("index build rejects inconsistent dimensions and non-finite values") {
  auto pool = numbered_pool(3);
  std::size_t calls = 0;
  auto ragged = [&](const std::string&) {
    ++calls;
    return calls == 2 ? vec({1.0}) : vec({1.0, 2.0});
  };
  CHECK_THROWS_AS(EmbeddingIndex::build(pool, ragged), SelectError);

  auto nan_embedder = [](const std::string&) { return vec({1.0, std::nan("")}); };
  CHECK_THROWS_AS(EmbeddingIndex::build(pool, nan_embedder), SelectError);
}

TEST_CASE("select_top_k equals the brute-force oracle on random pools") {
  std::mt19937_64 rng(1337);
  for (int round = 0; round < 50; ++round) {
    std::size_t pool_size = 1 + util::uniform_below(rng, 70);
    auto pool = numbered_pool(pool_size);
    std::map<std::size_t, EmbeddingVector> by_source;
    auto embedder = [&, i = std::size_t{0}](const std::string&) mutable {
      EmbeddingVector v;
      for (int d = 0; d < 16; ++d) v.values.push_back(util::uniform_in(rng, -1.0, 1.0));
      by_source[i++] = v;
      return v;
    };
    auto index = EmbeddingIndex::build(pool, embedder);
    EmbeddingVector query;
    for (int d = 0; d < 16; ++d) query.values.push_back(util::uniform_in(rng, -1.0, 1.0));

    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{20}}) {
      if (k > pool_size) continue;
      auto got = select_top_k(index, query, k, OrderingStrategy::DescendingRelevance);
      auto expected = brute_force_top_k(index, query, k);
      REQUIRE(got.size() == k);
      for (std::size_t i = 0; i < k; ++i) CHECK(got[i].source_index == expected[i]);
    }
  }
}

TEST_CASE("select_top_k breaks similarity ties by source index") {
  auto pool = numbered_pool(6);
  // Power-of-two scalings of one vector: the cosine computation yields the
  // bit-identical result for every entry, forcing a full tie.
  auto embedder = [i = 0](const std::string&) mutable {
    double scale = std::ldexp(1.0, i++);
    return EmbeddingVector{{scale, 2 * scale}};
  };
  auto index = EmbeddingIndex::build(pool, embedder);
  auto got = select_top_k(index, vec({1, 2}), 4, OrderingStrategy::DescendingRelevance);
  REQUIRE(got.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(got[i].source_index == i);
}

TEST_CASE("select_top_k validates k") {
  auto pool = numbered_pool(3);
  auto embedder = [i = 0.0](const std::string&) mutable { return EmbeddingVector{{++i, 1.0}}; };
  auto index = EmbeddingIndex::build(pool, embedder);
  CHECK_THROWS_AS(select_top_k(index, vec({1, 1}), 0, OrderingStrategy::DescendingRelevance),
                  SelectError);
  CHECK_THROWS_AS(select_top_k(index, vec({1, 1}), 4, OrderingStrategy::DescendingRelevance),
                  SelectError);
  CHECK_THROWS_AS(select_top_k(index, vec({1, 1, 1}), 2, OrderingStrategy::DescendingRelevance),
                  SelectError);
}

TEST_CASE("select_random draws without replacement in draw order") {
  auto pool = numbered_pool(20);
  auto a = select_random(pool, 8, 99);
  auto b = select_random(pool, 8, 99);
  auto c = select_random(pool, 8, 100);
  REQUIRE(a.size() == 8);
  CHECK(a == b);
  bool differs = false;
  for (std::size_t i = 0; i < 8; ++i) differs = differs || !(a[i] == c[i]);
  CHECK(differs);

  std::set<std::size_t> sources;
  for (const auto& e : a) sources.insert(e.source_index);
  CHECK(sources.size() == 8);  // no repeats
}

TEST_CASE("select_random covers the whole pool at n == size") {
  auto pool = numbered_pool(10);
  auto all = select_random(pool, 10, 3);
  std::set<std::size_t> sources;
  for (const auto& e : all) sources.insert(e.source_index);
  CHECK(sources.size() == 10);
  // draw order is a permutation, not the identity, for this seed
  bool identity = true;
  for (std::size_t i = 0; i < all.size(); ++i) identity = identity && all[i].source_index == i;
  CHECK_FALSE(identity);
}

TEST_CASE("select_random rejects oversized requests and allows n == 0") {
  auto pool = numbered_pool(4);
  CHECK_THROWS_AS(select_random(pool, 5, 1), SelectError);
  CHECK(select_random(pool, 0, 1).empty());
}

TEST_CASE("reorder permutations keep the element multiset") {
  std::mt19937_64 rng(7);
  for (std::size_t n = 1; n <= 12; ++n) {
    auto ranked = numbered_pool(n);
    for (auto strategy : {OrderingStrategy::DescendingRelevance, OrderingStrategy::MostRelevantMiddle,
                          OrderingStrategy::MostRelevantEnds, OrderingStrategy::AsGiven}) {
      auto arranged = reorder(ranked, strategy);
      REQUIRE(arranged.size() == n);
      std::set<std::size_t> sources;
      for (const auto& e : arranged) sources.insert(e.source_index);
      CHECK(sources.size() == n);
    }
  }
}

TEST_CASE("reorder strategy shapes") {
  auto ranked = numbered_pool(4);  // ranks 1..4 = sources 0..3
  auto sources = [](const std::vector<LabeledExample>& v) {
    std::vector<std::size_t> out;
    for (const auto& e : v) out.push_back(e.source_index);
    return out;
  };

  CHECK(sources(reorder(ranked, OrderingStrategy::DescendingRelevance)) ==
        std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(sources(reorder(ranked, OrderingStrategy::AsGiven)) ==
        std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(sources(reorder(ranked, OrderingStrategy::MostRelevantEnds)) ==
        std::vector<std::size_t>{0, 2, 3, 1});
  // reversed ranking pushed through the same interleave: best lands mid-list
  CHECK(sources(reorder(ranked, OrderingStrategy::MostRelevantMiddle)) ==
        std::vector<std::size_t>{3, 1, 0, 2});

  auto five = numbered_pool(5);
  CHECK(sources(reorder(five, OrderingStrategy::MostRelevantEnds)) ==
        std::vector<std::size_t>{0, 2, 4, 3, 1});
  CHECK(sources(reorder(five, OrderingStrategy::MostRelevantMiddle)) ==
        std::vector<std::size_t>{4, 2, 0, 1, 3});

  auto three = numbered_pool(3);
  CHECK(sources(reorder(three, OrderingStrategy::MostRelevantMiddle)) ==
        std::vector<std::size_t>{2, 0, 1});

  auto one = numbered_pool(1);
  for (auto strategy : {OrderingStrategy::MostRelevantMiddle, OrderingStrategy::MostRelevantEnds}) {
    CHECK(sources(reorder(one, strategy)) == std::vector<std::size_t>{0});
  }
}

TEST_CASE("best items sit at the ends and in the middle as advertised") {
  for (std::size_t n = 2; n <= 11; ++n) {
    auto ranked = numbered_pool(n);
    auto ends = reorder(ranked, OrderingStrategy::MostRelevantEnds);
    // rank 1 (source 0) first, rank 2 (source 1) last
    CHECK(ends.front().source_index == 0);
    CHECK(ends.back().source_index == 1);

    auto middle = reorder(ranked, OrderingStrategy::MostRelevantMiddle);
    // rank 1 sits within the middle third (offset at most 1 from center)
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (middle[i].source_index == 0) pos = i;
    }
    auto center = (n - 1) / 2;
    CHECK(pos + 1 >= center);      // pos >= center - 1 without underflow
    CHECK(pos <= center + 1);
  }
}

TEST_CASE("index save/load round-trips entries and vectors") {
  auto pool = numbered_pool(7);
  std::mt19937_64 rng(5);
  auto embedder = [&](const std::string&) {
    EmbeddingVector v;
    for (int d = 0; d < 8; ++d) v.values.push_back(util::uniform_in(rng, -2.0, 2.0));
    return v;
  };
  auto index = EmbeddingIndex::build(pool, embedder);

  std::ostringstream out;
  index.save(out);
  std::istringstream in(out.str());
  auto loaded = EmbeddingIndex::load(in);

  REQUIRE(loaded.size() == index.size());
  CHECK(loaded.dimension() == index.dimension());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& a = index.entries()[i];
    const auto& b = loaded.entries()[i];
    CHECK(a.source_index == b.source_index);
    CHECK(a.vector == b.vector);  // exact doubles via round-trip formatting
    CHECK(a.example == b.example);
  }

  std::ostringstream again;
  loaded.save(again);
  CHECK(again.str() == out.str());
}

TEST_CASE("index load rejects malformed files") {
  std::istringstream wrong_magic("flowdet-index v9\ndimension\t2\ncount\t0\n");
  CHECK_THROWS_AS(EmbeddingIndex::load(wrong_magic), SelectError);

  std::istringstream truncated("flowdet-index v1\ndimension\t2\ncount\t3\n");
  CHECK_THROWS_AS(EmbeddingIndex::load(truncated), SelectError);

  std::istringstream empty("");
  CHECK_THROWS_AS(EmbeddingIndex::load(empty), SelectError);
}

TEST_CASE("ordering names parse forgivingly") {
  CHECK(parse_ordering("DescendingRelevance") == OrderingStrategy::DescendingRelevance);
  CHECK(parse_ordering("descending-relevance") == OrderingStrategy::DescendingRelevance);
  CHECK(parse_ordering("most_relevant_ends") == OrderingStrategy::MostRelevantEnds);
  CHECK(parse_ordering("MOST RELEVANT MIDDLE") == OrderingStrategy::MostRelevantMiddle);
  CHECK(parse_ordering("asgiven") == OrderingStrategy::AsGiven);
  CHECK_FALSE(parse_ordering("sideways").has_value());
  for (auto strategy : {OrderingStrategy::DescendingRelevance, OrderingStrategy::MostRelevantMiddle,
                        OrderingStrategy::MostRelevantEnds, OrderingStrategy::AsGiven}) {
    CHECK(parse_ordering(to_string(strategy)) == strategy);
  }
}
