// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "labeldesc/rng.hpp"
#include "labeldesc/zeroshot.hpp"
#include "oracles.hpp"

using namespace labeldesc;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

struct Instance {
  LabelSpace space{{"c0", "c1", "c2"}};
  EmbeddingSet items;
  std::vector<DescriptionSet> sets;
  EmbeddingSet descriptions;
};

Instance random_instance(std::uint64_t seed, std::size_t num_items, std::size_t num_sets, std::size_t dim) {
  Rng rng(seed);
  Instance inst;
  for (std::size_t i = 0; i < num_items; ++i) inst.items.add("item" + std::to_string(i), random_vector(rng, dim));
  for (std::size_t s = 0; s < num_sets; ++s) {
    const std::string name = "set" + std::to_string(s);
    std::map<std::string, std::string> texts;
    for (const auto& c : inst.space.classes()) {
      texts[c] = name + " " + c;
      inst.descriptions.add(description_key(name, c), random_vector(rng, dim));
    }
    inst.sets.emplace_back(name, texts, inst.space);
  }
  return inst;
}

}  // namespace

TEST(Cosine, Examples) {
  const std::vector<double> x{1, 0}, y{0, 1}, d{1, 1};
  EXPECT_DOUBLE_EQ(cosine(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine(x, y), 0.0);
  // 1 / sqrt(2), evaluated independently.
  EXPECT_NEAR(cosine(d, x), 0.7071067811865475, 1e-15);
}

TEST(Cosine, Errors) {
  const std::vector<double> zero{0, 0}, x{1, 0}, three{1, 2, 3};
  EXPECT_THROW(cosine(zero, x), ZeroVector);
  EXPECT_THROW(cosine(x, zero), ZeroVector);
  EXPECT_THROW(cosine(x, three), DimensionMismatch);
}

TEST(Cosine, ClampedAndScaleInvariant) {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto u = random_vector(rng, 7), v = random_vector(rng, 7);
    const double a = rng.uniform(1e-3, 1e3), b = rng.uniform(1e-3, 1e3);
    std::vector<double> au(u), bv(v);
    for (double& x : au) x *= a;
    for (double& x : bv) x *= b;
    const double c = cosine(u, v);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(cosine(au, bv), c, 1e-12);
  }
  // Parallel vectors must not overshoot 1 after rounding.
  const std::vector<double> p{0.1, 0.2, 0.3}, q{0.3, 0.6, 0.9};
  EXPECT_LE(cosine(p, q), 1.0);
}

TEST(SoftmaxPredict, Symmetric) {
  const std::vector<double> two{0.3, 0.3}, three{0.7, 0.7, 0.7};
  const auto r = softmax_predict(two, 1.0);
  EXPECT_DOUBLE_EQ(r.probs[0], 0.5);
  EXPECT_DOUBLE_EQ(r.probs[1], 0.5);
  EXPECT_EQ(r.predicted, 0);
  for (double tau : {0.01, 1.0, 50.0})
    for (double p : softmax_predict(three, tau).probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxPredict, FormulaValue) {
  // exp(0.2) / (exp(0.2) + exp(0.1)), evaluated independently.
  const std::vector<double> s{0.2, 0.1};
  const auto r = softmax_predict(s, 1.0);
  EXPECT_NEAR(r.probs[0], 0.52497918747894, 1e-14);
  EXPECT_NEAR(r.probs[1], 0.4750208125210601, 1e-14);
  EXPECT_EQ(r.predicted, 0);
  EXPECT_EQ(r.scores, s);
}

TEST(SoftmaxPredict, Errors) {
  const std::vector<double> bad{0.1, std::nan("")}, inf{std::numeric_limits<double>::infinity(), 0.0}, one{0.5};
  EXPECT_THROW(softmax_predict(bad, 1.0), InvalidScore);
  EXPECT_THROW(softmax_predict(inf, 1.0), InvalidScore);
  EXPECT_THROW(softmax_predict(one, 1.0), InvalidArgument);
  const std::vector<double> ok{0.1, 0.2};
  EXPECT_THROW(softmax_predict(ok, 0.0), InvalidArgument);
  EXPECT_THROW(softmax_predict(ok, -1.0), InvalidArgument);
}

TEST(SoftmaxPredict, SumsToOneAndTemperatureInvariantArgmax) {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t k = 2 + rng.index(6);
    std::vector<double> s(k);
    for (double& x : s) x = rng.uniform(-1e3, 1e3);
    if (t % 7 == 0) s[rng.index(k)] = s[0];  // force some ties
    const Label base = softmax_predict(s, 1.0).predicted;
    for (double tau : {0.01, 0.1, 1.0, 10.0}) {
      const auto r = softmax_predict(s, tau);
      EXPECT_NEAR(std::accumulate(r.probs.begin(), r.probs.end(), 0.0), 1.0, 1e-9);
      EXPECT_EQ(r.predicted, base);
    }
  }
}

TEST(SoftmaxPredict, TieGoesToLowestIndex) {
  const std::vector<double> s{0.1, 0.9, 0.9};
  EXPECT_EQ(softmax_predict(s, 1.0).predicted, 1);
}

TEST(PredictMatrix, PerfectMatch) {
  const LabelSpace space({"positive", "negative"});
  const DescriptionSet ih("ih", {{"positive", "positive"}, {"negative", "negative"}}, space);
  const EmbeddingSet items({"doc"}, {{1.0, 0.0}});
  const EmbeddingSet desc({"ih/positive", "ih/negative"}, {{2.0, 0.0}, {0.0, 1.0}});
  const std::vector<DescriptionSet> sets{ih};
  const auto r = predict_matrix(items, sets, desc, space);
  EXPECT_EQ(r.matrix(0, 0), 0);
  EXPECT_EQ(r.matrix.annotator_ids(), std::vector<std::string>{"ih"});
}

TEST(PredictMatrix, IdenticalSetsGiveIdenticalColumns) {
  auto inst = random_instance(3, 20, 1, 4);
  for (int copy = 1; copy < 4; ++copy) {
    const std::string name = "copy" + std::to_string(copy);
    std::map<std::string, std::string> texts;
    for (const auto& c : inst.space.classes()) {
      texts[c] = c;
      inst.descriptions.add(description_key(name, c), inst.descriptions.at(description_key("set0", c)));
    }
    inst.sets.emplace_back(name, texts, inst.space);
  }
  const auto r = predict_matrix(inst.items, inst.sets, inst.descriptions, inst.space);
  for (std::size_t j = 1; j < 4; ++j) EXPECT_EQ(r.matrix.column(j), r.matrix.column(0));
}

TEST(PredictMatrix, MatchesCellOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(seed, 50, 5, 8);
    const auto r = predict_matrix(inst.items, inst.sets, inst.descriptions, inst.space, 0.5);
    ASSERT_EQ(r.matrix.num_items(), 50u);
    ASSERT_EQ(r.matrix.num_annotators(), 5u);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        std::vector<std::span<const double>> classes;
        for (const auto& c : inst.space.classes())
          classes.push_back(inst.descriptions.at(description_key(inst.sets[j].name(), c)));
        EXPECT_EQ(r.matrix(i, j), oracle::cosine_argmax(inst.items.vector(i), classes));
        const auto p = r.probs(i, j);
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
      }
  }
}

TEST(PredictMatrix, PermutingItemsPermutesRows) {
  const auto inst = random_instance(9, 30, 4, 6);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 shuffle_rng(1);
  std::shuffle(perm.begin(), perm.end(), shuffle_rng);
  EmbeddingSet shuffled;
  for (std::size_t p : perm) shuffled.add(inst.items.ids()[p], inst.items.vector(p));

  const auto a = predict_matrix(inst.items, inst.sets, inst.descriptions, inst.space);
  const auto b = predict_matrix(shuffled, inst.sets, inst.descriptions, inst.space);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(b.matrix(i, j), a.matrix(perm[i], j));
}

TEST(PredictMatrix, MissingDescriptionEmbedding) {
  auto inst = random_instance(1, 3, 2, 4);
  EmbeddingSet partial;
  for (const auto& id : inst.descriptions.ids())
    if (id != "set1/c2") partial.add(id, inst.descriptions.at(id));
  try {
    predict_matrix(inst.items, inst.sets, partial, inst.space);
    FAIL() << "expected MissingEmbedding";
  } catch (const MissingEmbedding& e) {
    EXPECT_EQ(e.key(), "set1/c2");
  }
}

TEST(PredictMatrix, ZeroItemVectorRejected) {
  auto inst = random_instance(2, 2, 1, 3);
  EmbeddingSet items;
  items.add("zero", std::vector<double>{0, 0, 0});
  EXPECT_THROW(predict_matrix(items, inst.sets, inst.descriptions, inst.space), ZeroVector);
}

TEST(ExpandPatterns, MoviePattern) {
  const LabelSpace space({"positive", "negative"});
  PatternGrid grid{{{"movie", "The movie is {}."}}, {{"ih", {{"positive", "positive"}, {"negative", "negative"}}}}};
  const auto sets = expand_patterns(grid, space);
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].text(0), "The movie is positive.");
  EXPECT_EQ(sets[0].text(1), "The movie is negative.");
  EXPECT_EQ(sets[0].name(), "movie×ih");
}

TEST(ExpandPatterns, BarePlaceholder) {
  const LabelSpace space({"positive", "negative"});
  PatternGrid grid{{{"bare", "{}"}}, {{"manual", {{"positive", "great"}, {"negative", "terrible"}}}}};
  const auto sets = expand_patterns(grid, space);
  EXPECT_EQ(sets[0].texts(), (std::vector<std::string>{"great", "terrible"}));
}

TEST(ExpandPatterns, RowMajorCrossProduct) {
  const LabelSpace space({"positive", "negative"});
  PatternGrid grid;
  grid.patterns = {{"p0", "{}"}, {"p1", "It was {}"}, {"p2", "Just {}!"}};
  grid.variants = {{"ih", {{"positive", "positive"}, {"negative", "negative"}}},
                   {"manual", {{"positive", "great"}, {"negative", "terrible"}}}};
  const auto sets = expand_patterns(grid, space);
  ASSERT_EQ(sets.size(), 6u);
  const std::vector<std::string> names{"p0×ih", "p0×manual", "p1×ih", "p1×manual", "p2×ih", "p2×manual"};
  for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(sets[s].name(), names[s]);
  EXPECT_EQ(sets[3].text(1), "It was terrible");
}

TEST(ExpandPatterns, PlaceholderCount) {
  const LabelSpace space({"positive", "negative"});
  const Variant v{"ih", {{"positive", "positive"}, {"negative", "negative"}}};
  EXPECT_THROW(expand_patterns(PatternGrid{{{"none", "no slot"}}, {v}}, space), BadPattern);
  EXPECT_THROW(expand_patterns(PatternGrid{{{"two", "{} and {}"}}, {v}}, space), BadPattern);
  const Variant partial{"bad", {{"positive", "good"}}};
  EXPECT_THROW(expand_patterns(PatternGrid{{{"ok", "{}"}}, {partial}}, space), InvalidArgument);
}
