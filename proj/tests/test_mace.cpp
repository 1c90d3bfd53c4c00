// Apache License, Version 2.0, refer to LICENSE.txt

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "labeldesc/mace.hpp"
#include "labeldesc/simulate.hpp"
#include "oracles.hpp"

using namespace labeldesc;

namespace {

// Random valid matrix; roughly a fifth of the cells missing.
PredictionMatrix random_matrix(Rng& rng, std::size_t items, std::size_t annotators, std::size_t classes,
                               double missing = 0.2) {
  std::vector<Label> cells(items * annotators);
  for (auto& c : cells) c = rng.bernoulli(missing) ? kMissing : static_cast<Label>(rng.index(classes));
  for (std::size_t i = 0; i < items; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < annotators; ++j) any |= cells[i * annotators + j] != kMissing;
    if (!any) cells[i * annotators + rng.index(annotators)] = static_cast<Label>(rng.index(classes));
  }
  for (std::size_t j = 0; j < annotators; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < items; ++i) any |= cells[i * annotators + j] != kMissing;
    if (!any) cells[rng.index(items) * annotators + j] = static_cast<Label>(rng.index(classes));
  }
  std::vector<std::string> ids, ann;
  for (std::size_t i = 0; i < items; ++i) ids.push_back("i" + std::to_string(i));
  for (std::size_t j = 0; j < annotators; ++j) ann.push_back("a" + std::to_string(j));
  return PredictionMatrix(ids, ann, cells);
}

MaceParameters random_parameters(Rng& rng, std::size_t annotators, std::size_t classes) {
  MaceParameters p{std::vector<double>(annotators), random_distributions(annotators, classes, rng)};
  for (double& t : p.theta) t = rng.uniform(0.01, 0.99);
  return p;
}

LabelSpace space_of(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
  return LabelSpace(names);
}

}  // namespace

TEST(CellLikelihood, Examples) {
  const std::vector<double> xi{0.3, 0.7};
  const double eps = 1e-6;
  EXPECT_NEAR(cell_likelihood(1 - eps, xi, 1, 1), 1 - eps * (1 - 0.7), 1e-15);
  for (Label k : {0, 1})
    for (Label g : {0, 1}) EXPECT_EQ(cell_likelihood(0.0, xi, k, g), xi[static_cast<std::size_t>(k)]);
  const std::vector<double> uniform{0.5, 0.5};
  EXPECT_DOUBLE_EQ(cell_likelihood(0.6, uniform, 0, 1), 0.2);
}

TEST(LogMarginalLikelihood, AllStructureCancels) {
  const PredictionMatrix m({"i"}, {"a"}, {1});
  MaceParameters p{{0.0}, Dense<double>(1, 2, 0.5)};
  EXPECT_NEAR(log_marginal_likelihood(m, p), std::log(0.5), 1e-15);
}

TEST(LogMarginalLikelihood, MatchesJointEnumeration) {
  Rng rng(42);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_matrix(rng, 3, 2, 3);
    const auto p = random_parameters(rng, 2, 3);
    EXPECT_NEAR(log_marginal_likelihood(m, p), oracle::log_likelihood_all_assignments(m, p.theta, p.xi), 1e-10);
  }
}

TEST(LogMarginalLikelihood, RelabelingSymmetry) {
  Rng rng(7);
  const std::vector<Label> perm{2, 0, 1};
  for (int t = 0; t < 20; ++t) {
    const auto m = random_matrix(rng, 6, 3, 3);
    const auto p = random_parameters(rng, 3, 3);
    std::vector<Label> cells = m.cells();
    for (auto& c : cells)
      if (c != kMissing) c = perm[static_cast<std::size_t>(c)];
    const PredictionMatrix mp(m.item_ids(), m.annotator_ids(), cells);
    MaceParameters pp = p;
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) pp.xi(j, static_cast<std::size_t>(perm[k])) = p.xi(j, k);
    EXPECT_NEAR(log_marginal_likelihood(mp, pp), log_marginal_likelihood(m, p), 1e-12);
  }
}

TEST(EStep, MatchesBruteForcePosterior) {
  Rng rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t items = 1 + rng.index(4), annotators = 1 + rng.index(3), classes = 2 + rng.index(2);
    const auto m = random_matrix(rng, items, annotators, classes, 0.3);
    const auto p = random_parameters(rng, annotators, classes);
    const auto e = e_step(m, p);
    const auto ref = oracle::enumerate_mace(m, p.theta, p.xi);
    for (std::size_t i = 0; i < items; ++i)
      for (std::size_t g = 0; g < classes; ++g) EXPECT_NEAR(e.gold(i, g), ref.posterior(i, g), 1e-10);
    EXPECT_NEAR(e.log_likelihood, ref.log_likelihood, 1e-10);
  }
}

TEST(EStep, NonSpamResponsibility) {
  // One item, one annotator: q = P(B=0 | y) = theta / (theta + (1-theta) xi_y).
  const PredictionMatrix m({"i"}, {"a"}, {1});
  MaceParameters p{{0.6}, Dense<double>(1, 2)};
  p.xi(0, 0) = 0.25;
  p.xi(0, 1) = 0.75;
  const auto e = e_step(m, p);
  // r_1 = (0.6 + 0.4*0.75) / ((0.4*0.75) + (0.6 + 0.4*0.75)) = 0.9 / 1.2
  EXPECT_NEAR(e.gold(0, 1), 0.75, 1e-15);
  EXPECT_NEAR(e.non_spam(0, 0), 0.75 * 0.6 / 0.9, 1e-15);
}

TEST(MStep, SmoothedUpdates) {
  // Two items seen by one annotator, responsibilities fixed by hand.
  const PredictionMatrix m({"i0", "i1"}, {"a"}, {0, 1});
  EStep e{Dense<double>(2, 2, 0.5), Dense<double>(2, 1), 0.0};
  e.non_spam(0, 0) = 0.8;
  e.non_spam(1, 0) = 0.4;
  EmConfig cfg;
  const auto p = m_step(m, e, 2, cfg);
  EXPECT_NEAR(p.theta[0], (0.5 + 1.2) / (1.0 + 2.0), 1e-15);
  EXPECT_NEAR(p.xi(0, 0), (0.1 + 0.2) / (0.2 + 0.8), 1e-15);
  EXPECT_NEAR(p.xi(0, 1), (0.1 + 0.6) / (0.2 + 0.8), 1e-15);
}

TEST(FitEm, PenalizedObjectiveNeverDecreases) {
  Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    const std::size_t items = 1 + rng.index(50), annotators = 1 + rng.index(6), classes = 2 + rng.index(3);
    const auto m = random_matrix(rng, items, annotators, classes);
    EmConfig cfg;
    cfg.restarts = 1;
    cfg.max_iterations = 60;
    cfg.rel_tolerance = 1e-12;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto model = fit_em(m, space_of(classes), cfg);
    for (std::size_t s = 1; s < model.objective_trace.size(); ++s)
      ASSERT_GE(model.objective_trace[s], model.objective_trace[s - 1] - 1e-9) << "instance " << t << " step " << s;
  }
}

TEST(FitEm, RowsStayNormalisedEveryIteration) {
  Rng rng(5);
  const auto m = random_matrix(rng, 40, 5, 4);
  EmConfig cfg;
  Rng init(1);
  auto p = initial_parameters(5, 4, cfg, init);
  for (int it = 0; it < 30; ++it) {
    const auto e = e_step(m, p);
    for (std::size_t i = 0; i < 40; ++i) {
      const auto r = e.gold.row(i);
      EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-9);
    }
    p = m_step(m, e, 4, cfg);
    for (std::size_t j = 0; j < 5; ++j) {
      const auto x = p.xi.row(j);
      EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), 1.0, 1e-9);
      EXPECT_GT(p.theta[j], 0.0);
      EXPECT_LT(p.theta[j], 1.0);
    }
  }
}

TEST(FitEm, UnanimousAnnotators) {
  Rng rng(8);
  std::vector<Label> truth(60);
  for (auto& y : truth) y = static_cast<Label>(rng.index(2));
  std::vector<Label> cells;
  for (Label y : truth)
    for (int j = 0; j < 4; ++j) cells.push_back(y);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < truth.size(); ++i) ids.push_back("i" + std::to_string(i));
  const PredictionMatrix m(ids, {"a", "b", "c", "d"}, cells);
  const auto model = fit_em(m, space_of(2));
  EXPECT_EQ(decode(model).labels, truth);
  for (double t : model.theta) EXPECT_GT(t, 0.9);
}

TEST(FitEm, SingleAnnotator) {
  Rng rng(13);
  const auto m = random_matrix(rng, 25, 1, 3, 0.0);
  const auto model = fit_em(m, space_of(3));
  EXPECT_EQ(decode(model).labels, m.column(0));
}

TEST(FitEm, SyntheticRanking) {
  const auto space = space_of(2);
  const std::vector<double> theta{0.9, 0.9, 0.1};
  const auto bundle = sample(500, space, theta, uniform_distributions(3, 2), 0.0, 31);
  EmConfig cfg;
  cfg.seed = 31;
  const auto model = fit_em(bundle.matrix, space, cfg);
  EXPECT_GT(model.theta[0], model.theta[2]);
  EXPECT_GT(model.theta[1], model.theta[2]);
  const auto ranked = rank_by_theta(model, bundle.matrix.annotator_ids());
  EXPECT_EQ(ranked.back().annotator_id, bundle.matrix.annotator_ids()[2]);
  EXPECT_EQ(ranked.back().index, 2u);
}

TEST(FitEm, ModelInvariants) {
  Rng rng(77);
  const auto m = random_matrix(rng, 30, 4, 3);
  const auto model = fit_em(m, space_of(3));
  EXPECT_TRUE(std::isfinite(model.log_likelihood));
  EXPECT_EQ(model.restart_log_likelihoods.size(), 10u);
  for (double ll : model.restart_log_likelihoods) EXPECT_LE(ll, model.log_likelihood);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_GT(model.theta[j], 0.0);
    EXPECT_LT(model.theta[j], 1.0);
    const auto x = model.xi.row(j);
    EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), 1.0, 1e-9);
  }
  // Returned posteriors belong to the returned parameters.
  const auto e = e_step(m, MaceParameters{model.theta, model.xi});
  EXPECT_EQ(e.gold, model.posteriors);
  EXPECT_EQ(e.log_likelihood, model.log_likelihood);
  EXPECT_EQ(model.restart_seed, restart_seed(EmConfig{}, model.restart_index));
}

TEST(FitEm, Deterministic) {
  Rng rng(3);
  const auto m = random_matrix(rng, 80, 5, 3);
  EmConfig cfg;
  cfg.seed = 1234;
  const auto a = fit_em(m, space_of(3), cfg);
  const auto b = fit_em(m, space_of(3), cfg);
  EXPECT_EQ(a, b);
  cfg.threads = 4;
  const auto c = fit_em(m, space_of(3), cfg);
  EXPECT_EQ(a, c);
}

TEST(FitEm, LabelPermutationEquivariance) {
  const std::vector<Label> perm{1, 2, 0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto m = random_matrix(rng, 40, 4, 3);
    std::vector<Label> cells = m.cells();
    for (auto& c : cells)
      if (c != kMissing) c = perm[static_cast<std::size_t>(c)];
    const PredictionMatrix mp(m.item_ids(), m.annotator_ids(), cells);

    EmConfig cfg;
    cfg.seed = seed;
    cfg.uniform_xi_init = true;
    const auto a = fit_em(m, space_of(3), cfg);
    const auto b = fit_em(mp, space_of(3), cfg);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(a.theta[j], b.theta[j], 1e-9);
    const auto da = decode(a), db = decode(b);
    for (std::size_t i = 0; i < 40; ++i) {
      // Only compare items whose posterior is not a near-tie.
      const auto r = a.posteriors.row(i);
      std::vector<double> sorted(r.begin(), r.end());
      std::sort(sorted.rbegin(), sorted.rend());
      if (sorted[0] - sorted[1] < 1e-9) continue;
      EXPECT_EQ(db.labels[i], perm[static_cast<std::size_t>(da.labels[i])]);
    }
  }
}

TEST(FitEm, Errors) {
  const PredictionMatrix bad({"i"}, {"a"}, {kMissing});
  EXPECT_THROW(fit_em(bad, space_of(2)), ValidationError);
  const PredictionMatrix ok({"i"}, {"a"}, {0});
  EmConfig cfg;
  cfg.restarts = 0;
  EXPECT_THROW(fit_em(ok, space_of(2), cfg), InvalidParameters);
  cfg = {};
  cfg.theta_smoothing = 0.0;
  EXPECT_THROW(fit_em(ok, space_of(2), cfg), InvalidParameters);
  cfg = {};
  cfg.rel_tolerance = 0.0;
  EXPECT_THROW(fit_em(ok, space_of(2), cfg), InvalidParameters);
}

TEST(Decode, DominantAndTie) {
  Dense<double> r(2, 2);
  r(0, 0) = 0.9;
  r(0, 1) = 0.1;
  r(1, 0) = 0.5;
  r(1, 1) = 0.5;
  const auto d = decode(r);
  EXPECT_EQ(d.labels, (std::vector<Label>{0, 0}));
  EXPECT_DOUBLE_EQ(d.confidence[0], 0.9);
  EXPECT_DOUBLE_EQ(d.confidence[1], 0.5);
}

TEST(RankByTheta, OrderAndTies) {
  const std::vector<double> theta{0.2, 0.8};
  const auto r = rank_by_theta(theta, {"first", "second"});
  EXPECT_EQ(r[0].annotator_id, "second");
  EXPECT_EQ(r[1].annotator_id, "first");

  const std::vector<double> tied{0.5, 0.5, 0.7};
  const auto t = rank_by_theta(tied, {"zeta", "alpha", "mid"});
  EXPECT_EQ(t[0].annotator_id, "mid");
  EXPECT_EQ(t[1].annotator_id, "alpha");
  EXPECT_EQ(t[2].annotator_id, "zeta");
  EXPECT_THROW(rank_by_theta(tied, {"a"}), DimensionMismatch);
}
