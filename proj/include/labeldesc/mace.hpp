// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

// MACE (multi-annotator competence estimation) fitted with smoothed EM.
//
// Generative story per item i: a gold label G_i is drawn uniformly from K
// classes. For each annotator j that labels i, a spam indicator B_ij is 0
// with probability theta_j, in which case the annotator copies G_i;
// otherwise the label is drawn from the annotator's spam distribution xi_j.
// Each column of a PredictionMatrix is one annotator (here: one label
// description set), so theta_j scores how trustworthy that set is.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "labeldesc/core.hpp"
#include "labeldesc/dense.hpp"
#include "labeldesc/rng.hpp"

namespace labeldesc {

struct EmConfig {
  int restarts = 10;
  int max_iterations = 100;
  double rel_tolerance = 1e-6;
  double theta_smoothing = 0.5;
  double xi_smoothing = 0.1;
  std::uint64_t seed = 0;
  /// theta is initialised uniformly on this range. A range above 0.5 keeps
  /// EM away from the mirrored "everyone is a spammer" optimum.
  double theta_init_low = 0.3;
  double theta_init_high = 0.9;
  /// Start every xi row at 1/K instead of a random draw. Makes the fit
  /// covariant under relabeling of the classes.
  bool uniform_xi_init = false;
  /// Worker threads for restarts. The result does not depend on it.
  unsigned threads = 1;

  void validate() const {
    if (restarts < 1) throw InvalidParameters("restarts must be >= 1");
    if (max_iterations < 1) throw InvalidParameters("max_iterations must be >= 1");
    if (!(rel_tolerance > 0.0)) throw InvalidParameters("rel_tolerance must be > 0");
    if (!(theta_smoothing > 0.0) || !(xi_smoothing > 0.0))
      throw InvalidParameters("smoothing constants must be > 0");
    if (!(theta_init_low > 0.0 && theta_init_low <= theta_init_high && theta_init_high < 1.0))
      throw InvalidParameters("theta init range must satisfy 0 < low <= high < 1");
  }
};

/// theta (N) and xi (N x K).
struct MaceParameters {
  std::vector<double> theta;
  Dense<double> xi;

  std::size_t num_annotators() const noexcept { return theta.size(); }
  std::size_t num_classes() const noexcept { return xi.cols(); }
};

/// Expectations computed under fixed parameters.
struct EStep {
  Dense<double> gold;      ///< I x K, P(G_i = g | y)
  Dense<double> non_spam;  ///< I x N, P(B_ij = 0 | y); 0 on missing cells
  double log_likelihood = 0.0;
};

struct MaceModel {
  std::vector<double> theta;
  Dense<double> xi;
  Dense<double> posteriors;  ///< I x K
  double log_likelihood = 0.0;
  int restart_index = 0;
  std::uint64_t restart_seed = 0;
  int iterations = 0;
  bool converged = false;
  /// Mean posterior probability that annotator j copied gold, over its
  /// observed items. Diagnostic only; ranking uses theta.
  std::vector<double> mean_non_spam;
  /// Penalized objective after initialisation and after every iteration.
  std::vector<double> objective_trace;
  /// Final log-likelihood of every restart, in restart order.
  std::vector<double> restart_log_likelihoods;

  std::size_t num_items() const noexcept { return posteriors.rows(); }
  std::size_t num_annotators() const noexcept { return theta.size(); }
  std::size_t num_classes() const noexcept { return posteriors.cols(); }

  friend bool operator==(const MaceModel&, const MaceModel&) = default;
};

/// P(y = observed | G = gold) with the spam indicator summed out.
inline double cell_likelihood(double theta, std::span<const double> xi, Label observed, Label gold) {
  const double copy = observed == gold ? theta : 0.0;
  return copy + (1.0 - theta) * xi[static_cast<std::size_t>(observed)];
}

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - top);
  return top + std::log(s);
}

/// Fills `log_joint` (K entries) with log P(G=g) + sum_j log P(y_ij | G=g).
inline void item_log_joint(std::span<const Label> row, const MaceParameters& p, std::span<double> log_joint) {
  const std::size_t num_classes = log_joint.size();
  const double log_prior = -std::log(static_cast<double>(num_classes));
  std::fill(log_joint.begin(), log_joint.end(), log_prior);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const Label y = row[j];
    if (is_missing(y)) continue;
    const auto xi = p.xi.row(j);
    for (std::size_t g = 0; g < num_classes; ++g)
      log_joint[g] += std::log(cell_likelihood(p.theta[j], xi, y, static_cast<Label>(g)));
  }
}

}  // namespace detail

inline double log_marginal_likelihood(const PredictionMatrix& m, const MaceParameters& p) {
  if (p.theta.size() != m.num_annotators())
    throw DimensionMismatch(m.num_annotators(), p.theta.size(), "theta");
  if (p.xi.rows() != m.num_annotators())
    throw DimensionMismatch(m.num_annotators(), p.xi.rows(), "xi rows");
  std::vector<double> log_joint(p.num_classes());
  double total = 0.0;
  for (std::size_t i = 0; i < m.num_items(); ++i) {
    detail::item_log_joint(m.row(i), p, log_joint);
    total += detail::log_sum_exp(log_joint);
  }
  return total;
}

/// Log-likelihood plus the log-density of the priors implied by the
/// smoothing constants (Beta on theta, Dirichlet on xi, up to constants).
/// This is the quantity smoothed EM never decreases.
inline double penalized_objective(double log_likelihood, const MaceParameters& p, const EmConfig& config) {
  double penalty = 0.0;
  for (double t : p.theta) penalty += config.theta_smoothing * (std::log(t) + std::log1p(-t));
  for (double x : p.xi.data()) penalty += config.xi_smoothing * std::log(x);
  return log_likelihood + penalty;
}

inline EStep e_step(const PredictionMatrix& m, const MaceParameters& p) {
  const std::size_t items = m.num_items();
  const std::size_t annotators = m.num_annotators();
  const std::size_t num_classes = p.num_classes();

  EStep out{Dense<double>(items, num_classes), Dense<double>(items, annotators, 0.0), 0.0};
  std::vector<double> log_joint(num_classes);
  for (std::size_t i = 0; i < items; ++i) {
    const auto row = m.row(i);
    detail::item_log_joint(row, p, log_joint);
    const double log_evidence = detail::log_sum_exp(log_joint);
    out.log_likelihood += log_evidence;

    auto gold = out.gold.row(i);
    double norm = 0.0;
    for (std::size_t g = 0; g < num_classes; ++g) {
      gold[g] = std::exp(log_joint[g] - log_evidence);
      norm += gold[g];
    }
    for (double& r : gold) r /= norm;

    // Only the hypothesis g == y can explain a non-spam draw.
    for (std::size_t j = 0; j < annotators; ++j) {
      const Label y = row[j];
      if (is_missing(y)) continue;
      const double copy = p.theta[j];
      const double lik = cell_likelihood(copy, p.xi.row(j), y, y);
      out.non_spam(i, j) = gold[static_cast<std::size_t>(y)] * copy / lik;
    }
  }
  return out;
}

/// MAP update given expectations. Smoothing keeps every parameter interior.
inline MaceParameters m_step(const PredictionMatrix& m, const EStep& e, std::size_t num_classes,
                             const EmConfig& config) {
  const std::size_t annotators = m.num_annotators();
  const double dt = config.theta_smoothing;
  const double dx = config.xi_smoothing;

  MaceParameters p{std::vector<double>(annotators), Dense<double>(annotators, num_classes)};
  std::vector<double> spam_counts(num_classes);
  for (std::size_t j = 0; j < annotators; ++j) {
    double copied = 0.0;
    double observed = 0.0;
    double spam_total = 0.0;
    std::fill(spam_counts.begin(), spam_counts.end(), 0.0);
    for (std::size_t i = 0; i < m.num_items(); ++i) {
      const Label y = m(i, j);
      if (is_missing(y)) continue;
      const double q = e.non_spam(i, j);
      copied += q;
      observed += 1.0;
      spam_counts[static_cast<std::size_t>(y)] += 1.0 - q;
      spam_total += 1.0 - q;
    }
    p.theta[j] = (dt + copied) / (2.0 * dt + observed);
    const double denom = static_cast<double>(num_classes) * dx + spam_total;
    for (std::size_t k = 0; k < num_classes; ++k) p.xi(j, k) = (dx + spam_counts[k]) / denom;
  }
  return p;
}

inline MaceParameters initial_parameters(std::size_t annotators, std::size_t num_classes,
                                         const EmConfig& config, Rng& rng) {
  MaceParameters p{std::vector<double>(annotators), Dense<double>(annotators, num_classes)};
  for (auto& t : p.theta) t = rng.uniform(config.theta_init_low, config.theta_init_high);
  for (std::size_t j = 0; j < annotators; ++j) {
    auto row = p.xi.row(j);
    if (config.uniform_xi_init) {
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(num_classes));
      continue;
    }
    double z = 0.0;
    for (double& x : row) z += (x = rng.uniform());
    for (double& x : row) x /= z;
  }
  return p;
}

inline std::uint64_t restart_seed(const EmConfig& config, int restart) {
  return config.seed + static_cast<std::uint64_t>(restart);
}

/// One EM run from a seeded initialisation. The returned posteriors are
/// those of the E-step under the returned parameters.
inline MaceModel fit_em_restart(const PredictionMatrix& m, std::size_t num_classes, const EmConfig& config,
                                int restart) {
  const std::uint64_t seed = restart_seed(config, restart);
  Rng rng(seed);
  MaceParameters params = initial_parameters(m.num_annotators(), num_classes, config, rng);
  EStep e = e_step(m, params);

  MaceModel model;
  model.restart_index = restart;
  model.restart_seed = seed;
  model.objective_trace.push_back(penalized_objective(e.log_likelihood, params, config));

  double previous = e.log_likelihood;
  for (int it = 1; it <= config.max_iterations; ++it) {
    params = m_step(m, e, num_classes, config);
    e = e_step(m, params);
    model.iterations = it;
    model.objective_trace.push_back(penalized_objective(e.log_likelihood, params, config));
    const double gain = (e.log_likelihood - previous) / std::max(std::abs(previous), 1e-300);
    previous = e.log_likelihood;
    if (gain < config.rel_tolerance) {
      model.converged = true;
      break;
    }
  }

  model.theta = std::move(params.theta);
  model.xi = std::move(params.xi);
  model.log_likelihood = e.log_likelihood;
  model.mean_non_spam.assign(m.num_annotators(), 0.0);
  for (std::size_t j = 0; j < m.num_annotators(); ++j) {
    double sum = 0.0, n = 0.0;
    for (std::size_t i = 0; i < m.num_items(); ++i) {
      if (is_missing(m(i, j))) continue;
      sum += e.non_spam(i, j);
      n += 1.0;
    }
    model.mean_non_spam[j] = n > 0.0 ? sum / n : 0.0;
  }
  model.posteriors = std::move(e.gold);
  return model;
}

/// Fits MACE with `config.restarts` independent EM runs and returns the one
/// with the highest final log-likelihood (earliest restart on ties).
inline MaceModel fit_em(const PredictionMatrix& m, const LabelSpace& space, const EmConfig& config = {}) {
  config.validate();
  require_valid(m, space);

  const auto restarts = static_cast<std::size_t>(config.restarts);
  std::vector<MaceModel> fits(restarts);
  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(restarts)));
  if (workers == 1) {
    for (std::size_t r = 0; r < restarts; ++r) fits[r] = fit_em_restart(m, space.size(), config, static_cast<int>(r));
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < restarts;)
          fits[r] = fit_em_restart(m, space.size(), config, static_cast<int>(r));
      });
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (fits[r].log_likelihood > fits[best].log_likelihood) best = r;
  MaceModel winner = std::move(fits[best]);
  winner.restart_log_likelihoods.resize(restarts);
  for (std::size_t r = 0; r < restarts; ++r)
    winner.restart_log_likelihoods[r] = r == best ? winner.log_likelihood : fits[r].log_likelihood;
  return winner;
}

struct Decoded {
  std::vector<Label> labels;
  std::vector<double> confidence;
};

/// Posterior decoding: the most probable gold label per item, lowest class
/// index on ties.
inline Decoded decode(const Dense<double>& posteriors) {
  Decoded out;
  out.labels.reserve(posteriors.rows());
  out.confidence.reserve(posteriors.rows());
  for (std::size_t i = 0; i < posteriors.rows(); ++i) {
    const auto r = posteriors.row(i);
    std::size_t best = 0;
    for (std::size_t g = 1; g < r.size(); ++g)
      if (r[g] > r[best]) best = g;
    out.labels.push_back(static_cast<Label>(best));
    out.confidence.push_back(r[best]);
  }
  return out;
}

inline Decoded decode(const MaceModel& model) { return decode(model.posteriors); }

struct RankedAnnotator {
  std::string annotator_id;
  double theta = 0.0;
  std::size_t index = 0;  ///< Column in the fitted matrix.
};

/// Annotators by descending theta; equal theta falls back to id order.
inline std::vector<RankedAnnotator> rank_by_theta(std::span<const double> theta,
                                                  const std::vector<std::string>& annotator_ids) {
  if (theta.size() != annotator_ids.size())
    throw DimensionMismatch(theta.size(), annotator_ids.size(), "annotator ids");
  std::vector<RankedAnnotator> out;
  out.reserve(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) out.push_back({annotator_ids[j], theta[j], j});
  std::stable_sort(out.begin(), out.end(), [](const RankedAnnotator& a, const RankedAnnotator& b) {
    if (a.theta != b.theta) return a.theta > b.theta;
    return a.annotator_id < b.annotator_id;
  });
  return out;
}

inline std::vector<RankedAnnotator> rank_by_theta(const MaceModel& model,
                                                  const std::vector<std::string>& annotator_ids) {
  return rank_by_theta(model.theta, annotator_ids);
}

}  // namespace labeldesc
