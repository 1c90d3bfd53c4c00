// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labeldesc/core.hpp"
#include "labeldesc/mace.hpp"

namespace labeldesc {

/// Per-item modal label over observed cells, lowest class index on ties.
/// Confidence is the winning share of the item's votes.
inline Decoded majority_vote(const PredictionMatrix& m, std::size_t num_classes) {
  Decoded out;
  out.labels.reserve(m.num_items());
  out.confidence.reserve(m.num_items());
  std::vector<std::size_t> votes(num_classes);
  for (std::size_t i = 0; i < m.num_items(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    std::size_t total = 0;
    for (Label y : m.row(i)) {
      if (is_missing(y)) continue;
      ++votes.at(static_cast<std::size_t>(y));
      ++total;
    }
    const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    out.labels.push_back(static_cast<Label>(best));
    out.confidence.push_back(total ? static_cast<double>(votes[best]) / static_cast<double>(total) : 0.0);
  }
  return out;
}

struct KappaResult {
  double value = 0.0;
  /// Chance agreement was 1 (both raters constant on the same class), so
  /// kappa is undefined and `value` follows the fixed convention.
  bool degenerate = false;
  std::size_t shared_items = 0;
};

/// Cohen's kappa over the items both columns observe.
inline KappaResult cohen_kappa(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size(), "kappa columns");
  Label top = 0;
  for (std::size_t i = 0; i < a.size(); ++i) top = std::max({top, a[i], b[i]});
  const auto num_classes = static_cast<std::size_t>(top) + 1;

  std::vector<std::uint64_t> count_a(num_classes, 0), count_b(num_classes, 0);
  std::uint64_t n = 0, agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    ++n;
    agree += a[i] == b[i];
    ++count_a[static_cast<std::size_t>(a[i])];
    ++count_b[static_cast<std::size_t>(b[i])];
  }
  if (n == 0) throw NoOverlap();

  std::uint64_t chance = 0;
  for (std::size_t k = 0; k < num_classes; ++k) chance += count_a[k] * count_b[k];

  KappaResult out;
  out.shared_items = n;
  const double nn = static_cast<double>(n);
  const double p_o = static_cast<double>(agree) / nn;
  if (chance == n * n) {
    out.degenerate = true;
    out.value = agree == n ? 1.0 : 0.0;
    return out;
  }
  const double p_e = static_cast<double>(chance) / (nn * nn);
  out.value = (p_o - p_e) / (1.0 - p_e);
  return out;
}

/// Mean kappa of each annotator against every other annotator. Pairs that
/// share no observed item are left out of the mean; an annotator with no
/// overlapping partner scores 0.
inline std::vector<double> kappa_scores(const PredictionMatrix& m) {
  const std::size_t n = m.num_annotators();
  if (n < 2) throw NeedTwoAnnotators();
  std::vector<std::vector<Label>> columns;
  columns.reserve(n);
  for (std::size_t j = 0; j < n; ++j) columns.push_back(m.column(j));

  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> pairs(n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      KappaResult k;
      try {
        k = cohen_kappa(columns[a], columns[b]);
      } catch (const NoOverlap&) {
        continue;
      }
      sum[a] += k.value;
      sum[b] += k.value;
      ++pairs[a];
      ++pairs[b];
    }
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (pairs[j]) out[j] = sum[j] / static_cast<double>(pairs[j]);
  return out;
}

/// Unweighted mean of per-class F1 over all K classes. A class with no
/// predicted and no gold instance contributes 0. Positions where
/// `predicted` is missing are skipped.
inline double macro_f1(std::span<const Label> predicted, std::span<const Label> gold, std::size_t num_classes) {
  if (predicted.size() != gold.size()) throw DimensionMismatch(gold.size(), predicted.size(), "macro_f1");
  std::vector<std::uint64_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (is_missing(predicted[i])) continue;
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto g = static_cast<std::size_t>(gold[i]);
    if (p == g) {
      ++tp.at(p);
    } else {
      ++fp.at(p);
      ++fn.at(g);
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const std::uint64_t denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom) total += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
  }
  return total / static_cast<double>(num_classes);
}

/// Fraction of observed positions where `predicted` equals `gold`.
inline double accuracy(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) throw DimensionMismatch(gold.size(), predicted.size(), "accuracy");
  std::size_t hit = 0, seen = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (is_missing(predicted[i])) continue;
    ++seen;
    hit += predicted[i] == gold[i];
  }
  return seen ? static_cast<double>(hit) / static_cast<double>(seen) : 0.0;
}

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  ///< One input was constant; value is 0.
};

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() && xs[order[hi]] == xs[order[lo]]) ++hi;
    const double mean_rank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t t = lo; t < hi; ++t) ranks[order[t]] = mean_rank;
    lo = hi;
  }
  return ranks;
}

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

/// Spearman rank correlation with average ranks for ties.
inline Correlation spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size(), "spearman");
  if (x.size() < 2) throw InvalidArgument("spearman needs at least two observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvalidArgument("spearman input is not finite");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Ranking report

struct RankingRow {
  std::string annotator_id;
  double theta = 0.0;
  double kappa_mean = 0.0;
  std::optional<double> macro_f1;
  std::optional<double> accuracy;
};

struct RankingSummary {
  Correlation rho_theta_f1;
  Correlation rho_kappa_f1;
  Correlation rho_theta_accuracy;
};

/// Per-annotator scores in rank_by_theta order, with rank correlations
/// against the true per-annotator quality when gold labels are given.
struct RankingReport {
  std::vector<RankingRow> rows;
  std::optional<RankingSummary> summary;

  bool has_gold() const noexcept { return summary.has_value(); }
};

inline RankingReport ranking_report(const PredictionMatrix& m, const MaceModel& model,
                                    const std::optional<GoldLabels>& gold, const LabelSpace& space) {
  require_valid(m, space);
  if (model.num_annotators() != m.num_annotators())
    throw DimensionMismatch(m.num_annotators(), model.num_annotators(), "model annotators");
  const std::size_t n = m.num_annotators();
  const auto kappa = kappa_scores(m);

  std::optional<GoldLabels> aligned;
  if (gold) {
    aligned = align_gold(*gold, m);
    require_valid(*aligned, space);
  }

  std::vector<double> f1(n), acc(n);
  if (aligned)
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = m.column(j);
      f1[j] = macro_f1(col, aligned->labels, space.size());
      acc[j] = accuracy(col, aligned->labels);
    }

  RankingReport report;
  for (const auto& ranked : rank_by_theta(model, m.annotator_ids())) {
    RankingRow row{ranked.annotator_id, ranked.theta, kappa[ranked.index], {}, {}};
    if (aligned) {
      row.macro_f1 = f1[ranked.index];
      row.accuracy = acc[ranked.index];
    }
    report.rows.push_back(std::move(row));
  }
  if (aligned && n >= 2)
    report.summary = RankingSummary{spearman_rho(model.theta, f1), spearman_rho(kappa, f1),
                                    spearman_rho(model.theta, acc)};
  return report;
}

/// Gold-based scores of the two aggregators on one matrix.
struct AggregationScores {
  double mace_macro_f1 = 0.0;
  double majority_macro_f1 = 0.0;
  double mace_accuracy = 0.0;
  double majority_accuracy = 0.0;
};

inline AggregationScores aggregation_scores(const PredictionMatrix& m, const MaceModel& model,
                                            const GoldLabels& gold, const LabelSpace& space) {
  const auto aligned = align_gold(gold, m);
  require_valid(aligned, space);
  const auto mace = decode(model);
  const auto majority = majority_vote(m, space.size());
  return {macro_f1(mace.labels, aligned.labels, space.size()),
          macro_f1(majority.labels, aligned.labels, space.size()), accuracy(mace.labels, aligned.labels),
          accuracy(majority.labels, aligned.labels)};
}

}  // namespace labeldesc
