// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labeldesc/core.hpp"
#include "labeldesc/dense.hpp"
#include "labeldesc/rng.hpp"

namespace labeldesc {

/// Spam indicator sample per cell.
enum class SpamDraw : std::int8_t { kMissing = -1, kCopied = 0, kSpam = 1 };

/// Draws from the MACE generative model, with the latent variables kept.
struct SyntheticBundle {
  GoldLabels gold;
  PredictionMatrix matrix;
  std::vector<double> theta_true;
  Dense<double> xi_true;
  Dense<SpamDraw> spam_draws;  ///< I x N
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticBundle&, const SyntheticBundle&) = default;
};

namespace detail {

inline std::string padded_id(const char* prefix, std::size_t i, std::size_t count) {
  const std::string digits = std::to_string(count > 0 ? count - 1 : 0);
  std::string n = std::to_string(i);
  return prefix + std::string(digits.size() - std::min(digits.size(), n.size()), '0') + n;
}

}  // namespace detail

/// Samples `num_items` items labelled by one annotator per theta entry.
///
/// Draw order: missing mask (row by row, then repairs), gold labels, then
/// per observed cell the spam indicator and, if spamming, the label.
inline SyntheticBundle sample(std::size_t num_items, const LabelSpace& space, std::span<const double> theta_true,
                              const Dense<double>& xi_true, double missing_rate, std::uint64_t seed) {
  const std::size_t annotators = theta_true.size();
  const std::size_t num_classes = space.size();
  if (num_items == 0) throw InvalidParameters("need at least one item");
  if (annotators == 0) throw InvalidParameters("need at least one annotator");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw InvalidParameters("missing_rate must be in [0, 1)");
  for (double t : theta_true)
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidParameters("theta must lie in [0, 1]");
  if (xi_true.rows() != annotators || xi_true.cols() != num_classes)
    throw InvalidParameters("xi must be annotators x classes");
  for (std::size_t j = 0; j < annotators; ++j) {
    double s = 0.0;
    for (double x : xi_true.row(j)) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidParameters("xi entries must be non-negative");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidParameters("xi row " + std::to_string(j) + " does not sum to 1");
  }

  Rng rng(seed);

  Dense<char> observed(num_items, annotators, 1);
  if (missing_rate > 0.0) {
    for (std::size_t i = 0; i < num_items; ++i) {
      bool any = false;
      while (!any)
        for (std::size_t j = 0; j < annotators; ++j) any |= (observed(i, j) = !rng.bernoulli(missing_rate)) != 0;
    }
    // An empty column is re-drawn; this only adds observations, so rows
    // stay non-empty.
    for (std::size_t j = 0; j < annotators; ++j) {
      bool any = false;
      for (std::size_t i = 0; i < num_items; ++i) any |= observed(i, j) != 0;
      while (!any)
        for (std::size_t i = 0; i < num_items; ++i) any |= (observed(i, j) = !rng.bernoulli(missing_rate)) != 0;
    }
  }

  SyntheticBundle b;
  b.seed = seed;
  b.theta_true.assign(theta_true.begin(), theta_true.end());
  b.xi_true = xi_true;
  b.spam_draws = Dense<SpamDraw>(num_items, annotators, SpamDraw::kMissing);

  b.gold.item_ids.reserve(num_items);
  b.gold.labels.reserve(num_items);
  for (std::size_t i = 0; i < num_items; ++i) {
    b.gold.item_ids.push_back(detail::padded_id("item", i, num_items));
    b.gold.labels.push_back(static_cast<Label>(rng.index(num_classes)));
  }

  std::vector<Label> cells(num_items * annotators, kMissing);
  for (std::size_t i = 0; i < num_items; ++i)
    for (std::size_t j = 0; j < annotators; ++j) {
      if (!observed(i, j)) continue;
      const bool spam = rng.bernoulli(1.0 - theta_true[j]);
      b.spam_draws(i, j) = spam ? SpamDraw::kSpam : SpamDraw::kCopied;
      cells[i * annotators + j] = spam ? static_cast<Label>(rng.categorical(xi_true.row(j))) : b.gold.labels[i];
    }

  std::vector<std::string> annotator_ids;
  for (std::size_t j = 0; j < annotators; ++j) annotator_ids.push_back(detail::padded_id("a", j, annotators));
  b.matrix = PredictionMatrix(b.gold.item_ids, std::move(annotator_ids), std::move(cells));
  return b;
}

/// `count` values evenly spaced over [lo, hi].
inline std::vector<double> spaced(std::size_t count, double lo, double hi) {
  std::vector<double> out(count, lo);
  for (std::size_t j = 1; j < count; ++j)
    out[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
  return out;
}

/// Rows of normalized uniform draws.
inline Dense<double> random_distributions(std::size_t rows, std::size_t cols, Rng& rng) {
  Dense<double> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.0;
    for (double& x : out.row(r)) z += (x = rng.uniform());
    for (double& x : out.row(r)) x /= z;
  }
  return out;
}

inline Dense<double> uniform_distributions(std::size_t rows, std::size_t cols) {
  return Dense<double>(rows, cols, 1.0 / static_cast<double>(cols));
}

}  // namespace labeldesc
