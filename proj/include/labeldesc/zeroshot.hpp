// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labeldesc/core.hpp"
#include "labeldesc/dense.hpp"

namespace labeldesc {

/// Cosine similarity, clamped to [-1, 1].
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size(), "cosine");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t d = 0; d < u.size(); ++d) {
    dot += u[d] * v[d];
    uu += u[d] * u[d];
    vv += v[d] * v[d];
  }
  if (uu == 0.0 || vv == 0.0) throw ZeroVector();
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

/// Scores, softmax probabilities and the hard decision for one item under
/// one description set.
struct SimilarityRow {
  std::vector<double> scores;
  std::vector<double> probs;
  Label predicted = 0;
};

/// Lowest index among the maxima.
inline Label argmax(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (xs[k] > xs[best]) best = k;
  return static_cast<Label>(best);
}

inline SimilarityRow softmax_predict(std::span<const double> scores, double temperature = 1.0) {
  if (scores.size() < 2) throw InvalidArgument("softmax needs at least two scores");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidArgument("temperature must be positive and finite");
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (!std::isfinite(scores[k])) throw InvalidScore(k);

  SimilarityRow row;
  row.scores.assign(scores.begin(), scores.end());
  row.predicted = argmax(scores);

  const double top = scores[static_cast<std::size_t>(row.predicted)];
  row.probs.resize(scores.size());
  double z = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    row.probs[k] = std::exp((scores[k] - top) / temperature);
    z += row.probs[k];
  }
  for (double& p : row.probs) p /= z;
  return row;
}

/// Hard predictions of every description set on every item, plus the
/// per-cell class probabilities (items x sets x classes) for diagnostics.
struct ZeroShotResult {
  PredictionMatrix matrix;
  std::vector<double> probabilities;
  std::size_t num_classes = 0;

  std::span<const double> probs(std::size_t item, std::size_t set) const {
    const std::size_t sets = matrix.num_annotators();
    return {probabilities.data() + (item * sets + set) * num_classes, num_classes};
  }
};

/// Runs every description set as a zero-shot classifier over `items`.
/// Description vectors are looked up in `descriptions` under
/// description_key(set name, class name).
inline ZeroShotResult predict_matrix(const EmbeddingSet& items, std::span<const DescriptionSet> sets,
                                     const EmbeddingSet& descriptions, const LabelSpace& space,
                                     double temperature = 1.0) {
  if (items.empty()) throw InvalidArgument("no item embeddings");
  if (sets.empty()) throw InvalidArgument("no description sets");
  const std::size_t num_classes = space.size();

  // Resolve every description vector up front so a missing key fails before
  // any work is done.
  std::vector<std::span<const double>> desc_vecs;
  desc_vecs.reserve(sets.size() * num_classes);
  std::vector<std::string> set_names;
  for (const auto& set : sets) {
    if (set.texts().size() != num_classes)
      throw DimensionMismatch(num_classes, set.texts().size(), "description set '" + set.name() + "'");
    set_names.push_back(set.name());
    for (std::size_t k = 0; k < num_classes; ++k) {
      auto v = descriptions.at(description_key(set.name(), space.classes()[k]));
      if (v.size() != items.dim()) throw DimensionMismatch(items.dim(), v.size(), "description embedding");
      desc_vecs.push_back(v);
    }
  }

  const std::size_t num_items = items.size();
  std::vector<Label> cells(num_items * sets.size());
  std::vector<double> probabilities(num_items * sets.size() * num_classes);
  std::vector<double> scores(num_classes);
  for (std::size_t i = 0; i < num_items; ++i) {
    const auto item = items.vector(i);
    for (std::size_t j = 0; j < sets.size(); ++j) {
      for (std::size_t k = 0; k < num_classes; ++k) scores[k] = cosine(item, desc_vecs[j * num_classes + k]);
      const SimilarityRow row = softmax_predict(scores, temperature);
      cells[i * sets.size() + j] = row.predicted;
      std::copy(row.probs.begin(), row.probs.end(),
                probabilities.begin() + static_cast<std::ptrdiff_t>((i * sets.size() + j) * num_classes));
    }
  }
  return {PredictionMatrix(items.ids(), std::move(set_names), std::move(cells)), std::move(probabilities),
          num_classes};
}

// ---------------------------------------------------------------------------
// Pattern grids

struct Pattern {
  std::string id;
  std::string text;  ///< Contains exactly one "{}".
};

/// A named word for each class, e.g. {positive: "great", negative: "terrible"}.
struct Variant {
  std::string name;
  std::map<std::string, std::string> words;
};

struct PatternGrid {
  std::vector<Pattern> patterns;
  std::vector<Variant> variants;
};

inline constexpr std::string_view kPlaceholder = "{}";

inline std::size_t count_placeholders(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kPlaceholder); pos != std::string_view::npos;
       pos = text.find(kPlaceholder, pos + kPlaceholder.size()))
    ++n;
  return n;
}

/// Name of the set built from a pattern and a variant.
inline std::string grid_set_name(const std::string& pattern_id, const std::string& variant_name) {
  return pattern_id + "×" + variant_name;
}

/// Cross product of patterns and variants, patterns outer.
inline std::vector<DescriptionSet> expand_patterns(const PatternGrid& grid, const LabelSpace& space) {
  for (const auto& p : grid.patterns)
    if (auto n = count_placeholders(p.text); n != 1) throw BadPattern(p.text, n);

  std::vector<DescriptionSet> out;
  out.reserve(grid.patterns.size() * grid.variants.size());
  for (const auto& p : grid.patterns) {
    const auto at = p.text.find(kPlaceholder);
    for (const auto& v : grid.variants) {
      std::map<std::string, std::string> texts;
      for (const auto& [cls, word] : v.words) {
        std::string t = p.text;
        t.replace(at, kPlaceholder.size(), word);
        texts.emplace(cls, std::move(t));
      }
      out.emplace_back(grid_set_name(p.id, v.name), texts, space);
    }
  }
  return out;
}

}  // namespace labeldesc
