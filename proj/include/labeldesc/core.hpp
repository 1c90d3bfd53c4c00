// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "labeldesc/error.hpp"

namespace labeldesc {

/// Class index into a LabelSpace, or kMissing for an unobserved cell.
using Label = std::int32_t;
inline constexpr Label kMissing = -1;

inline bool is_missing(Label v) noexcept { return v == kMissing; }

/// Ordered set of K >= 2 class identifiers. Index order is insertion order.
class LabelSpace {
 public:
  explicit LabelSpace(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2)
      throw InvalidArgument("label space needs at least two classes, got " +
                            std::to_string(classes_.size()));
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      if (classes_[k].empty()) throw InvalidArgument("empty class identifier");
      if (!index_.emplace(classes_[k], static_cast<Label>(k)).second)
        throw InvalidArgument("duplicate class identifier '" + classes_[k] + "'");
    }
  }

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::string& name(Label k) const { return classes_.at(static_cast<std::size_t>(k)); }

  std::optional<Label> find(const std::string& cls) const {
    auto it = index_.find(cls);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  Label index(const std::string& cls) const {
    auto k = find(cls);
    if (!k) throw InvalidArgument("unknown class '" + cls + "'");
    return *k;
  }

  bool contains(Label k) const noexcept {
    return k >= 0 && static_cast<std::size_t>(k) < classes_.size();
  }

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) {
    return a.classes_ == b.classes_;
  }

 private:
  std::vector<std::string> classes_;
  std::unordered_map<std::string, Label> index_;
};

namespace detail {

inline void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids)
    if (!seen.insert(id).second)
      throw InvalidArgument(std::string("duplicate ") + what + " '" + id + "'");
}

}  // namespace detail

/// Items x annotators table of observed labels. Cells are stored row-major.
///
/// The constructor only enforces the structural shape (cell count, unique
/// ids). Label-range and coverage rules depend on a LabelSpace and are
/// reported by validate_matrix, so a malformed matrix can still be built and
/// inspected.
class PredictionMatrix {
 public:
  PredictionMatrix() = default;

  PredictionMatrix(std::vector<std::string> item_ids, std::vector<std::string> annotator_ids,
                   std::vector<Label> cells)
      : item_ids_(std::move(item_ids)),
        annotator_ids_(std::move(annotator_ids)),
        cells_(std::move(cells)) {
    if (cells_.size() != item_ids_.size() * annotator_ids_.size())
      throw DimensionMismatch(item_ids_.size() * annotator_ids_.size(), cells_.size(),
                              "prediction matrix cells");
    detail::require_unique(item_ids_, "item id");
    detail::require_unique(annotator_ids_, "annotator id");
  }

  std::size_t num_items() const noexcept { return item_ids_.size(); }
  std::size_t num_annotators() const noexcept { return annotator_ids_.size(); }

  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::vector<std::string>& annotator_ids() const noexcept { return annotator_ids_; }
  const std::vector<Label>& cells() const noexcept { return cells_; }

  Label operator()(std::size_t item, std::size_t annotator) const {
    return cells_[item * annotator_ids_.size() + annotator];
  }

  std::span<const Label> row(std::size_t item) const {
    return {cells_.data() + item * annotator_ids_.size(), annotator_ids_.size()};
  }

  std::vector<Label> column(std::size_t annotator) const {
    std::vector<Label> out(num_items());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(i, annotator);
    return out;
  }

  friend bool operator==(const PredictionMatrix&, const PredictionMatrix&) = default;

 private:
  std::vector<std::string> item_ids_;
  std::vector<std::string> annotator_ids_;
  std::vector<Label> cells_;
};

/// Known true labels, aligned by position with a PredictionMatrix's items.
struct GoldLabels {
  std::vector<std::string> item_ids;
  std::vector<Label> labels;

  friend bool operator==(const GoldLabels&, const GoldLabels&) = default;
};

/// Reorders `gold` to follow the item order of `matrix`. Every matrix item
/// must have a gold label; extra gold items are ignored.
inline GoldLabels align_gold(const GoldLabels& gold, const PredictionMatrix& matrix) {
  std::unordered_map<std::string, Label> by_id;
  for (std::size_t i = 0; i < gold.item_ids.size(); ++i) by_id.emplace(gold.item_ids[i], gold.labels[i]);
  GoldLabels out;
  out.item_ids = matrix.item_ids();
  out.labels.reserve(matrix.num_items());
  for (const auto& id : matrix.item_ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("no gold label for item '" + id + "'");
    out.labels.push_back(it->second);
  }
  return out;
}

/// One annotator in description form: a text for every class of a LabelSpace.
class DescriptionSet {
 public:
  DescriptionSet(std::string name, const std::map<std::string, std::string>& by_class,
                 const LabelSpace& space)
      : name_(std::move(name)) {
    if (name_.empty()) throw InvalidArgument("description set needs a name");
    if (by_class.size() != space.size())
      throw InvalidArgument("description set '" + name_ + "' covers " +
                            std::to_string(by_class.size()) + " classes, label space has " +
                            std::to_string(space.size()));
    texts_.resize(space.size());
    for (const auto& [cls, text] : by_class) {
      auto k = space.find(cls);
      if (!k) throw InvalidArgument("description set '" + name_ + "': unknown class '" + cls + "'");
      if (text.empty())
        throw InvalidArgument("description set '" + name_ + "': empty text for '" + cls + "'");
      texts_[static_cast<std::size_t>(*k)] = text;
    }
  }

  const std::string& name() const noexcept { return name_; }
  /// Description texts in class-index order.
  const std::vector<std::string>& texts() const noexcept { return texts_; }
  const std::string& text(Label k) const { return texts_.at(static_cast<std::size_t>(k)); }

  friend bool operator==(const DescriptionSet&, const DescriptionSet&) = default;

 private:
  std::string name_;
  std::vector<std::string> texts_;
};

/// Key under which the embedding of a description is looked up.
inline std::string description_key(const std::string& set_name, const std::string& class_name) {
  return set_name + "/" + class_name;
}

/// Id -> fixed-dimension vector table.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  EmbeddingSet(std::vector<std::string> ids, std::vector<std::vector<double>> vectors) {
    if (ids.size() != vectors.size())
      throw DimensionMismatch(ids.size(), vectors.size(), "embedding ids vs vectors");
    if (!vectors.empty()) dim_ = vectors.front().size();
    for (std::size_t i = 0; i < ids.size(); ++i) add(std::move(ids[i]), vectors[i]);
  }

  void add(std::string id, std::span<const double> vec) {
    if (ids_.empty() && dim_ == 0) dim_ = vec.size();
    if (dim_ == 0) throw InvalidArgument("embedding vectors need at least one dimension");
    if (vec.size() != dim_) throw DimensionMismatch(dim_, vec.size(), "embedding '" + id + "'");
    for (double x : vec)
      if (!std::isfinite(x)) throw InvalidArgument("non-finite value in embedding '" + id + "'");
    if (!index_.emplace(id, ids_.size()).second)
      throw InvalidArgument("duplicate embedding id '" + id + "'");
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), vec.begin(), vec.end());
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::optional<std::span<const double>> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return vector(it->second);
  }

  std::span<const double> at(const std::string& id) const {
    auto v = find(id);
    if (!v) throw MissingEmbedding(id);
    return *v;
  }

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
    return a.ids_ == b.ids_ && a.dim_ == b.dim_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kNoItems,
  kNoAnnotators,
  kLabelOutOfRange,
  kEmptyItem,
  kEmptyAnnotator,
};

struct Violation {
  ViolationKind kind;
  std::optional<std::size_t> item;
  std::optional<std::size_t> annotator;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  explicit operator bool() const noexcept { return ok(); }
};

class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationResult result)
      : Error(summarize(result)), result_(std::move(result)) {}
  const ValidationResult& result() const noexcept { return result_; }

 private:
  static std::string summarize(const ValidationResult& r) {
    std::string s = "invalid prediction matrix (" + std::to_string(r.violations.size()) +
                    " violation" + (r.violations.size() == 1 ? "" : "s") + ")";
    if (!r.violations.empty()) s += ": " + r.violations.front().message;
    return s;
  }
  ValidationResult result_;
};

inline ValidationResult validate_matrix(const PredictionMatrix& m, const LabelSpace& space) {
  ValidationResult out;
  const std::size_t items = m.num_items();
  const std::size_t annotators = m.num_annotators();
  if (items == 0) out.violations.push_back({ViolationKind::kNoItems, {}, {}, "matrix has no items"});
  if (annotators == 0)
    out.violations.push_back({ViolationKind::kNoAnnotators, {}, {}, "matrix has no annotators"});

  std::vector<std::size_t> per_annotator(annotators, 0);
  for (std::size_t i = 0; i < items; ++i) {
    std::size_t observed = 0;
    for (std::size_t j = 0; j < annotators; ++j) {
      const Label v = m(i, j);
      if (is_missing(v)) continue;
      if (!space.contains(v)) {
        out.violations.push_back({ViolationKind::kLabelOutOfRange, i, j,
                                  "label " + std::to_string(v) + " out of range at item '" +
                                      m.item_ids()[i] + "', annotator '" + m.annotator_ids()[j] +
                                      "'"});
      }
      ++observed;
      ++per_annotator[j];
    }
    if (observed == 0 && annotators > 0)
      out.violations.push_back(
          {ViolationKind::kEmptyItem, i, {}, "item '" + m.item_ids()[i] + "' has no observed label"});
  }
  for (std::size_t j = 0; j < annotators; ++j)
    if (per_annotator[j] == 0 && items > 0)
      out.violations.push_back({ViolationKind::kEmptyAnnotator, {}, j,
                                "annotator '" + m.annotator_ids()[j] + "' has no observed label"});
  return out;
}

inline void require_valid(const PredictionMatrix& m, const LabelSpace& space) {
  auto r = validate_matrix(m, space);
  if (!r.ok()) throw ValidationError(std::move(r));
}

inline void require_valid(const GoldLabels& gold, const LabelSpace& space) {
  if (gold.item_ids.size() != gold.labels.size())
    throw DimensionMismatch(gold.item_ids.size(), gold.labels.size(), "gold ids vs labels");
  for (std::size_t i = 0; i < gold.labels.size(); ++i)
    if (!space.contains(gold.labels[i]))
      throw InvalidArgument("gold label out of range for item '" + gold.item_ids[i] + "'");
}

}  // namespace labeldesc
