// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

// Readers and writers for the on-disk formats:
//
//   predictions CSV   item_id,<annotator>...   cells are class names, empty = missing
//   gold CSV          item_id,label
//   aggregated CSV    item_id,label,confidence
//   ranking TSV       annotator_id theta kappa_mean [macro_f1]
//   embeddings JSONL  {"id": "...", "vector": [...]} per line
//
// Numbers are written in the shortest form that parses back to the same
// double, so every writer/reader pair round-trips exactly.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "labeldesc/core.hpp"
#include "labeldesc/mace.hpp"
#include "labeldesc/metrics.hpp"

namespace labeldesc {

// ---------------------------------------------------------------------------
// Plumbing

inline std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error("cannot format number");
  return {buf, end};
}

inline std::optional<double> parse_double(std::string_view s) {
  double x = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return x;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

/// Delimited text with RFC 4180 quoting. Row numbers in records are the
/// 0-based record index, so the header is row 0 and data starts at row 1.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char delimiter, std::string source)
      : in_(in), delim_(delimiter), source_(std::move(source)) {
    if (in_.peek() == 0xEF) {
      char bom[3];
      in_.read(bom, 3);
      if (std::string_view(bom, 3) != "\xEF\xBB\xBF") throw ParseError(source_, 0, 0, "bad byte order mark");
    }
  }

  /// Next record, or nullopt at end of input. Blank lines are skipped.
  std::optional<std::vector<std::string>> next() {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false, any = false, was_quoted = false;
    int c;
    while ((c = in_.get()) != EOF) {
      any = true;
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"') {
        if (!field.empty() || was_quoted) throw ParseError(source_, row_, fields.size() + 1, "stray quote");
        quoted = was_quoted = true;
      } else if (ch == delim_) {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (ch == '\n') {
        if (fields.empty() && field.empty() && !was_quoted) {
          any = false;
          continue;
        }
        break;
      } else if (ch == '\r') {
        if (in_.peek() != '\n') field.push_back(ch);
      } else {
        if (was_quoted) throw ParseError(source_, row_, fields.size() + 1, "text after closing quote");
        field.push_back(ch);
      }
    }
    if (quoted) throw ParseError(source_, row_, fields.size() + 1, "unterminated quoted field");
    if (!any) return std::nullopt;
    fields.push_back(std::move(field));
    ++row_;
    return fields;
  }

  /// Row number of the record last returned.
  std::size_t row() const noexcept { return row_ - 1; }
  const std::string& source() const noexcept { return source_; }

 private:
  std::istream& in_;
  char delim_;
  std::string source_;
  std::size_t row_ = 0;
};

inline void write_field(std::ostream& out, std::string_view field, char delimiter) {
  const bool quote = field.find_first_of(std::string{delimiter} + "\"\r\n") != std::string_view::npos;
  if (!quote) {
    out << field;
    return;
  }
  out << '"';
  for (char ch : field) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

inline void write_record(std::ostream& out, const std::vector<std::string>& fields, char delimiter) {
  for (std::size_t f = 0; f < fields.size(); ++f) {
    if (f) out << delimiter;
    write_field(out, fields[f], delimiter);
  }
  out << '\n';
}

namespace detail {

inline std::vector<std::string> read_header(DelimitedReader& reader, std::string_view first) {
  auto header = reader.next();
  if (!header) throw ParseError(reader.source(), 0, 0, "empty file");
  if ((*header)[0] != first)
    throw ParseError(reader.source(), 0, 1, "header must start with '" + std::string(first) + "'");
  return *header;
}

inline void check_width(const DelimitedReader& reader, const std::vector<std::string>& rec, std::size_t width) {
  if (rec.size() != width)
    throw ParseError(reader.source(), reader.row(), 0,
                     "expected " + std::to_string(width) + " fields, found " + std::to_string(rec.size()));
}

inline Label resolve_label(const DelimitedReader& reader, const std::string& text, const LabelSpace& space,
                           std::size_t column) {
  auto k = space.find(text);
  if (!k) throw ParseError(reader.source(), reader.row(), column, "unknown class '" + text + "'");
  return *k;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Predictions

inline PredictionMatrix read_predictions(std::istream& in, const LabelSpace& space,
                                         const std::string& source = "predictions") {
  DelimitedReader reader(in, ',', source);
  auto header = detail::read_header(reader, "item_id");
  std::vector<std::string> annotators(header.begin() + 1, header.end());
  if (annotators.empty()) throw ParseError(source, 0, 0, "no annotator columns");
  {
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < annotators.size(); ++j)
      if (!seen.insert(annotators[j]).second)
        throw ParseError(source, 0, j + 2, "duplicate annotator id '" + annotators[j] + "'");
  }

  std::vector<std::string> items;
  std::vector<Label> cells;
  std::unordered_set<std::string> seen_items;
  while (auto rec = reader.next()) {
    detail::check_width(reader, *rec, header.size());
    if (!seen_items.insert((*rec)[0]).second)
      throw ParseError(source, reader.row(), 1, "duplicate item id '" + (*rec)[0] + "'");
    items.push_back((*rec)[0]);
    for (std::size_t j = 1; j < rec->size(); ++j) {
      const auto& text = (*rec)[j];
      cells.push_back(text.empty() ? kMissing : detail::resolve_label(reader, text, space, j + 1));
    }
  }
  return PredictionMatrix(std::move(items), std::move(annotators), std::move(cells));
}

inline PredictionMatrix read_predictions(const std::filesystem::path& path, const LabelSpace& space) {
  auto in = open_input(path);
  return read_predictions(in, space, path.string());
}

inline void write_predictions(std::ostream& out, const PredictionMatrix& m, const LabelSpace& space) {
  std::vector<std::string> rec{"item_id"};
  rec.insert(rec.end(), m.annotator_ids().begin(), m.annotator_ids().end());
  write_record(out, rec, ',');
  for (std::size_t i = 0; i < m.num_items(); ++i) {
    rec.assign(1, m.item_ids()[i]);
    for (Label y : m.row(i)) rec.push_back(is_missing(y) ? std::string() : space.name(y));
    write_record(out, rec, ',');
  }
}

inline void write_predictions(const std::filesystem::path& path, const PredictionMatrix& m,
                              const LabelSpace& space) {
  auto out = open_output(path);
  write_predictions(out, m, space);
}

// ---------------------------------------------------------------------------
// Gold labels

inline GoldLabels read_gold(std::istream& in, const LabelSpace& space, const std::string& source = "gold") {
  DelimitedReader reader(in, ',', source);
  auto header = detail::read_header(reader, "item_id");
  if (header.size() != 2) throw ParseError(source, 0, 0, "gold header must be item_id,label");
  GoldLabels gold;
  std::unordered_set<std::string> seen;
  while (auto rec = reader.next()) {
    detail::check_width(reader, *rec, 2);
    if (!seen.insert((*rec)[0]).second)
      throw ParseError(source, reader.row(), 1, "duplicate item id '" + (*rec)[0] + "'");
    gold.item_ids.push_back((*rec)[0]);
    gold.labels.push_back(detail::resolve_label(reader, (*rec)[1], space, 2));
  }
  return gold;
}

inline GoldLabels read_gold(const std::filesystem::path& path, const LabelSpace& space) {
  auto in = open_input(path);
  return read_gold(in, space, path.string());
}

inline void write_gold(std::ostream& out, const GoldLabels& gold, const LabelSpace& space) {
  write_record(out, {"item_id", "label"}, ',');
  for (std::size_t i = 0; i < gold.labels.size(); ++i)
    write_record(out, {gold.item_ids[i], space.name(gold.labels[i])}, ',');
}

inline void write_gold(const std::filesystem::path& path, const GoldLabels& gold, const LabelSpace& space) {
  auto out = open_output(path);
  write_gold(out, gold, space);
}

// ---------------------------------------------------------------------------
// Aggregated labels

struct AggregatedLabels {
  std::vector<std::string> item_ids;
  Decoded decoded;

  friend bool operator==(const AggregatedLabels& a, const AggregatedLabels& b) {
    return a.item_ids == b.item_ids && a.decoded.labels == b.decoded.labels &&
           a.decoded.confidence == b.decoded.confidence;
  }
};

inline void write_aggregated(std::ostream& out, const AggregatedLabels& agg, const LabelSpace& space) {
  write_record(out, {"item_id", "label", "confidence"}, ',');
  for (std::size_t i = 0; i < agg.item_ids.size(); ++i)
    write_record(out,
                 {agg.item_ids[i], space.name(agg.decoded.labels[i]), format_double(agg.decoded.confidence[i])},
                 ',');
}

inline void write_aggregated(const std::filesystem::path& path, const AggregatedLabels& agg,
                             const LabelSpace& space) {
  auto out = open_output(path);
  write_aggregated(out, agg, space);
}

inline AggregatedLabels read_aggregated(std::istream& in, const LabelSpace& space,
                                        const std::string& source = "aggregated") {
  DelimitedReader reader(in, ',', source);
  auto header = detail::read_header(reader, "item_id");
  if (header != std::vector<std::string>{"item_id", "label", "confidence"})
    throw ParseError(source, 0, 0, "header must be item_id,label,confidence");
  AggregatedLabels agg;
  while (auto rec = reader.next()) {
    detail::check_width(reader, *rec, 3);
    agg.item_ids.push_back((*rec)[0]);
    agg.decoded.labels.push_back(detail::resolve_label(reader, (*rec)[1], space, 2));
    auto conf = parse_double((*rec)[2]);
    if (!conf) throw ParseError(source, reader.row(), 3, "bad confidence '" + (*rec)[2] + "'");
    agg.decoded.confidence.push_back(*conf);
  }
  return agg;
}

inline AggregatedLabels read_aggregated(const std::filesystem::path& path, const LabelSpace& space) {
  auto in = open_input(path);
  return read_aggregated(in, space, path.string());
}

// ---------------------------------------------------------------------------
// Ranking table

inline void write_ranking(std::ostream& out, const RankingReport& report) {
  std::vector<std::string> header{"annotator_id", "theta", "kappa_mean"};
  if (report.has_gold()) header.push_back("macro_f1");
  write_record(out, header, '\t');
  for (const auto& row : report.rows) {
    std::vector<std::string> rec{row.annotator_id, format_double(row.theta), format_double(row.kappa_mean)};
    if (report.has_gold()) rec.push_back(format_double(row.macro_f1.value_or(0.0)));
    write_record(out, rec, '\t');
  }
}

inline void write_ranking(const std::filesystem::path& path, const RankingReport& report) {
  auto out = open_output(path);
  write_ranking(out, report);
}

/// Reads the rows of a ranking table. Accuracy and the summary are not part
/// of the file and come back empty.
inline std::vector<RankingRow> read_ranking(std::istream& in, const std::string& source = "ranking") {
  DelimitedReader reader(in, '\t', source);
  auto header = detail::read_header(reader, "annotator_id");
  const bool with_f1 = header.size() == 4;
  if (header.size() < 3 || header.size() > 4 || header[1] != "theta" || header[2] != "kappa_mean" ||
      (with_f1 && header[3] != "macro_f1"))
    throw ParseError(source, 0, 0, "header must be annotator_id, theta, kappa_mean[, macro_f1]");
  std::vector<RankingRow> rows;
  while (auto rec = reader.next()) {
    detail::check_width(reader, *rec, header.size());
    auto number = [&](std::size_t f) {
      auto x = parse_double((*rec)[f]);
      if (!x) throw ParseError(source, reader.row(), f + 1, "bad number '" + (*rec)[f] + "'");
      return *x;
    };
    RankingRow row{(*rec)[0], number(1), number(2), {}, {}};
    if (with_f1) row.macro_f1 = number(3);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<RankingRow> read_ranking(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_ranking(in, path.string());
}

// ---------------------------------------------------------------------------
// Embeddings

inline EmbeddingSet read_embeddings(std::istream& in, const std::string& source = "embeddings") {
  EmbeddingSet set;
  std::string line;
  std::size_t row = 0;
  std::vector<double> vec;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, row, 0, e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() || !rec.contains("vector") ||
        !rec["vector"].is_array())
      throw ParseError(source, row, 0, "expected {\"id\": string, \"vector\": [numbers]}");
    vec.clear();
    for (const auto& x : rec["vector"]) {
      if (!x.is_number()) throw ParseError(source, row, 0, "vector entries must be numbers");
      vec.push_back(x.get<double>());
    }
    auto id = rec["id"].get<std::string>();
    if (set.find(id)) throw ParseError(source, row, 0, "duplicate id '" + id + "'");
    if (!set.empty() && vec.size() != set.dim())
      throw DimensionMismatch(set.dim(), vec.size(), source + " row " + std::to_string(row));
    try {
      set.add(std::move(id), vec);
    } catch (const InvalidArgument& e) {
      throw ParseError(source, row, 0, e.what());
    }
  }
  return set;
}

inline EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_embeddings(in, path.string());
}

inline void write_embedding_record(std::ostream& out, const std::string& id, std::span<const double> vec) {
  nlohmann::json rec;
  rec["id"] = id;
  rec["vector"] = std::vector<double>(vec.begin(), vec.end());
  out << rec.dump() << '\n';
}

inline void write_embeddings(std::ostream& out, const EmbeddingSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i) write_embedding_record(out, set.ids()[i], set.vector(i));
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  auto out = open_output(path);
  write_embeddings(out, set);
}

}  // namespace labeldesc
