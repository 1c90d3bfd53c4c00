// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labeldesc {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got, const std::string& what = "")
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got) + (what.empty() ? "" : " (" + what + ")")),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("cosine similarity of a zero-norm vector") {}
};

class InvalidScore : public Error {
 public:
  explicit InvalidScore(std::size_t index)
      : Error("non-finite similarity score at class " + std::to_string(index)), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class MissingEmbedding : public Error {
 public:
  explicit MissingEmbedding(std::string key)
      : Error("no embedding for key '" + key + "'"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class BadPattern : public Error {
 public:
  BadPattern(const std::string& pattern, std::size_t placeholders)
      : Error("pattern '" + pattern + "' has " + std::to_string(placeholders) +
              " placeholders, expected exactly one") {}
};

class NoOverlap : public Error {
 public:
  NoOverlap() : Error("label columns share no observed item") {}
};

class NeedTwoAnnotators : public Error {
 public:
  NeedTwoAnnotators() : Error("agreement scores need at least two annotators") {}
};

class InvalidParameters : public Error {
 public:
  using Error::Error;
};

/// Raised by the readers. `row` and `column` are 1-based data coordinates
/// (the header line is row 0); zero means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t row, std::size_t column,
             const std::string& message)
      : Error(source + ": row " + std::to_string(row) +
              (column ? ", column " + std::to_string(column) : std::string()) + ": " + message),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class EmbeddingServiceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace labeldesc
