// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

// Client for a sentence-embedding service.
//
//   POST <endpoint>/embed   {"texts": ["...", ...]}
//   200                     {"vectors": [[...], ...]}   (request order)
//
// Vectors are cached in a JSONL embeddings file keyed by the SHA-256 of the
// text, so a repeated run needs no service at all.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <openssl/sha.h>

#include "labeldesc/core.hpp"
#include "labeldesc/io.hpp"

namespace labeldesc {

inline std::string sha256_hex(std::string_view text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xF]);
  }
  return out;
}

class EmbeddingClient {
 public:
  /// `endpoint` is a base URL such as "http://localhost:8080" or
  /// "http://host:8080/v1". An empty `cache_file` disables caching.
  explicit EmbeddingClient(std::string endpoint, std::filesystem::path cache_file = {},
                           std::chrono::seconds timeout = std::chrono::seconds(60))
      : endpoint_(std::move(endpoint)), cache_file_(std::move(cache_file)), timeout_(timeout) {
    if (!cache_file_.empty() && std::filesystem::exists(cache_file_)) cache_ = read_embeddings(cache_file_);
  }

  /// Embeddings of `texts`, keyed by the text itself. Repeated texts appear
  /// once, in first-occurrence order.
  EmbeddingSet fetch(std::span<const std::string> texts) {
    std::vector<std::string> unique;
    std::unordered_set<std::string> seen;
    for (const auto& t : texts)
      if (seen.insert(t).second) unique.push_back(t);

    std::vector<std::string> pending;
    for (const auto& t : unique)
      if (!cache_.find(sha256_hex(t))) pending.push_back(t);

    if (!pending.empty()) {
      const auto vectors = request(pending);
      std::ofstream append;
      if (!cache_file_.empty()) {
        if (cache_file_.has_parent_path()) std::filesystem::create_directories(cache_file_.parent_path());
        append.open(cache_file_, std::ios::binary | std::ios::app);
        if (!append) throw EmbeddingServiceError("cannot write embedding cache '" + cache_file_.string() + "'");
      }
      for (std::size_t t = 0; t < pending.size(); ++t) {
        const auto key = sha256_hex(pending[t]);
        if (!cache_.empty() && vectors[t].size() != cache_.dim())
          throw EmbeddingServiceError("service changed embedding dimension: cached " +
                                      std::to_string(cache_.dim()) + ", got " + std::to_string(vectors[t].size()));
        cache_.add(key, vectors[t]);
        if (append.is_open()) write_embedding_record(append, key, vectors[t]);
      }
    }

    EmbeddingSet out;
    for (const auto& t : unique) out.add(t, cache_.at(sha256_hex(t)));
    return out;
  }

  std::size_t requests_sent() const noexcept { return requests_; }

 private:
  std::vector<std::vector<double>> request(const std::vector<std::string>& texts) {
    const auto scheme_end = endpoint_.find("://");
    const auto path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string host = endpoint_.substr(0, path_start);
    std::string base = path_start == std::string::npos ? std::string() : endpoint_.substr(path_start);
    while (!base.empty() && base.back() == '/') base.pop_back();

    httplib::Client client(host);
    if (!client.is_valid()) throw EmbeddingServiceError("unsupported embedding endpoint '" + endpoint_ + "'");
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);

    const nlohmann::json body = {{"texts", texts}};
    ++requests_;
    auto res = client.Post(base + "/embed", body.dump(), "application/json");
    if (!res) throw EmbeddingServiceError("embedding request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw EmbeddingServiceError("embedding service returned HTTP " + std::to_string(res->status));

    std::vector<std::vector<double>> vectors;
    try {
      const auto reply = nlohmann::json::parse(res->body);
      vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw EmbeddingServiceError(std::string("malformed embedding response: ") + e.what());
    }
    if (vectors.size() != texts.size())
      throw EmbeddingServiceError("embedding service returned " + std::to_string(vectors.size()) +
                                  " vectors for " + std::to_string(texts.size()) + " texts");
    for (const auto& v : vectors) {
      if (v.empty() || v.size() != vectors.front().size())
        throw EmbeddingServiceError("embedding service returned ragged vectors");
      for (double x : v)
        if (!std::isfinite(x)) throw EmbeddingServiceError("embedding service returned a non-finite value");
    }
    return vectors;
  }

  std::string endpoint_;
  std::filesystem::path cache_file_;
  std::chrono::seconds timeout_;
  EmbeddingSet cache_;
  std::size_t requests_ = 0;
};

/// One-shot fetch through a fresh client.
inline EmbeddingSet fetch_embeddings(const std::string& endpoint, std::span<const std::string> texts,
                                     const std::filesystem::path& cache_file = {}) {
  if (texts.empty()) return {};
  EmbeddingClient client(endpoint, cache_file);
  return client.fetch(texts);
}

/// Embeds every description text and re-keys the vectors by
/// description_key(set, class), the layout predict_matrix expects.
inline EmbeddingSet embed_descriptions(EmbeddingClient& client, std::span<const DescriptionSet> sets,
                                       const LabelSpace& space) {
  std::vector<std::string> texts;
  for (const auto& s : sets) texts.insert(texts.end(), s.texts().begin(), s.texts().end());
  const auto by_text = client.fetch(texts);
  EmbeddingSet out;
  for (const auto& s : sets)
    for (std::size_t k = 0; k < space.size(); ++k)
      out.add(description_key(s.name(), space.classes()[k]), by_text.at(s.texts()[k]));
  return out;
}

}  // namespace labeldesc
