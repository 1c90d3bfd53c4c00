// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "labeldesc/core.hpp"
#include "labeldesc/io.hpp"
#include "labeldesc/mace.hpp"
#include "labeldesc/zeroshot.hpp"

namespace labeldesc {

enum class Aggregation { kMace, kMajority };

inline std::string to_string(Aggregation a) { return a == Aggregation::kMace ? "mace" : "majority"; }

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "mace") return Aggregation::kMace;
  if (s == "majority") return Aggregation::kMajority;
  throw ConfigError("method must be 'mace' or 'majority', got '" + s + "'");
}

struct DescriptionSetSpec {
  std::string name;
  std::map<std::string, std::string> descriptions;
};

/// Everything a pipeline run needs. Relative paths in a config file are
/// resolved against the file's directory.
///
/// Predictions come from exactly one route:
///   - `predictions`: an existing predictions CSV, or
///   - zero-shot: item vectors (`item_embeddings`, or `item_texts` plus an
///     embedding service) and description vectors (`description_embeddings`
///     or the service) for the explicit and pattern-expanded sets.
struct ExperimentConfig {
  std::vector<std::string> labels;
  std::vector<DescriptionSetSpec> description_sets;
  std::optional<PatternGrid> pattern_grid;

  std::filesystem::path predictions;
  std::filesystem::path item_embeddings;
  std::filesystem::path description_embeddings;
  std::filesystem::path item_texts;  ///< CSV item_id,text
  std::string embedding_service;
  std::filesystem::path embedding_cache;
  std::filesystem::path gold;

  Aggregation method = Aggregation::kMace;
  EmConfig em;
  double temperature = 1.0;
  std::filesystem::path output_dir = "out";

  LabelSpace space() const { return LabelSpace(labels); }

  bool uses_zero_shot() const { return predictions.empty(); }

  /// All description sets, explicit ones first, then the pattern grid.
  std::vector<DescriptionSet> description_set_list() const {
    const auto sp = space();
    std::vector<DescriptionSet> out;
    for (const auto& s : description_sets) out.emplace_back(s.name, s.descriptions, sp);
    if (pattern_grid) {
      auto expanded = expand_patterns(*pattern_grid, sp);
      out.insert(out.end(), std::make_move_iterator(expanded.begin()), std::make_move_iterator(expanded.end()));
    }
    return out;
  }

  void validate() const {
    try {
      (void)space();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("labels: ") + e.what());
    }
    em.validate();
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (output_dir.empty()) throw ConfigError("output directory is required");

    if (uses_zero_shot()) {
      if (description_sets.empty() && !pattern_grid)
        throw ConfigError("need description_sets or a pattern_grid when no predictions file is given");
      if (item_embeddings.empty() && (item_texts.empty() || embedding_service.empty()))
        throw ConfigError("need item_embeddings, or item_texts with an embedding_service");
      if (description_embeddings.empty() && embedding_service.empty())
        throw ConfigError("need description_embeddings or an embedding_service");
      try {
        auto sets = description_set_list();
        std::set<std::string> names;
        for (const auto& s : sets)
          if (!names.insert(s.name()).second) throw ConfigError("duplicate description set '" + s.name() + "'");
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      } catch (const BadPattern& e) {
        throw ConfigError(e.what());
      }
    }

    std::set<std::filesystem::path> seen;
    for (const auto* p : {&predictions, &item_embeddings, &description_embeddings, &item_texts, &embedding_cache,
                          &gold, &output_dir}) {
      if (p->empty()) continue;
      if (!seen.insert(p->lexically_normal()).second)
        throw ConfigError("path '" + p->string() + "' is referenced twice");
    }
  }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline EmConfig em_config_from_json(const nlohmann::json& j) {
  EmConfig em;
  detail::read_opt(j, "restarts", em.restarts);
  detail::read_opt(j, "max_iterations", em.max_iterations);
  detail::read_opt(j, "rel_tolerance", em.rel_tolerance);
  detail::read_opt(j, "theta_smoothing", em.theta_smoothing);
  detail::read_opt(j, "xi_smoothing", em.xi_smoothing);
  detail::read_opt(j, "seed", em.seed);
  detail::read_opt(j, "theta_init_low", em.theta_init_low);
  detail::read_opt(j, "theta_init_high", em.theta_init_high);
  detail::read_opt(j, "uniform_xi_init", em.uniform_xi_init);
  detail::read_opt(j, "threads", em.threads);
  return em;
}

inline nlohmann::json to_json(const EmConfig& em) {
  return {{"restarts", em.restarts},
          {"max_iterations", em.max_iterations},
          {"rel_tolerance", em.rel_tolerance},
          {"theta_smoothing", em.theta_smoothing},
          {"xi_smoothing", em.xi_smoothing},
          {"seed", em.seed},
          {"theta_init_low", em.theta_init_low},
          {"theta_init_high", em.theta_init_high},
          {"uniform_xi_init", em.uniform_xi_init},
          {"threads", em.threads}};
}

/// Parses a config object; `base_dir` anchors relative paths.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  try {
    c.labels = j.at("labels").get<std::vector<std::string>>();
    if (j.contains("description_sets"))
      for (const auto& s : j.at("description_sets"))
        c.description_sets.push_back(
            {s.at("name").get<std::string>(), s.at("descriptions").get<std::map<std::string, std::string>>()});
    if (j.contains("pattern_grid")) {
      const auto& g = j.at("pattern_grid");
      PatternGrid grid;
      std::size_t index = 0;
      for (const auto& p : g.at("patterns")) {
        if (p.is_string())
          grid.patterns.push_back({"p" + std::to_string(index), p.get<std::string>()});
        else
          grid.patterns.push_back({p.at("id").get<std::string>(), p.at("text").get<std::string>()});
        ++index;
      }
      for (const auto& v : g.at("variants"))
        grid.variants.push_back(
            {v.at("name").get<std::string>(), v.at("words").get<std::map<std::string, std::string>>()});
      c.pattern_grid = std::move(grid);
    }
    auto path = [&](const char* key) {
      return j.contains(key) ? detail::resolve(base_dir, j.at(key).get<std::string>()) : std::filesystem::path();
    };
    c.predictions = path("predictions");
    c.item_embeddings = path("item_embeddings");
    c.description_embeddings = path("description_embeddings");
    c.item_texts = path("item_texts");
    c.embedding_cache = path("embedding_cache");
    c.gold = path("gold");
    if (j.contains("output_dir")) c.output_dir = path("output_dir");
    detail::read_opt(j, "embedding_service", c.embedding_service);
    if (j.contains("method")) c.method = parse_aggregation(j.at("method").get<std::string>());
    if (j.contains("em")) c.em = em_config_from_json(j.at("em"));
    detail::read_opt(j, "temperature", c.temperature);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig read_config(const std::filesystem::path& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["labels"] = c.labels;
  if (!c.description_sets.empty()) {
    auto& sets = j["description_sets"] = nlohmann::json::array();
    for (const auto& s : c.description_sets) sets.push_back({{"name", s.name}, {"descriptions", s.descriptions}});
  }
  if (c.pattern_grid) {
    nlohmann::json grid;
    grid["patterns"] = nlohmann::json::array();
    for (const auto& p : c.pattern_grid->patterns) grid["patterns"].push_back({{"id", p.id}, {"text", p.text}});
    grid["variants"] = nlohmann::json::array();
    for (const auto& v : c.pattern_grid->variants) grid["variants"].push_back({{"name", v.name}, {"words", v.words}});
    j["pattern_grid"] = std::move(grid);
  }
  auto put = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) j[key] = p.generic_string();
  };
  put("predictions", c.predictions);
  put("item_embeddings", c.item_embeddings);
  put("description_embeddings", c.description_embeddings);
  put("item_texts", c.item_texts);
  put("embedding_cache", c.embedding_cache);
  put("gold", c.gold);
  put("output_dir", c.output_dir);
  if (!c.embedding_service.empty()) j["embedding_service"] = c.embedding_service;
  j["method"] = to_string(c.method);
  j["em"] = to_json(c.em);
  j["temperature"] = c.temperature;
  return j;
}

}  // namespace labeldesc
