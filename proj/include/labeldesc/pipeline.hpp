// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "labeldesc/config.hpp"
#include "labeldesc/core.hpp"
#include "labeldesc/embed_client.hpp"
#include "labeldesc/io.hpp"
#include "labeldesc/mace.hpp"
#include "labeldesc/metrics.hpp"
#include "labeldesc/version.hpp"
#include "labeldesc/zeroshot.hpp"

namespace labeldesc {

inline constexpr const char* kPartialSuffix = ".partial";

/// Output files are written under "<name>.partial" and renamed only once
/// every file of the run is complete. On failure the ".partial" files stay
/// behind for inspection and no un-suffixed output exists.
class StagedOutputs {
 public:
  explicit StagedOutputs(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  /// Reserves `name` and returns the path to write it to. Any stale copy of
  /// the final file is removed immediately.
  std::filesystem::path stage(const std::string& name) {
    auto final_path = dir_ / name;
    std::filesystem::remove(final_path);
    auto partial = final_path;
    partial += kPartialSuffix;
    staged_.emplace_back(final_path, partial);
    return partial;
  }

  void commit() {
    for (const auto& [final_path, partial] : staged_) std::filesystem::rename(partial, final_path);
    staged_.clear();
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
};

/// item_id,text CSV for the embedding-service route.
inline std::vector<std::pair<std::string, std::string>> read_item_texts(const std::filesystem::path& path) {
  auto in = open_input(path);
  DelimitedReader reader(in, ',', path.string());
  auto header = reader.next();
  if (!header || *header != std::vector<std::string>{"item_id", "text"})
    throw ParseError(path.string(), 0, 0, "header must be item_id,text");
  std::vector<std::pair<std::string, std::string>> out;
  while (auto rec = reader.next()) {
    if (rec->size() != 2) throw ParseError(path.string(), reader.row(), 0, "expected 2 fields");
    out.emplace_back((*rec)[0], (*rec)[1]);
  }
  return out;
}

/// Zero-shot stage: embeddings + description sets -> prediction matrix.
inline ZeroShotResult zero_shot_predictions(const ExperimentConfig& config) {
  const auto space = config.space();
  const auto sets = config.description_set_list();

  std::optional<EmbeddingClient> client;
  if (!config.embedding_service.empty()) client.emplace(config.embedding_service, config.embedding_cache);

  EmbeddingSet items;
  if (!config.item_embeddings.empty()) {
    items = read_embeddings(config.item_embeddings);
  } else {
    const auto rows = read_item_texts(config.item_texts);
    std::vector<std::string> texts;
    for (const auto& r : rows) texts.push_back(r.second);
    const auto by_text = client->fetch(texts);
    for (const auto& [id, text] : rows) items.add(id, by_text.at(text));
  }

  const EmbeddingSet descriptions = !config.description_embeddings.empty()
                                        ? read_embeddings(config.description_embeddings)
                                        : embed_descriptions(*client, sets, space);
  return predict_matrix(items, sets, descriptions, space, config.temperature);
}

struct PipelineResult {
  PredictionMatrix matrix;
  MaceModel model;
  AggregatedLabels aggregated;
  RankingReport ranking;
  std::optional<AggregationScores> scores;
  nlohmann::json report;
};

namespace detail {

inline nlohmann::json to_json(const Correlation& c) { return {{"value", c.value}, {"degenerate", c.degenerate}}; }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Report body. Everything except "created_at" is a function of the inputs.
inline nlohmann::json make_report(const ExperimentConfig& config, const PredictionMatrix& m, const MaceModel& model,
                                  const RankingReport& ranking, const std::optional<AggregationScores>& scores) {
  nlohmann::json r;
  r["tool"] = "labeldesc";
  r["version"] = kVersion;
  r["created_at"] = detail::utc_timestamp();
  r["config"] = to_json(config);
  r["num_items"] = m.num_items();
  r["num_annotators"] = m.num_annotators();
  r["method"] = to_string(config.method);

  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < config.em.restarts; ++k) seeds.push_back(restart_seed(config.em, k));
  r["seeds"] = {{"master", config.em.seed}, {"restarts", seeds}};
  r["mace"] = {{"log_likelihood", model.log_likelihood},
               {"restart_index", model.restart_index},
               {"restart_seed", model.restart_seed},
               {"iterations", model.iterations},
               {"converged", model.converged},
               {"restart_log_likelihoods", model.restart_log_likelihoods},
               {"theta", nlohmann::json::object()},
               {"xi", nlohmann::json::object()},
               {"mean_non_spam", nlohmann::json::object()}};
  for (std::size_t j = 0; j < m.num_annotators(); ++j) {
    const auto& id = m.annotator_ids()[j];
    r["mace"]["theta"][id] = model.theta[j];
    const auto xi = model.xi.row(j);
    r["mace"]["xi"][id] = std::vector<double>(xi.begin(), xi.end());
    r["mace"]["mean_non_spam"][id] = model.mean_non_spam[j];
  }

  if (ranking.summary) {
    r["correlations"] = {{"rho_theta_f1", detail::to_json(ranking.summary->rho_theta_f1)},
                         {"rho_kappa_f1", detail::to_json(ranking.summary->rho_kappa_f1)},
                         {"rho_theta_accuracy", detail::to_json(ranking.summary->rho_theta_accuracy)}};
  }
  if (scores) {
    r["aggregation"] = {{"mace", {{"macro_f1", scores->mace_macro_f1}, {"accuracy", scores->mace_accuracy}}},
                        {"majority",
                         {{"macro_f1", scores->majority_macro_f1}, {"accuracy", scores->majority_accuracy}}}};
  }
  return r;
}

/// Full run: predictions -> MACE fit -> aggregation -> ranking -> report,
/// written to config.output_dir as predictions.csv, aggregated.csv,
/// ranking.tsv and report.json.
inline PipelineResult run_pipeline(const ExperimentConfig& config) {
  config.validate();
  const auto space = config.space();
  StagedOutputs out(config.output_dir);
  const auto predictions_path = out.stage("predictions.csv");
  const auto aggregated_path = out.stage("aggregated.csv");
  const auto ranking_path = out.stage("ranking.tsv");
  const auto report_path = out.stage("report.json");

  PipelineResult result;
  result.matrix = config.uses_zero_shot() ? zero_shot_predictions(config).matrix
                                          : read_predictions(config.predictions, space);
  require_valid(result.matrix, space);
  write_predictions(predictions_path, result.matrix, space);

  std::optional<GoldLabels> gold;
  if (!config.gold.empty()) gold = read_gold(config.gold, space);

  // theta drives the ranking for either aggregator, so MACE is always fit.
  result.model = fit_em(result.matrix, space, config.em);
  result.aggregated.item_ids = result.matrix.item_ids();
  result.aggregated.decoded = config.method == Aggregation::kMace ? decode(result.model)
                                                                   : majority_vote(result.matrix, space.size());
  write_aggregated(aggregated_path, result.aggregated, space);

  result.ranking = ranking_report(result.matrix, result.model, gold, space);
  write_ranking(ranking_path, result.ranking);

  if (gold) result.scores = aggregation_scores(result.matrix, result.model, *gold, space);
  result.report = make_report(config, result.matrix, result.model, result.ranking, result.scores);
  {
    auto f = open_output(report_path);
    f << result.report.dump(2) << '\n';
  }

  out.commit();
  return result;
}

}  // namespace labeldesc
