// Apache License, Version 2.0, refer to LICENSE.txt

// labeldesc: zero-shot predictions from label descriptions, and unsupervised
// ranking and aggregation of the descriptions with MACE.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "labeldesc/labeldesc.hpp"

namespace fs = std::filesystem;
using namespace labeldesc;

namespace {

// Flags shared by every subcommand that fits or aggregates. Only flags the
// user actually passed override a config file.
struct SharedFlags {
  std::uint64_t seed = 0;
  int restarts = 10;
  int max_iter = 100;
  double tol = 1e-6;
  double theta_smoothing = 0.5;
  double xi_smoothing = 0.1;
  double temperature = 1.0;
  std::string method = "mace";
  std::string gold;
  std::string out = "out";
  unsigned threads = 1;

  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    opts = {
        app->add_option("--seed", seed, "Master seed for EM restarts"),
        app->add_option("--restarts", restarts, "EM restarts")->check(CLI::PositiveNumber),
        app->add_option("--max-iter", max_iter, "EM iterations per restart")->check(CLI::PositiveNumber),
        app->add_option("--tol", tol, "Relative log-likelihood tolerance")->check(CLI::PositiveNumber),
        app->add_option("--theta-smoothing", theta_smoothing, "Smoothing added to theta counts"),
        app->add_option("--xi-smoothing", xi_smoothing, "Smoothing added to spam-distribution counts"),
        app->add_option("--temperature", temperature, "Softmax temperature")->check(CLI::PositiveNumber),
        app->add_option("--method", method, "Aggregator")->check(CLI::IsMember({"mace", "majority"})),
        app->add_option("--gold", gold, "Gold labels CSV (item_id,label)"),
        app->add_option("--out", out, "Output directory"),
        app->add_option("--threads", threads, "Worker threads for EM restarts"),
    };
  }

  bool given(const char* name) const {
    for (auto* o : opts)
      if (o->check_lname(std::string(name).substr(2)) && o->count() > 0) return true;
    return false;
  }

  EmConfig em(EmConfig base = {}) const {
    if (given("--seed")) base.seed = seed;
    if (given("--restarts")) base.restarts = restarts;
    if (given("--max-iter")) base.max_iterations = max_iter;
    if (given("--tol")) base.rel_tolerance = tol;
    if (given("--theta-smoothing")) base.theta_smoothing = theta_smoothing;
    if (given("--xi-smoothing")) base.xi_smoothing = xi_smoothing;
    if (given("--threads")) base.threads = threads;
    return base;
  }

  void apply(ExperimentConfig& c) const {
    c.em = em(c.em);
    if (given("--temperature")) c.temperature = temperature;
    if (given("--method")) c.method = parse_aggregation(method);
    if (given("--gold")) c.gold = gold;
    if (given("--out")) c.output_dir = out;
  }
};

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto x = parse_double(tok);
    if (!x) throw InvalidArgument(std::string("bad number in ") + what + ": '" + tok + "'");
    out.push_back(*x);
  }
  return out;
}

// "0.9,0.1;0.5,0.5" -> one row per annotator.
Dense<double> parse_rows(const std::string& text, std::size_t rows, std::size_t cols) {
  Dense<double> out(rows, cols);
  std::stringstream ss(text);
  std::string row_text;
  std::size_t r = 0;
  std::vector<std::vector<double>> parsed;
  while (std::getline(ss, row_text, ';')) parsed.push_back(parse_numbers(row_text, "--xi"));
  if (parsed.size() == 1) parsed.assign(rows, parsed.front());
  if (parsed.size() != rows) throw InvalidArgument("--xi needs one row, or one row per annotator");
  for (const auto& row : parsed) {
    if (row.size() != cols) throw InvalidArgument("--xi rows need one value per class");
    for (std::size_t k = 0; k < cols; ++k) out(r, k) = row[k];
    ++r;
  }
  return out;
}

void print_ranking(const RankingReport& report) { write_ranking(std::cout, report); }

int cmd_predict(const std::string& config_path, const SharedFlags& flags) {
  auto config = read_config(config_path);
  flags.apply(config);
  config.validate();
  if (!config.uses_zero_shot()) throw ConfigError("predict needs embeddings, not a predictions file");
  const auto space = config.space();
  const auto result = zero_shot_predictions(config);

  StagedOutputs out(config.output_dir);
  const auto pred = out.stage("predictions.csv");
  const auto probs = out.stage("probabilities.jsonl");
  write_predictions(pred, result.matrix, space);
  {
    auto f = open_output(probs);
    for (std::size_t i = 0; i < result.matrix.num_items(); ++i)
      for (std::size_t j = 0; j < result.matrix.num_annotators(); ++j) {
        const auto p = result.probs(i, j);
        nlohmann::json rec = {{"item_id", result.matrix.item_ids()[i]},
                              {"annotator_id", result.matrix.annotator_ids()[j]},
                              {"probs", std::vector<double>(p.begin(), p.end())}};
        f << rec.dump() << '\n';
      }
  }
  out.commit();
  std::cerr << "wrote " << result.matrix.num_items() << " x " << result.matrix.num_annotators()
            << " predictions to " << config.output_dir << '\n';
  return 0;
}

int cmd_aggregate(const std::string& predictions, const std::vector<std::string>& labels, const SharedFlags& flags) {
  const LabelSpace space(labels);
  const auto matrix = read_predictions(predictions, space);
  require_valid(matrix, space);
  AggregatedLabels agg{matrix.item_ids(), {}};
  if (parse_aggregation(flags.method) == Aggregation::kMace) {
    agg.decoded = decode(fit_em(matrix, space, flags.em()));
  } else {
    agg.decoded = majority_vote(matrix, space.size());
  }
  StagedOutputs out(flags.out);
  write_aggregated(out.stage("aggregated.csv"), agg, space);
  out.commit();
  return 0;
}

int cmd_rank(const std::string& predictions, const std::vector<std::string>& labels, const SharedFlags& flags) {
  const LabelSpace space(labels);
  const auto matrix = read_predictions(predictions, space);
  const auto model = fit_em(matrix, space, flags.em());
  std::optional<GoldLabels> gold;
  if (!flags.gold.empty()) gold = read_gold(fs::path(flags.gold), space);
  const auto report = ranking_report(matrix, model, gold, space);

  StagedOutputs out(flags.out);
  write_ranking(out.stage("ranking.tsv"), report);
  {
    ExperimentConfig echo;
    echo.labels = labels;
    echo.predictions = predictions;
    echo.gold = flags.gold;
    echo.em = flags.em();
    echo.output_dir = flags.out;
    std::optional<AggregationScores> scores;
    if (gold) scores = aggregation_scores(matrix, model, *gold, space);
    auto f = open_output(out.stage("report.json"));
    f << make_report(echo, matrix, model, report, scores).dump(2) << '\n';
  }
  out.commit();
  print_ranking(report);
  return 0;
}

int cmd_evaluate(const std::string& predictions, const std::vector<std::string>& labels,
                 const std::string& aggregated, const SharedFlags& flags) {
  if (flags.gold.empty()) throw InvalidArgument("evaluate needs --gold");
  const LabelSpace space(labels);
  const auto matrix = read_predictions(predictions, space);
  require_valid(matrix, space);
  const auto gold = align_gold(read_gold(fs::path(flags.gold), space), matrix);

  std::cout << "annotator_id\tmacro_f1\taccuracy\n";
  for (std::size_t j = 0; j < matrix.num_annotators(); ++j) {
    const auto col = matrix.column(j);
    std::cout << matrix.annotator_ids()[j] << '\t' << format_double(macro_f1(col, gold.labels, space.size()))
              << '\t' << format_double(accuracy(col, gold.labels)) << '\n';
  }

  nlohmann::json summary;
  const auto majority = majority_vote(matrix, space.size());
  summary["majority"] = {{"macro_f1", macro_f1(majority.labels, gold.labels, space.size())},
                         {"accuracy", accuracy(majority.labels, gold.labels)}};
  const auto model = fit_em(matrix, space, flags.em());
  const auto mace = decode(model);
  summary["mace"] = {{"macro_f1", macro_f1(mace.labels, gold.labels, space.size())},
                     {"accuracy", accuracy(mace.labels, gold.labels)}};
  if (!aggregated.empty()) {
    const auto agg = read_aggregated(fs::path(aggregated), space);
    const auto agg_gold = align_gold(gold, PredictionMatrix(agg.item_ids, {"aggregated"}, agg.decoded.labels));
    summary["aggregated_file"] = {{"macro_f1", macro_f1(agg.decoded.labels, agg_gold.labels, space.size())},
                                  {"accuracy", accuracy(agg.decoded.labels, agg_gold.labels)}};
  }
  if (matrix.num_annotators() >= 2) {
    const auto report = ranking_report(matrix, model, gold, space);
    summary["rho_theta_f1"] = report.summary->rho_theta_f1.value;
    summary["rho_kappa_f1"] = report.summary->rho_kappa_f1.value;
    summary["rho_theta_accuracy"] = report.summary->rho_theta_accuracy.value;
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_simulate(std::size_t items, const std::vector<std::string>& labels, const std::string& theta_text,
                 const std::string& xi_text, double missing_rate, const SharedFlags& flags) {
  const LabelSpace space(labels);
  const auto theta = parse_numbers(theta_text, "--theta");
  Dense<double> xi;
  if (xi_text.empty()) {
    Rng rng(flags.seed ^ 0x9e3779b97f4a7c15ULL);
    xi = random_distributions(theta.size(), space.size(), rng);
  } else {
    xi = parse_rows(xi_text, theta.size(), space.size());
  }
  const auto bundle = sample(items, space, theta, xi, missing_rate, flags.seed);

  StagedOutputs out(flags.out);
  write_predictions(out.stage("predictions.csv"), bundle.matrix, space);
  write_gold(out.stage("gold.csv"), bundle.gold, space);
  {
    nlohmann::json truth;
    truth["seed"] = bundle.seed;
    truth["labels"] = labels;
    truth["missing_rate"] = missing_rate;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const auto row = bundle.xi_true.row(j);
      truth["annotators"].push_back({{"id", bundle.matrix.annotator_ids()[j]},
                                     {"theta", theta[j]},
                                     {"xi", std::vector<double>(row.begin(), row.end())}});
    }
    auto f = open_output(out.stage("truth.json"));
    f << truth.dump(2) << '\n';
  }
  out.commit();
  return 0;
}

int cmd_run(const std::string& config_path, const SharedFlags& flags) {
  auto config = read_config(config_path);
  flags.apply(config);
  const auto result = run_pipeline(config);
  print_ranking(result.ranking);
  if (result.ranking.summary)
    std::cerr << "rho(theta, f1) = " << result.ranking.summary->rho_theta_f1.value
              << "  rho(kappa, f1) = " << result.ranking.summary->rho_kappa_f1.value << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot label-description ranking and aggregation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, predictions, aggregated, theta, xi;
  std::vector<std::string> labels;
  std::size_t items = 1000;
  double missing_rate = 0.0;

  SharedFlags predict_flags, aggregate_flags, rank_flags, evaluate_flags, simulate_flags, run_flags;

  auto* predict = app.add_subcommand("predict", "Zero-shot predictions from embeddings and description sets");
  predict->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  predict_flags.add(predict);

  auto add_matrix_inputs = [&](CLI::App* sub) {
    sub->add_option("--predictions", predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--labels", labels, "Class names in index order, comma separated")
        ->required()
        ->delimiter(',');
  };

  auto* aggregate = app.add_subcommand("aggregate", "Aggregate prediction columns into one label per item");
  add_matrix_inputs(aggregate);
  aggregate_flags.add(aggregate);

  auto* rank = app.add_subcommand("rank", "Rank annotators (description sets) by MACE trustworthiness");
  add_matrix_inputs(rank);
  rank_flags.add(rank);

  auto* evaluate = app.add_subcommand("evaluate", "Score columns and aggregators against gold labels");
  add_matrix_inputs(evaluate);
  evaluate->add_option("--aggregated", aggregated, "Also score this aggregated.csv")->check(CLI::ExistingFile);
  evaluate_flags.add(evaluate);

  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic annotation matrix from the MACE model");
  simulate->add_option("--items", items, "Number of items")->check(CLI::PositiveNumber);
  simulate->add_option("--labels", labels, "Class names, comma separated")->required()->delimiter(',');
  simulate->add_option("--theta", theta, "Per-annotator theta, comma separated")->required();
  simulate->add_option("--xi", xi, "Spam distributions: one row or one per annotator, rows split by ';'");
  simulate->add_option("--missing-rate", missing_rate, "Probability a cell is unobserved")->check(CLI::Range(0.0, 0.999999));
  simulate_flags.add(simulate);

  auto* run = app.add_subcommand("run", "Full pipeline from an experiment config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_flags.add(run);

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) return cmd_predict(config_path, predict_flags);
    if (aggregate->parsed()) return cmd_aggregate(predictions, labels, aggregate_flags);
    if (rank->parsed()) return cmd_rank(predictions, labels, rank_flags);
    if (evaluate->parsed()) return cmd_evaluate(predictions, labels, aggregated, evaluate_flags);
    if (simulate->parsed()) return cmd_simulate(items, labels, theta, xi, missing_rate, simulate_flags);
    if (run->parsed()) return cmd_run(config_path, run_flags);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& v : e.result().violations) std::cerr << "  " << v.message << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
