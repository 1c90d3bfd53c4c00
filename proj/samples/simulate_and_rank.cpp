// Apache License, Version 2.0, refer to LICENSE.txt

// Samples an annotation matrix with known annotator reliabilities, fits
// MACE and prints the recovered ranking next to the true theta.

#include <cstdio>

#include "labeldesc/labeldesc.hpp"

int main() {
  using namespace labeldesc;
  const LabelSpace space({"positive", "negative", "neutral"});
  const auto theta = spaced(6, 0.1, 0.95);
  Rng rng(42);
  const auto bundle = sample(1000, space, theta, random_distributions(6, 3, rng), 0.1, 42);

  EmConfig cfg;
  cfg.seed = 42;
  const auto model = fit_em(bundle.matrix, space, cfg);
  const auto report = ranking_report(bundle.matrix, model, bundle.gold, space);

  std::printf("%-4s %10s %10s %10s %10s\n", "id", "true", "theta", "kappa", "macro_f1");
  for (const auto& row : report.rows) {
    const auto j = static_cast<std::size_t>(row.annotator_id[1] - '0');
    std::printf("%-4s %10.3f %10.3f %10.3f %10.3f\n", row.annotator_id.c_str(), theta[j], row.theta,
                row.kappa_mean, *row.macro_f1);
  }
  std::printf("spearman(theta, f1) = %.3f\n", report.summary->rho_theta_f1.value);
  std::printf("spearman(kappa, f1) = %.3f\n", report.summary->rho_kappa_f1.value);

  const auto scores = aggregation_scores(bundle.matrix, model, bundle.gold, space);
  std::printf("accuracy: mace %.3f, majority %.3f\n", scores.mace_accuracy, scores.majority_accuracy);
}
