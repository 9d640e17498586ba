#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "isgd/config.hpp"
#include "isgd/model.hpp"
#include "isgd/oracle.hpp"
#include "isgd/samplers.hpp"

namespace isgd::harness {

/// Model and data assembled from a configuration.
struct Problem {
  std::unique_ptr<Model> model;
  Dataset train;
  Dataset test;
  /// Exact posterior for conjugate models (trig, quadratic).
  std::optional<oracle::GaussianDist> analytic;
  /// Frequencies and likelihood variance of the trig model, empty otherwise.
  Vector frequencies;
  double lik_var = 0.0;
};

Problem build_problem(const ExperimentConfig& config);

struct Metrics {
  std::optional<double> rmse;          // regression: predictive-mean error on the test set
  std::optional<double> accuracy;      // classification: MC-averaged probability thresholded at 1/2
  std::optional<double> mnll;          // mixture predictive, test set
  std::optional<double> mnll_se;       // standard error of mnll over test points
  std::optional<double> mnll_analytic; // exact predictive, conjugate regression only
  std::optional<double> kl_to_analytic;// KL(N(chain moments) || exact posterior)
};

void to_json(nlohmann::json& j, const Metrics& metrics);

/// Predictive scores of a sample matrix (rows are parameter draws).
Metrics evaluate_metrics(const Matrix& samples, const Problem& problem);

enum class Stage { estimate, sample, full };

struct RunResult {
  int exit_status = 0;  // 0 success, 3 numerical divergence
  nlohmann::json manifest;
  nlohmann::json metrics;
};

/// Runs estimation, sampling and evaluation up to `stage` and writes the
/// outputs into config.out_dir. Divergence leaves the files written so far,
/// a metrics.json with diagnostics, and exit status 3.
RunResult run_experiment(const ExperimentConfig& config, Stage stage = Stage::full);

/// Re-evaluates the samples.csv stored in config.out_dir.
RunResult evaluate_saved(const ExperimentConfig& config);

}  // namespace isgd::harness
