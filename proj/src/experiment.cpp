#include "isgd/experiment.hpp"

#include <cmath>
#include <limits>

#include "isgd/gradient.hpp"
#include "isgd/io.hpp"
#include "isgd/noise.hpp"

namespace isgd::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Independent streams derived from the run seed.
constexpr std::uint64_t kTruthStream = 0xA24BAED4963EE407ULL;
constexpr std::uint64_t kTrainStream = 0x9FB21C651E98DF25ULL;
constexpr std::uint64_t kTestStream = 0xC13FA9A902A6328FULL;
constexpr std::uint64_t kExactStream = 0x91E10DA5C79E7B1DULL;

constexpr double kLog2Pi = 1.8378770664093453;

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

LayerPartition partition_for(const ModelSection& m) {
  if (m.layers.empty()) return LayerPartition::single(m.features);
  return LayerPartition::from_sizes(m.layers);
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

/// Tracks the files an experiment writes, in order.
class OutputDir {
 public:
  explicit OutputDir(const fs::path& root) : root_(root) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }

  void text(const std::string& name, const std::string& content) {
    io::write_text(root_ / name, content);
    add(name);
  }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    io::write_csv(root_ / name, header, rows);
    add(name);
  }

  void add(const std::string& name) {
    for (const auto& f : files_) {
      if (f == name) return;
    }
    files_.push_back(name);
  }

  json manifest() const {
    json files = json::array();
    for (const auto& name : files_) {
      files.push_back({{"path", name},
                       {"sha256", io::sha256_file(root_ / name)},
                       {"bytes", static_cast<std::uint64_t>(fs::file_size(root_ / name))}});
    }
    return json{{"files", files}};
  }

  json finish() {
    const json m = manifest();
    io::write_text(root_ / "manifest.json", io::dump_json(m));
    return m;
  }

 private:
  fs::path root_;
  std::vector<std::string> files_;
};

std::vector<std::vector<double>> matrix_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(m(i, j));
  }
  return rows;
}

std::vector<std::string> theta_header(std::size_t d) {
  std::vector<std::string> h;
  for (std::size_t j = 0; j < d; ++j) h.push_back("theta_" + std::to_string(j));
  return h;
}

void write_samples(OutputDir& out, const Matrix& samples, const json& sidecar) {
  out.csv("samples.csv", theta_header(static_cast<std::size_t>(samples.cols())), matrix_rows(samples));
  out.text("samples.json", io::dump_json(sidecar));
}

void write_predictive(OutputDir& out, const ExperimentConfig& config, const Problem& problem,
                      const Matrix& samples) {
  if (problem.frequencies.size() == 0) return;
  const auto* trig = dynamic_cast<const TrigRegression*>(problem.model.get());
  const auto& e = config.eval;
  std::vector<std::vector<double>> mc_rows;
  std::vector<std::vector<double>> exact_rows;
  for (std::size_t k = 0; k < e.grid_points; ++k) {
    const double x = e.grid_min + (e.grid_max - e.grid_min) * static_cast<double>(k) /
                                      static_cast<double>(e.grid_points - 1);
    const Vector phi = trig->features(x);
    const auto mc = oracle::predictive_mc(samples, phi, problem.lik_var);
    mc_rows.push_back({x, mc.mean, std::sqrt(mc.variance)});
    if (problem.analytic) {
      const auto ex = oracle::predictive_analytic(*problem.analytic, phi, problem.lik_var);
      exact_rows.push_back({x, ex.mean, std::sqrt(ex.variance)});
    }
  }
  out.csv("predictive_mc.csv", {"x", "mean", "std"}, mc_rows);
  if (problem.analytic) out.csv("predictive_analytic.csv", {"x", "mean", "std"}, exact_rows);
}

Vector start_point(const ExperimentConfig& config, const Problem& problem, Matrix* hessian) {
  const oracle::LaplaceFit fit = oracle::laplace_fit(*problem.model, problem.train);
  if (hessian) *hessian = fit.hessian;
  const bool from_zero = !config.method.exact && config.method.kind == samplers::SamplerKind::isgd &&
                         config.method.scheme == noise::Scheme::a;
  if (from_zero) return Vector::Zero(static_cast<Eigen::Index>(problem.model->dim()));
  return fit.mode;
}

std::unique_ptr<GradientOracle> make_oracle(const Problem& problem, std::size_t batch) {
  if (problem.train.empty()) return std::make_unique<ExactGradient>(*problem.model, problem.train);
  return std::make_unique<MinibatchGradient>(*problem.model, problem.train, batch);
}

noise::EstimationSettings estimation_settings(const ExperimentConfig& config, const Matrix& hessian) {
  noise::EstimationSettings s;
  s.estimator = config.method.estimator;
  s.scheme = config.method.scheme;
  s.mu = config.noise.mu;
  s.steps = config.noise.steps;
  s.fast_matching = config.noise.fast_matching;
  s.center_momentum = config.noise.center_momentum;
  if (config.noise.train_lr) {
    s.train_lr = *config.noise.train_lr;
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (hessian + hessian.transpose()));
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0)) throw NumericalError("cannot derive a training rate: Hessian has no positive curvature");
    s.train_lr = 1.0 / top;
  }
  return s;
}

json run_header(const ExperimentConfig& config, std::size_t effective_batch) {
  return json{{"method", to_string(config.method)},
              {"model", to_string(config.model.kind)},
              {"seed", config.seed},
              {"effective_batch_size", effective_batch}};
}

}  // namespace

void to_json(json& j, const Metrics& m) {
  j = json{{"rmse", optional_json(m.rmse)},
           {"accuracy", optional_json(m.accuracy)},
           {"mnll", optional_json(m.mnll)},
           {"mnll_se", optional_json(m.mnll_se)},
           {"mnll_analytic", optional_json(m.mnll_analytic)},
           {"kl_to_analytic", optional_json(m.kl_to_analytic)}};
}

Problem build_problem(const ExperimentConfig& config) {
  const ModelSection& m = config.model;
  Problem p;
  Rng truth(config.seed ^ kTruthStream);
  switch (m.kind) {
    case ModelKind::trig: {
      p.frequencies = Eigen::Map<const Vector>(m.frequencies.data(), static_cast<Eigen::Index>(m.frequencies.size()));
      p.lik_var = m.noise_var;
      p.model = std::make_unique<TrigRegression>(p.frequencies, m.noise_var, partition_for(m));
      const Vector w_true = truth.normal_vector(p.frequencies.size());
      p.train = m.train_csv.empty()
                    ? make_toy_dataset(m.n_train, w_true, p.frequencies, m.noise_var, config.seed ^ kTrainStream)
                    : read_dataset_csv(m.train_csv);
      p.test = m.test_csv.empty()
                   ? make_toy_dataset(m.n_test, w_true, p.frequencies, m.noise_var, config.seed ^ kTestStream)
                   : read_dataset_csv(m.test_csv);
      const auto d = p.frequencies.size();
      const oracle::GaussianDist prior(Vector::Zero(d), Matrix::Identity(d, d));
      p.analytic = oracle::conjugate_posterior(p.train, p.frequencies, m.noise_var, prior);
      break;
    }
    case ModelKind::quadratic: {
      const auto d = static_cast<Eigen::Index>(m.features);
      const Vector mean = Eigen::Map<const Vector>(m.mean.data(), d);
      const Matrix h = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          m.hessian.data(), d, d);
      auto model = std::make_unique<QuadraticPotential>(mean, h, partition_for(m));
      p.analytic = oracle::GaussianDist(mean, model->covariance());
      p.model = std::move(model);
      break;
    }
    case ModelKind::logistic: {
      p.model = std::make_unique<LogisticRegression>(m.features, m.prior_var);
      const Vector w_true = std::sqrt(m.prior_var) * truth.normal_vector(static_cast<Eigen::Index>(m.features));
      p.train = m.train_csv.empty() ? make_logistic_dataset(m.n_train, w_true, config.seed ^ kTrainStream)
                                    : read_dataset_csv(m.train_csv);
      p.test = m.test_csv.empty() ? make_logistic_dataset(m.n_test, w_true, config.seed ^ kTestStream)
                                  : read_dataset_csv(m.test_csv);
      break;
    }
  }
  for (const Dataset* data : {&p.train, &p.test}) {
    if (!data->empty() && data->input_dim() != p.model->input_dim()) {
      throw ConfigError("dataset has " + std::to_string(data->input_dim()) + " input columns, model expects " +
                        std::to_string(p.model->input_dim()));
    }
  }
  return p;
}

Metrics evaluate_metrics(const Matrix& samples, const Problem& problem) {
  require(samples.rows() >= 1, "metrics need a non-empty chain");
  const Model& model = *problem.model;
  require(samples.cols() == static_cast<Eigen::Index>(model.dim()), "samples have the wrong dimension");
  Metrics out;
  const Dataset& test = problem.test;
  const auto s = static_cast<std::size_t>(samples.rows());

  if (!test.empty()) {
    std::vector<double> nll(test.size());
    std::vector<double> terms(s);
    for (std::size_t i = 0; i < test.size(); ++i) {
      for (std::size_t k = 0; k < s; ++k) {
        terms[k] = model.log_lik(samples.row(static_cast<Eigen::Index>(k)).transpose(), test, i);
      }
      nll[i] = -(log_sum_exp(terms) - std::log(static_cast<double>(s)));
    }
    double mean = 0.0;
    for (double v : nll) mean += v;
    mean /= static_cast<double>(nll.size());
    double var = 0.0;
    for (double v : nll) var += (v - mean) * (v - mean);
    out.mnll = mean;
    out.mnll_se = nll.size() > 1 ? std::sqrt(var / static_cast<double>(nll.size() - 1) / static_cast<double>(nll.size()))
                                 : 0.0;

    if (const auto* trig = dynamic_cast<const TrigRegression*>(&model)) {
      double sq = 0.0;
      double exact_nll = 0.0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const double x = test.inputs(static_cast<Eigen::Index>(i), 0);
        const double y = test.targets[static_cast<Eigen::Index>(i)];
        const Vector phi = trig->features(x);
        const double pred = (samples * phi).mean();
        sq += (pred - y) * (pred - y);
        if (problem.analytic) {
          const auto ex = oracle::predictive_analytic(*problem.analytic, phi, trig->lik_var());
          exact_nll += 0.5 * (kLog2Pi + std::log(ex.variance) + (y - ex.mean) * (y - ex.mean) / ex.variance);
        }
      }
      out.rmse = std::sqrt(sq / static_cast<double>(test.size()));
      if (problem.analytic) out.mnll_analytic = exact_nll / static_cast<double>(test.size());
    } else if (const auto* logit = dynamic_cast<const LogisticRegression*>(&model)) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const auto x = test.inputs.row(static_cast<Eigen::Index>(i)).transpose();
        double prob = 0.0;
        for (std::size_t k = 0; k < s; ++k) {
          prob += logit->probability(samples.row(static_cast<Eigen::Index>(k)).transpose(), x);
        }
        prob /= static_cast<double>(s);
        const bool label = test.targets[static_cast<Eigen::Index>(i)] > 0.5;
        if ((prob > 0.5) == label) ++correct;
      }
      out.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    }
  }

  if (problem.analytic && samples.rows() > samples.cols() + 1) {
    const oracle::ChainMoments mom = oracle::chain_moments(samples);
    try {
      out.kl_to_analytic = oracle::gaussian_kl(oracle::GaussianDist(mom.mean, mom.covariance), *problem.analytic);
    } catch (const ContractViolation&) {
      // Degenerate sample covariance: no Gaussian fit to compare.
    }
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& config, Stage stage) {
  const Problem problem = build_problem(config);
  OutputDir out(config.out_dir);
  out.text("config.ini", serialize_config(config));
  if (config.model.kind != ModelKind::quadratic) {
    const bool labels = config.model.kind == ModelKind::logistic;
    write_dataset_csv(problem.train, out.root() / "train.csv", labels);
    out.add("train.csv");
    write_dataset_csv(problem.test, out.root() / "test.csv", labels);
    out.add("test.csv");
  }

  samplers::SamplerConfig sampler = config.sampler;
  sampler.seed = config.seed;
  const std::size_t n = problem.train.size();
  if (n > 0) sampler.batch_size = std::min(sampler.batch_size, n);
  const std::size_t effective_batch = n > 0 ? sampler.batch_size : 0;

  RunResult result;
  json metrics = run_header(config, effective_batch);

  auto fail = [&](const std::string& where, const std::string& detail, std::optional<std::size_t> step) {
    metrics["status"] = "diverged";
    metrics["failure"] = {{"stage", where}, {"detail", detail}};
    if (step) metrics["failure"]["step"] = *step;
    out.text("metrics.json", io::dump_json(metrics));
    result.exit_status = 3;
    result.metrics = metrics;
    result.manifest = out.finish();
    return result;
  };

  Matrix hessian;
  Vector theta0;
  try {
    theta0 = start_point(config, problem, &hessian);
  } catch (const NumericalError& e) {
    return fail("initialisation", e.what(), std::nullopt);
  }
  const auto grad = make_oracle(problem, sampler.batch_size);

  // Noise estimation (i-SGD only).
  std::optional<noise::EstimationResult> estimation;
  json lambda_json = {{"method", to_string(config.method)}};
  if (!config.method.exact && config.method.kind == samplers::SamplerKind::isgd) {
    try {
      const noise::EstimationSettings settings = estimation_settings(config, hessian);
      Rng est_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
      estimation = noise::estimate_lambdas(*grad, settings, theta0, est_rng);
      lambda_json["train_lr"] = settings.train_lr;
    } catch (const NumericalError& e) {
      out.text("lambda_state.json", io::dump_json(lambda_json));
      return fail("estimation", e.what(), std::nullopt);
    }
    lambda_json["state"] = estimation->state;
    lambda_json["lambda_mode"] = config.noise.lambda_mode == noise::LambdaMode::slr ? "slr" : "layerwise";
    lambda_json["per_coordinate"] =
        vector_json((config.noise.lambda_mode == noise::LambdaMode::slr ? noise::slr_collapse(estimation->state)
                                                                        : noise::layerwise(estimation->state))
                        .per_coordinate(problem.model->partition()));
    lambda_json["fits"] = estimation->fits;
    json trace = json::array();
    for (const auto& l : estimation->lambda_trace) trace.push_back(vector_json(l));
    lambda_json["lambda_trace"] = trace;
  }
  out.text("lambda_state.json", io::dump_json(lambda_json));
  if (stage == Stage::estimate) {
    metrics["status"] = "ok";
    result.metrics = metrics;
    result.manifest = out.finish();
    return result;
  }

  // Sampling.
  Matrix samples;
  json sidecar = {{"method", to_string(config.method)}, {"sampler", sampler}};
  if (config.method.exact) {
    Rng rng(config.seed ^ kExactStream);
    samples = problem.analytic->draws(sampler.num_samples, rng);
    sidecar["source"] = "exact posterior draws";
  } else {
    try {
      std::optional<samplers::IsgdSetup> setup;
      Vector start = theta0;
      if (estimation) {
        setup = samplers::IsgdSetup{estimation->state, config.noise.lambda_mode};
        start = estimation->theta;
      }
      const samplers::SampleChain chain = samplers::run_chain(*grad, sampler, start, setup);
      samples = chain.samples;
      sidecar["diagnostics"] = chain.diagnostics;
      metrics["clamp_events"] = chain.diagnostics.clamp_events;
      metrics["max_composite_error"] = chain.diagnostics.max_composite_error;
      metrics["total_steps"] = chain.diagnostics.total_steps;
    } catch (const samplers::DivergenceError& e) {
      return fail("sampling", e.what(), e.step());
    } catch (const NumericalError& e) {
      return fail("sampling", e.what(), std::nullopt);
    }
  }
  if (estimation) {
    metrics["lambda"] = vector_json(estimation->state.lambda);
    json trace = json::array();
    for (const auto& l : estimation->lambda_trace) trace.push_back(vector_json(l));
    metrics["lambda_trace"] = trace;
    metrics["fits"] = estimation->fits;
  }
  write_samples(out, samples, sidecar);

  if (stage == Stage::full) {
    write_predictive(out, config, problem, samples);
    metrics["metrics"] = evaluate_metrics(samples, problem);
  }
  metrics["status"] = "ok";
  out.text("metrics.json", io::dump_json(metrics));
  result.metrics = metrics;
  result.manifest = out.finish();
  return result;
}

RunResult evaluate_saved(const ExperimentConfig& config) {
  const Problem problem = build_problem(config);
  OutputDir out(config.out_dir);
  const fs::path path = out.root() / "samples.csv";
  if (!fs::exists(path)) throw ConfigError("no samples to evaluate: " + path.string());
  const io::CsvTable table = io::read_csv(path);
  Matrix samples(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].size() != table.header.size()) throw ConfigError("ragged row in " + path.string());
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][j];
    }
  }
  if (samples.cols() != static_cast<Eigen::Index>(problem.model->dim())) {
    throw ConfigError("samples.csv has " + std::to_string(samples.cols()) + " columns, model has dimension " +
                      std::to_string(problem.model->dim()));
  }
  out.add("samples.csv");
  write_predictive(out, config, problem, samples);
  json metrics = run_header(config, problem.train.empty() ? 0 : std::min(config.sampler.batch_size, problem.train.size()));
  metrics["metrics"] = evaluate_metrics(samples, problem);
  metrics["status"] = "ok";
  out.text("metrics.json", io::dump_json(metrics));
  RunResult result;
  result.metrics = metrics;
  result.manifest = out.finish();
  return result;
}

}  // namespace isgd::harness
