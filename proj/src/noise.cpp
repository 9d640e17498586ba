#include "isgd/noise.hpp"

#include <algorithm>

namespace isgd::noise {
namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_mu(double mu) { require(mu >= 0.0 && mu < 1.0, "EMA momentum must lie in [0, 1)"); }

}  // namespace

bool NoiseEstimatorState::operator==(const NoiseEstimatorState& other) const {
  return lambda.size() == other.lambda.size() && lambda == other.lambda &&
         b_diag.size() == other.b_diag.size() && b_diag == other.b_diag && mu == other.mu &&
         step_count == other.step_count;
}

void to_json(nlohmann::json& j, const NoiseEstimatorState& state) {
  j = nlohmann::json{{"lambda", to_std(state.lambda)},
                     {"b_diag", to_std(state.b_diag)},
                     {"mu", state.mu},
                     {"step_count", state.step_count}};
}

void from_json(const nlohmann::json& j, NoiseEstimatorState& state) {
  state.lambda = from_std(j.at("lambda").get<std::vector<double>>());
  state.b_diag = from_std(j.at("b_diag").get<std::vector<double>>());
  j.at("mu").get_to(state.mu);
  j.at("step_count").get_to(state.step_count);
  require((state.b_diag.array() >= 0.0).all(), "b_diag entries must be non-negative");
  require((state.lambda.array() >= 0.0).all(), "lambda entries must be non-negative");
}

Vector LambdaSpec::per_coordinate(const LayerPartition& partition) const {
  Vector out;
  if (mode == LambdaMode::slr) {
    require(values.size() == 1, "single-learning-rate lambda must be a scalar");
    out = Vector::Constant(static_cast<Eigen::Index>(partition.dim()), values[0]);
  } else {
    out = partition.expand(values);
  }
  return out.cwiseMax(kLambdaFloor);
}

Vector lambda_gaussian_instant(const Vector& g, const LayerPartition& partition) {
  require(static_cast<std::size_t>(g.size()) == partition.dim(), "gradient length must equal dim");
  require(g.allFinite(), "gradient must be finite");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(partition.num_groups()));
  for (std::size_t p = 0; p < partition.num_groups(); ++p) {
    for (std::size_t j : partition.group(p)) out[static_cast<Eigen::Index>(p)] += g[static_cast<Eigen::Index>(j)] * g[static_cast<Eigen::Index>(j)];
  }
  return 0.5 * out;
}

Vector lambda_naive_max(const Vector& g, const LayerPartition& partition) {
  require(static_cast<std::size_t>(g.size()) == partition.dim(), "gradient length must equal dim");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(partition.num_groups()));
  for (std::size_t p = 0; p < partition.num_groups(); ++p) {
    for (std::size_t j : partition.group(p)) {
      const double sq = g[static_cast<Eigen::Index>(j)] * g[static_cast<Eigen::Index>(j)];
      out[static_cast<Eigen::Index>(p)] = std::max(out[static_cast<Eigen::Index>(p)], sq);
    }
  }
  return out;
}

NoiseEstimatorState ema_update(NoiseEstimatorState state, const Vector& fresh, double mu) {
  check_mu(mu);
  if (state.step_count == 0) {
    state.lambda = fresh;
  } else {
    require(state.lambda.size() == fresh.size(), "fresh estimate has wrong number of groups");
    state.lambda = mu * state.lambda + (1.0 - mu) * fresh;
  }
  state.mu = mu;
  ++state.step_count;
  return state;
}

void ema_update_b(NoiseEstimatorState& state, const Vector& g) {
  const Vector fresh = 0.5 * g.cwiseAbs2();
  if (state.step_count == 0 || state.b_diag.size() != g.size()) {
    state.b_diag = fresh;
  } else {
    state.b_diag = state.mu * state.b_diag + (1.0 - state.mu) * fresh;
  }
}

Vector empirical_b_diag(const GradientOracle& oracle, const Vector& theta, std::size_t draws,
                        Rng& rng) {
  require(draws >= 2, "need at least two gradient draws");
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  Vector mean = Vector::Zero(d);
  Vector m2 = Vector::Zero(d);
  for (std::size_t k = 1; k <= draws; ++k) {
    const Vector g = oracle.sample(theta, rng);
    const Vector delta = g - mean;
    mean += delta / static_cast<double>(k);
    m2.array() += delta.array() * (g - mean).array();
  }
  return (0.5 * m2 / static_cast<double>(draws - 1)).cwiseMax(0.0);
}

Vector empirical_b_diag(const Model& model, const Vector& theta, const Dataset& data,
                        std::size_t draws, std::size_t batch_size, std::uint64_t seed) {
  const MinibatchGradient oracle(model, data, batch_size);
  Rng rng(seed);
  return empirical_b_diag(oracle, theta, draws, rng);
}

LambdaSpec slr_collapse(const NoiseEstimatorState& state) {
  require(state.lambda.size() > 0, "no layer-wise lambda to collapse");
  return {LambdaMode::slr, Vector::Constant(1, state.lambda.sum())};
}

LambdaSpec layerwise(const NoiseEstimatorState& state) {
  require(state.lambda.size() > 0, "no layer-wise lambda");
  return {LambdaMode::layerwise, state.lambda};
}

std::string to_string(Estimator e) { return e == Estimator::gaussian ? "G" : "alpha"; }

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::a: return "a";
    case Scheme::b: return "b";
    case Scheme::c: return "c";
  }
  return "?";
}

Estimator parse_estimator(const std::string& text) {
  if (text == "G" || text == "g" || text == "gaussian") return Estimator::gaussian;
  if (text == "alpha") return Estimator::alpha;
  throw ContractViolation("unknown noise estimator '" + text + "' (expected G or alpha)");
}

Scheme parse_scheme(const std::string& text) {
  if (text == "a") return Scheme::a;
  if (text == "b") return Scheme::b;
  if (text == "c") return Scheme::c;
  throw ContractViolation("unknown estimation scheme '" + text + "' (expected a, b or c)");
}

EstimationResult estimate_lambdas(const GradientOracle& oracle, const EstimationSettings& settings,
                                  const Vector& theta_start, Rng& rng) {
  require(settings.steps >= 1, "estimation needs a positive step budget");
  check_mu(settings.mu);
  require(static_cast<std::size_t>(theta_start.size()) == oracle.dim(),
          "starting parameters have the wrong dimension");
  const bool trains = settings.scheme != Scheme::c;
  if (trains) require(settings.train_lr > 0.0, "schemes a and b need a positive training rate");

  const LayerPartition& partition = oracle.partition();
  const auto d = static_cast<Eigen::Index>(oracle.dim());

  EstimationResult result;
  result.theta = theta_start;
  NoiseEstimatorState& state = result.state;
  state.mu = settings.mu;
  state.lambda = Vector::Zero(static_cast<Eigen::Index>(partition.num_groups()));
  state.b_diag = Vector::Zero(d);

  const bool alpha_route = settings.estimator == Estimator::alpha;
  // Alpha route: per-coordinate noise sequences (gradient minus its mean).
  std::vector<std::vector<double>> noise(alpha_route ? static_cast<std::size_t>(d) : 0);
  Matrix frozen_draws;
  if (alpha_route && !trains) frozen_draws.resize(static_cast<Eigen::Index>(settings.steps), d);
  Vector running_mean;

  for (std::size_t t = 0; t < settings.steps; ++t) {
    const Vector g = oracle.sample(result.theta, rng);
    if (!g.allFinite()) {
      throw NumericalError("non-finite gradient during estimation at step " + std::to_string(t));
    }
    // b track first: both filters bootstrap from step_count == 0.
    ema_update_b(state, g);
    if (alpha_route) {
      if (!trains) {
        frozen_draws.row(static_cast<Eigen::Index>(t)) = g.transpose();
      } else if (t == 0) {
        running_mean = g;
      } else {
        for (Eigen::Index j = 0; j < d; ++j) noise[static_cast<std::size_t>(j)].push_back(g[j] - running_mean[j]);
        running_mean = settings.center_momentum * running_mean + (1.0 - settings.center_momentum) * g;
      }
      ++state.step_count;
    } else {
      state = ema_update(std::move(state), lambda_gaussian_instant(g, partition), settings.mu);
      result.lambda_trace.push_back(state.lambda);
    }
    if (trains) {
      result.theta -= settings.train_lr * g;
      if (!result.theta.allFinite()) {
        throw NumericalError("parameters diverged during estimation at step " + std::to_string(t));
      }
    }
  }

  if (alpha_route) {
    if (!trains) {
      // Parameters are frozen, so the drift is constant: centre by the sample mean.
      const Vector mean = frozen_draws.colwise().mean().transpose();
      for (Eigen::Index j = 0; j < d; ++j) {
        auto& seq = noise[static_cast<std::size_t>(j)];
        seq.reserve(static_cast<std::size_t>(frozen_draws.rows()));
        for (Eigen::Index t = 0; t < frozen_draws.rows(); ++t) seq.push_back(frozen_draws(t, j) - mean[j]);
      }
    }
    // Pool coordinate-major so each block sums draws of a single coordinate where possible.
    std::vector<std::vector<double>> pooled(partition.num_groups());
    for (std::size_t p = 0; p < partition.num_groups(); ++p) {
      for (std::size_t j : partition.group(p)) {
        pooled[p].insert(pooled[p].end(), noise[j].begin(), noise[j].end());
      }
    }
    stable::GroupLambdas fitted = stable::lambda_alpha(pooled, settings.blocks, settings.fast_matching);
    state.lambda = fitted.lambda;
    result.fits = std::move(fitted.fits);
    result.lambda_trace.push_back(state.lambda);
  }

  state.lambda = state.lambda.cwiseMax(kLambdaFloor);
  return result;
}

}  // namespace isgd::noise
