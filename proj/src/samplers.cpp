#include "isgd/samplers.hpp"

#include <cmath>

namespace isgd::samplers {
namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Stream for the estimation phase, kept apart from the sampling stream.
constexpr std::uint64_t kEstimationStream = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::sgd: return "sgd";
    case SamplerKind::sgld: return "sgld";
    case SamplerKind::sghmc: return "sghmc";
    case SamplerKind::isgd: return "isgd";
  }
  return "?";
}

SamplerKind parse_kind(const std::string& text) {
  if (text == "sgd") return SamplerKind::sgd;
  if (text == "sgld") return SamplerKind::sgld;
  if (text == "sghmc") return SamplerKind::sghmc;
  if (text == "isgd") return SamplerKind::isgd;
  throw ContractViolation("unknown sampler '" + text + "'");
}

std::string to_string(BTracking mode) {
  switch (mode) {
    case BTracking::ema: return "ema";
    case BTracking::frozen: return "frozen";
    case BTracking::zero: return "zero";
  }
  return "?";
}

BTracking parse_b_tracking(const std::string& text) {
  if (text == "ema") return BTracking::ema;
  if (text == "frozen") return BTracking::frozen;
  if (text == "zero") return BTracking::zero;
  throw ContractViolation("unknown b tracking mode '" + text + "' (expected ema, frozen or zero)");
}

void SamplerConfig::validate() const {
  require(eta > 0.0, "eta must be positive");
  require(keepevery >= 1, "keepevery must be at least 1");
  require(num_samples >= 1, "num_samples must be at least 1");
  require(temperature > 0.0 && temperature <= 1.0, "temperature must lie in (0, 1]");
  require(batch_size >= 1, "batch size must be at least 1");
  require(warmup_anneal >= 1.0, "warm-up anneal factor must be at least 1");
  require(mass > 0.0, "mass must be positive");
  require(friction_scale > 0.0, "friction scale must be positive");
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)},
                     {"eta", c.eta},
                     {"temperature", c.temperature},
                     {"batch_size", c.batch_size},
                     {"warmup_steps", c.warmup_steps},
                     {"keepevery", c.keepevery},
                     {"num_samples", c.num_samples},
                     {"seed", c.seed},
                     {"warmup_anneal", c.warmup_anneal},
                     {"mass", c.mass},
                     {"friction_scale", c.friction_scale},
                     {"b_tracking", to_string(c.b_tracking)}};
}

void to_json(nlohmann::json& j, const ChainDiagnostics& d) {
  j = nlohmann::json{{"total_steps", d.total_steps},
                     {"clamp_events", d.clamp_events},
                     {"max_composite_error", d.max_composite_error},
                     {"lambda", to_std(d.lambda)}};
}

DivergenceError::DivergenceError(std::size_t step, const std::string& detail)
    : NumericalError("non-finite parameters or energy at step " + std::to_string(step) + ": " + detail),
      step_(step) {}

Vector sgd_step(const Vector& theta, const Vector& g, double eta) {
  require(eta > 0.0, "eta must be positive");
  return theta - eta * g;
}

Vector sgld_step(const Vector& theta, const Vector& g, double eta, const Vector& xi) {
  require(eta > 0.0, "eta must be positive");
  return theta - eta * g + std::sqrt(2.0 * eta) * xi;
}

Vector sgld_step(const Vector& theta, const Vector& g, double eta, Rng& rng) {
  return sgld_step(theta, g, eta, rng.normal_vector(theta.size()));
}

PhasePoint sghmc_step(const Vector& theta, const Vector& momentum, const Vector& g, double eta,
                      const Vector& c_diag, const Vector& m_diag, const Vector& xi) {
  require(eta > 0.0, "eta must be positive");
  require((c_diag.array() > 0.0).all(), "injected noise diagonal must be positive");
  require((m_diag.array() > 0.0).all(), "mass diagonal must be positive");
  const Vector velocity = momentum.cwiseQuotient(m_diag);
  const Vector friction = eta * c_diag;
  const Vector w = (2.0 * c_diag.array()).sqrt().matrix().cwiseProduct(xi);
  PhasePoint next;
  next.momentum = momentum - eta * friction.cwiseProduct(velocity) - eta * (g + w);
  next.theta = theta + eta * next.momentum.cwiseQuotient(m_diag);
  return next;
}

PhasePoint sghmc_step(const Vector& theta, const Vector& momentum, const Vector& g, double eta,
                      const Vector& c_diag, const Vector& m_diag, Rng& rng) {
  return sghmc_step(theta, momentum, g, eta, c_diag, m_diag, rng.normal_vector(theta.size()));
}

Vector isgd_step(const Vector& theta, const Vector& g, const Vector& lambda, const Vector& b_hat,
                 double temperature, const Vector& xi, IsgdStepInfo* info) {
  require((lambda.array() > 0.0).all(), "i-SGD needs strictly positive lambda");
  Vector next(theta.size());
  IsgdStepInfo local;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double c = lambda[j] - b_hat[j];
    if (c < 0.0) {
      c = 0.0;
      ++local.clamped;
    } else {
      const double composite = b_hat[j] + temperature * c;
      const double target = temperature * lambda[j] + (1.0 - temperature) * b_hat[j];
      local.composite_error = std::max(local.composite_error, std::abs(composite - target));
    }
    const double w = std::sqrt(2.0 * temperature * c) * xi[j];
    next[j] = theta[j] - (g[j] + w) / lambda[j];
  }
  if (info) *info = local;
  return next;
}

Vector isgd_step(const Vector& theta, const Vector& g, const Vector& lambda, const Vector& b_hat,
                 double temperature, Rng& rng, IsgdStepInfo* info) {
  return isgd_step(theta, g, lambda, b_hat, temperature, rng.normal_vector(theta.size()), info);
}

SampleChain run_chain(const GradientOracle& oracle, const SamplerConfig& config,
                      const Vector& theta0, const std::optional<IsgdSetup>& isgd) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(oracle.dim());
  require(theta0.size() == d, "initial parameters have the wrong dimension");
  require(theta0.allFinite(), "initial parameters must be finite");

  Vector lambda;
  Vector b_hat;
  double b_mu = 0.0;
  if (config.kind == SamplerKind::isgd) {
    require(isgd.has_value(), "i-SGD needs a noise estimator state");
    const auto& state = isgd->state;
    const noise::LambdaSpec spec = isgd->mode == noise::LambdaMode::slr ? noise::slr_collapse(state)
                                                                       : noise::layerwise(state);
    require(isgd->mode == noise::LambdaMode::slr ||
                static_cast<std::size_t>(state.lambda.size()) == oracle.partition().num_groups(),
            "noise state has " + std::to_string(state.lambda.size()) + " groups, model has " +
                std::to_string(oracle.partition().num_groups()));
    lambda = spec.per_coordinate(oracle.partition());
    if (config.b_tracking == BTracking::zero || state.b_diag.size() != d) {
      require(config.b_tracking != BTracking::frozen || state.b_diag.size() == d,
              "frozen b tracking needs a b_diag of length d");
      b_hat = Vector::Zero(d);
    } else {
      b_hat = state.b_diag;
    }
    b_mu = state.mu;
  }

  Rng rng(config.seed);
  const double sqrt_temp = std::sqrt(config.temperature);
  const Vector m_diag = Vector::Constant(d, config.mass);
  const Vector c_diag = Vector::Constant(d, config.friction_scale / config.eta);

  SampleChain chain;
  chain.config = config;
  chain.samples.resize(static_cast<Eigen::Index>(config.num_samples), d);
  chain.diagnostics.lambda = lambda;

  Vector theta = theta0;
  Vector momentum = Vector::Zero(d);
  const std::size_t total = config.warmup_steps + config.keepevery * config.num_samples;
  std::size_t kept = 0;

  for (std::size_t t = 0; t < total; ++t) {
    const Vector g = oracle.sample(theta, rng);
    double eta = config.eta;
    if (t < config.warmup_steps) {
      const double frac = static_cast<double>(t) / static_cast<double>(config.warmup_steps);
      eta *= config.warmup_anneal + (1.0 - config.warmup_anneal) * frac;
    }

    switch (config.kind) {
      case SamplerKind::sgd:
        theta = sgd_step(theta, g, eta);
        break;
      case SamplerKind::sgld:
        theta = sgld_step(theta, g, eta, sqrt_temp * rng.normal_vector(d));
        break;
      case SamplerKind::sghmc: {
        PhasePoint next = sghmc_step(theta, momentum, g, eta, c_diag, m_diag,
                                     sqrt_temp * rng.normal_vector(d));
        theta = std::move(next.theta);
        momentum = std::move(next.momentum);
        break;
      }
      case SamplerKind::isgd: {
        IsgdStepInfo info;
        theta = isgd_step(theta, g, lambda, b_hat, config.temperature, rng.normal_vector(d), &info);
        chain.diagnostics.clamp_events += info.clamped;
        chain.diagnostics.max_composite_error =
            std::max(chain.diagnostics.max_composite_error, info.composite_error);
        if (config.b_tracking == BTracking::ema) {
          b_hat = b_mu * b_hat + (1.0 - b_mu) * (0.5 * g.cwiseAbs2());
        }
        break;
      }
    }

    // A squared norm that overflows means any quadratic energy is already infinite.
    if (!theta.allFinite() || !std::isfinite(theta.squaredNorm())) {
      chain.diagnostics.total_steps = t + 1;
      throw DivergenceError(t, "sampler " + to_string(config.kind) + ", " + std::to_string(kept) +
                                   " samples kept, " + std::to_string(chain.diagnostics.clamp_events) +
                                   " clamp events");
    }

    if (t >= config.warmup_steps && (t - config.warmup_steps + 1) % config.keepevery == 0) {
      chain.samples.row(static_cast<Eigen::Index>(kept)) = theta.transpose();
      if (config.kind == SamplerKind::isgd) chain.diagnostics.b_trace.push_back(b_hat);
      ++kept;
    }
  }
  chain.diagnostics.total_steps = total;
  return chain;
}

EstimatedChain run_isgd_with_estimation(const GradientOracle& oracle, const SamplerConfig& config,
                                        const noise::EstimationSettings& estimation,
                                        noise::LambdaMode mode, const Vector& theta_start) {
  require(config.kind == SamplerKind::isgd, "estimation schemes apply to the i-SGD sampler");
  Rng est_rng(config.seed ^ kEstimationStream);
  EstimatedChain out;
  out.estimation = noise::estimate_lambdas(oracle, estimation, theta_start, est_rng);
  out.chain = run_chain(oracle, config, out.estimation.theta, IsgdSetup{out.estimation.state, mode});
  return out;
}

}  // namespace isgd::samplers
