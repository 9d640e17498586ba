#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isgd/gradient.hpp"
#include "isgd/noise.hpp"

namespace isgd::samplers {

enum class SamplerKind { sgd, sgld, sghmc, isgd };

std::string to_string(SamplerKind kind);
SamplerKind parse_kind(const std::string& text);

/// How the i-SGD sampler tracks the diagonal SG-noise estimate b during a run.
enum class BTracking {
  ema,     // EMA of g_j^2 / 2 seeded from the estimator state
  frozen,  // keep the estimator state's b_diag fixed
  zero,    // b = 0: inject the full 2 tau Lambda
};

std::string to_string(BTracking mode);
BTracking parse_b_tracking(const std::string& text);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::isgd;
  double eta = 1e-3;          // sgd / sgld / sghmc step size
  double temperature = 1.0;   // scales injected noise covariance
  std::size_t batch_size = 128;
  std::size_t warmup_steps = 2000;
  std::size_t keepevery = 2000;
  std::size_t num_samples = 100;
  std::uint64_t seed = 0;
  /// Step-size multiplier at the start of warm-up, decaying linearly to 1.
  /// Applies to the eta-driven samplers; i-SGD keeps its analytic step.
  double warmup_anneal = 10.0;
  /// SGHMC: diagonal mass and injected-noise scale. C = friction_scale / eta,
  /// friction A = eta * C.
  double mass = 1.0;
  double friction_scale = 0.01;
  BTracking b_tracking = BTracking::ema;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

void to_json(nlohmann::json& j, const SamplerConfig& config);

/// Counters and traces collected while a chain runs.
struct ChainDiagnostics {
  std::size_t total_steps = 0;
  std::size_t clamp_events = 0;  // coordinates where lambda - b_hat < 0 was floored
  /// Largest |b_hat_j + tau c_j - (tau lambda_j + (1 - tau) b_hat_j)| over unclamped
  /// coordinates and steps; zero up to rounding when the update is consistent.
  double max_composite_error = 0.0;
  Vector lambda;                            // per-coordinate lambda used (i-SGD)
  std::vector<Vector> b_trace;              // b_hat at each kept sample (i-SGD)
};

void to_json(nlohmann::json& j, const ChainDiagnostics& diag);

struct SampleChain {
  Matrix samples;  // num_samples x d
  SamplerConfig config;
  ChainDiagnostics diagnostics;
};

/// Raised when the parameters become non-finite.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(std::size_t step, const std::string& detail);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Update rules. `xi` is a standard-normal draw of length d; passing zeros gives
// the deterministic part of each step.

/// theta - eta g.
Vector sgd_step(const Vector& theta, const Vector& g, double eta);

/// theta - eta g + sqrt(2 eta) xi, i.e. theta - eta (g + w) with w ~ N(0, 2 / eta).
Vector sgld_step(const Vector& theta, const Vector& g, double eta, const Vector& xi);
Vector sgld_step(const Vector& theta, const Vector& g, double eta, Rng& rng);

struct PhasePoint {
  Vector theta;
  Vector momentum;
};

/// Momentum-first symplectic Euler with friction A = eta C and injected noise
/// w ~ N(0, 2C):
///   r' = r - eta A M^-1 r - eta (g + w),   theta' = theta + eta M^-1 r'.
PhasePoint sghmc_step(const Vector& theta, const Vector& momentum, const Vector& g, double eta,
                      const Vector& c_diag, const Vector& m_diag, const Vector& xi);
PhasePoint sghmc_step(const Vector& theta, const Vector& momentum, const Vector& g, double eta,
                      const Vector& c_diag, const Vector& m_diag, Rng& rng);

struct IsgdStepInfo {
  std::size_t clamped = 0;
  double composite_error = 0.0;
};

/// Per coordinate j: c_j = max(lambda_j - b_j, 0), w_j ~ N(0, 2 tau c_j),
/// theta'_j = theta_j - (g_j + w_j) / lambda_j. `lambda` and `b_hat` are per
/// coordinate.
Vector isgd_step(const Vector& theta, const Vector& g, const Vector& lambda, const Vector& b_hat,
                 double temperature, const Vector& xi, IsgdStepInfo* info = nullptr);
Vector isgd_step(const Vector& theta, const Vector& g, const Vector& lambda, const Vector& b_hat,
                 double temperature, Rng& rng, IsgdStepInfo* info = nullptr);

/// Noise setup for i-SGD chains.
struct IsgdSetup {
  noise::NoiseEstimatorState state;
  noise::LambdaMode mode = noise::LambdaMode::layerwise;
};

/// Warm-up for `warmup_steps` steps without recording, then one sample every
/// `keepevery` steps until `num_samples` are stored. Deterministic in config.seed.
SampleChain run_chain(const GradientOracle& oracle, const SamplerConfig& config,
                      const Vector& theta0, const std::optional<IsgdSetup>& isgd = std::nullopt);

/// i-SGD with the noise levels estimated first by the given scheme. The
/// estimation uses its own stream derived from config.seed.
struct EstimatedChain {
  noise::EstimationResult estimation;
  SampleChain chain;
};
EstimatedChain run_isgd_with_estimation(const GradientOracle& oracle, const SamplerConfig& config,
                                        const noise::EstimationSettings& estimation,
                                        noise::LambdaMode mode, const Vector& theta_start);

}  // namespace isgd::samplers
