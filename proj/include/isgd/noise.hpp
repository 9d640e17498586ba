#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isgd/gradient.hpp"
#include "isgd/model.hpp"
#include "isgd/stable.hpp"

namespace isgd::noise {

/// Lower bound applied to every lambda before it is used as an inverse step.
inline constexpr double kLambdaFloor = 1e-12;

/// Filtered per-layer noise levels and the diagonal SG-noise estimate for one chain.
struct NoiseEstimatorState {
  Vector lambda;  // one entry per layer group
  Vector b_diag;  // length d, non-negative
  double mu = 0.5;
  std::size_t step_count = 0;

  bool operator==(const NoiseEstimatorState& other) const;
};

void to_json(nlohmann::json& j, const NoiseEstimatorState& state);
void from_json(const nlohmann::json& j, NoiseEstimatorState& state);

enum class LambdaMode { layerwise, slr };

/// Either one lambda per group or a single scalar shared by all groups.
struct LambdaSpec {
  LambdaMode mode = LambdaMode::layerwise;
  Vector values;

  /// Per-coordinate lambda (length d), floored at kLambdaFloor.
  Vector per_coordinate(const LayerPartition& partition) const;
};

/// Per group: ||g^(p)||^2 / 2.
Vector lambda_gaussian_instant(const Vector& g, const LayerPartition& partition);

/// Per group: max_j g_j^2.
Vector lambda_naive_max(const Vector& g, const LayerPartition& partition);

/// lambda <- mu * lambda + (1 - mu) * fresh. A state with step_count == 0 has
/// no history and takes `fresh` directly. Increments step_count.
NoiseEstimatorState ema_update(NoiseEstimatorState state, const Vector& fresh, double mu);

/// Same filter applied to the b-diagonal track with the instantaneous proxy g_j^2 / 2.
void ema_update_b(NoiseEstimatorState& state, const Vector& g);

/// Half the per-coordinate sample variance of `draws` independent gradients at theta.
Vector empirical_b_diag(const GradientOracle& oracle, const Vector& theta, std::size_t draws,
                        Rng& rng);
Vector empirical_b_diag(const Model& model, const Vector& theta, const Dataset& data,
                        std::size_t draws, std::size_t batch_size, std::uint64_t seed);

LambdaSpec slr_collapse(const NoiseEstimatorState& state);
LambdaSpec layerwise(const NoiseEstimatorState& state);

enum class Estimator { gaussian, alpha };
enum class Scheme { a, b, c };

std::string to_string(Estimator e);
std::string to_string(Scheme s);
Estimator parse_estimator(const std::string& text);
Scheme parse_scheme(const std::string& text);

struct EstimationSettings {
  Estimator estimator = Estimator::alpha;
  Scheme scheme = Scheme::c;
  double mu = 0.5;
  /// Gradient draws used for estimation (scheme c) or SGD steps (schemes a, b).
  std::size_t steps = 1000;
  /// Plain-SGD rate for schemes a and b.
  double train_lr = 1e-3;
  /// Scale matching sigma = sqrt(2) c instead of the optimal-r search.
  bool fast_matching = false;
  /// Centering momentum of the running gradient mean used by the alpha route
  /// while parameters move (schemes a, b).
  double center_momentum = 0.9;
  std::optional<stable::BlockShape> blocks;
};

struct EstimationResult {
  NoiseEstimatorState state;
  Vector theta;                             // parameters after estimation
  std::vector<Vector> lambda_trace;         // filtered lambda after each step (gaussian route)
  std::vector<stable::AlphaStableFit> fits; // one per group (alpha route)
};

/// Runs one of the three estimation schemes:
///   a: train with SGD from a fresh initialisation, filtering estimates on the way;
///   b: same, continuing from a pre-trained theta, with a fresh filter;
///   c: freeze theta and estimate from `steps` minibatch gradients.
EstimationResult estimate_lambdas(const GradientOracle& oracle, const EstimationSettings& settings,
                                  const Vector& theta_start, Rng& rng);

}  // namespace isgd::noise
