#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "isgd/core.hpp"

namespace isgd::stable {

inline constexpr double kEulerGamma = 0.5772156649015329;
inline constexpr double kMinAlpha = 0.1;
inline constexpr double kMaxAlpha = 2.0;

/// Symmetric alpha-stable fit, characteristic function exp(-|c t|^alpha),
/// and the Gaussian scale sigma = c / r_opt closest to it in L2.
struct AlphaStableFit {
  double alpha = 2.0;
  double c = 1.0;
  double r_opt = 0.0;
  double sigma = 0.0;

  bool operator==(const AlphaStableFit&) const = default;
};

void to_json(nlohmann::json& j, const AlphaStableFit& fit);
void from_json(const nlohmann::json& j, AlphaStableFit& fit);

/// Default block shape for N samples: n1 = floor(sqrt(N)), n2 = floor(N / n1).
struct BlockShape {
  std::size_t n1;
  std::size_t n2;
};
BlockShape default_blocks(std::size_t num_samples);

/// Tail index from log-moments of block sums of n1 consecutive samples; uses
/// the first n1*n2 samples. Result is clamped to [kMinAlpha, kMaxAlpha].
double estimate_alpha(std::span<const double> samples, std::size_t n1, std::size_t n2);

/// Scale c from the mean log-absolute sample and alpha.
double estimate_c(std::span<const double> samples, double alpha);

/// E_{T ~ N(0,1)}[exp(-|r T|^alpha)] by adaptive quadrature, |error| <= 1e-8.
double expected_exp_term(double r, double alpha);

/// L2 distance between N(0, sigma^2) and the alpha-stable density, up to the
/// sigma-free term and a factor 1/c, as a function of r = c / sigma.
double matching_objective(double r, double alpha);

/// Minimizer of matching_objective over r in [1e-3, 10].
double optimal_r(double alpha);

/// fast: sqrt(2) c (scale matching). Otherwise c / optimal_r(alpha).
double matched_sigma(double c, double alpha, bool fast);

/// Full fit on one sample set. Throws NumericalError for degenerate input.
AlphaStableFit fit(std::span<const double> samples, std::optional<BlockShape> blocks,
                   bool fast);

/// Per-group lambda = sigma^2 / 2 from pooled, centred noise samples.
struct GroupLambdas {
  Vector lambda;
  std::vector<AlphaStableFit> fits;
};
GroupLambdas lambda_alpha(const std::vector<std::vector<double>>& group_samples,
                          std::optional<BlockShape> blocks, bool fast);

}  // namespace isgd::stable
