#include "isgd/stable.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace isgd::stable {
namespace {

constexpr double kRMin = 1e-3;
constexpr double kRMax = 10.0;
constexpr std::size_t kScanPoints = 100;
constexpr double kRTol = 1e-6;
// Standard normal mass beyond |T| = 8 is below 1.3e-15.
constexpr double kTailCut = 8.0;

/// Copies the first n1*n2 samples and nudges exact zeros (single samples and
/// block sums) by a tiny deterministic amount so every logarithm is finite.
std::vector<double> jittered(std::span<const double> samples, std::size_t n1, std::size_t n2,
                             bool check_blocks) {
  const std::size_t n = n1 * n2;
  std::vector<double> w(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n));
  double mean_abs = 0.0;
  std::size_t nonzero = 0;
  for (double v : w) {
    if (!std::isfinite(v)) throw NumericalError("non-finite noise sample");
    if (v != 0.0) {
      mean_abs += std::abs(v);
      ++nonzero;
    }
  }
  if (nonzero == 0) throw NumericalError("all noise samples are exactly zero");
  const double eps = 1e-9 * mean_abs / static_cast<double>(nonzero);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) w[i] = (i % 2 == 0) ? eps : -eps;
  }
  if (!check_blocks) return w;
  for (int attempt = 0; attempt < 2; ++attempt) {
    bool clean = true;
    for (std::size_t b = 0; b < n2; ++b) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n1; ++j) sum += w[b * n1 + j];
      if (sum == 0.0) {
        w[b * n1] += eps * (1.0 + std::abs(w[b * n1]));
        clean = false;
      }
    }
    if (clean) return w;
  }
  throw NumericalError("block sums remain zero after jitter");
}

double mean_log_abs(std::span<const double> w) {
  double acc = 0.0;
  for (double v : w) acc += std::log(std::abs(v));
  return acc / static_cast<double>(w.size());
}

double golden_section_min(double lo, double hi, double alpha) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = matching_objective(x1, alpha);
  double f2 = matching_objective(x2, alpha);
  while (b - a > kRTol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = matching_objective(x1, alpha);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = matching_objective(x2, alpha);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

void to_json(nlohmann::json& j, const AlphaStableFit& fit) {
  j = nlohmann::json{{"alpha", fit.alpha}, {"c", fit.c}, {"r_opt", fit.r_opt}, {"sigma", fit.sigma}};
}

void from_json(const nlohmann::json& j, AlphaStableFit& fit) {
  j.at("alpha").get_to(fit.alpha);
  j.at("c").get_to(fit.c);
  j.at("r_opt").get_to(fit.r_opt);
  j.at("sigma").get_to(fit.sigma);
}

BlockShape default_blocks(std::size_t num_samples) {
  const auto n1 = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(num_samples))));
  return {n1, n1 == 0 ? 0 : num_samples / n1};
}

double estimate_alpha(std::span<const double> samples, std::size_t n1, std::size_t n2) {
  require(n1 >= 2 && n2 >= 2, "alpha estimation needs n1 >= 2 and n2 >= 2");
  require(samples.size() >= n1 * n2, "fewer samples than n1 * n2");
  const std::vector<double> w = jittered(samples, n1, n2, true);

  double block_term = 0.0;
  for (std::size_t b = 0; b < n2; ++b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n1; ++j) sum += w[b * n1 + j];
    block_term += std::log(std::abs(sum));
  }
  block_term /= static_cast<double>(n2);

  const double inv_alpha = (block_term - mean_log_abs(w)) / std::log(static_cast<double>(n1));
  if (!(inv_alpha > 1.0 / kMaxAlpha)) return kMaxAlpha;
  return std::clamp(1.0 / inv_alpha, kMinAlpha, kMaxAlpha);
}

double estimate_c(std::span<const double> samples, double alpha) {
  require(alpha > 0.0 && alpha <= kMaxAlpha, "alpha must lie in (0, 2]");
  require(!samples.empty(), "scale estimation needs samples");
  const std::vector<double> w = jittered(samples, samples.size(), 1, false);
  return std::exp(mean_log_abs(w) - (1.0 / alpha - 1.0) * kEulerGamma);
}

double expected_exp_term(double r, double alpha) {
  require(r > 0.0, "r must be positive");
  require(alpha > 0.0 && alpha <= kMaxAlpha, "alpha must lie in (0, 2]");
  const double norm = 2.0 / std::sqrt(2.0 * std::numbers::pi);
  // Symmetric integrand on [0, 8]; the |T|^alpha cusp sits at the left endpoint,
  // where double-exponential quadrature keeps full accuracy.
  auto integrand = [&](double t) { return norm * std::exp(-0.5 * t * t - std::pow(r * t, alpha)); };
  double error = 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule;
  const double value = rule.integrate(integrand, 0.0, kTailCut, 1e-13, &error);
  if (error > 1e-9) {
    throw NumericalError("quadrature did not converge for r=" + std::to_string(r) +
                         " alpha=" + std::to_string(alpha));
  }
  return value;
}

double matching_objective(double r, double alpha) {
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  const double sqrt_2pi = std::sqrt(2.0 * std::numbers::pi);
  return r * (sqrt_pi - 2.0 * sqrt_2pi * expected_exp_term(r, alpha));
}

double optimal_r(double alpha) {
  require(alpha > 0.0 && alpha <= kMaxAlpha, "alpha must lie in (0, 2]");
  const double step = (kRMax - kRMin) / static_cast<double>(kScanPoints - 1);
  std::size_t best = 0;
  double best_value = matching_objective(kRMin, alpha);
  for (std::size_t k = 1; k < kScanPoints; ++k) {
    const double v = matching_objective(kRMin + step * static_cast<double>(k), alpha);
    if (v < best_value) {
      best_value = v;
      best = k;
    }
  }
  if (best == 0 || best == kScanPoints - 1) {
    std::ostringstream msg;
    msg << "optimal_r: minimum at the edge of [" << kRMin << ", " << kRMax << "] for alpha=" << alpha
        << " (objective " << best_value << ")";
    throw NumericalError(msg.str());
  }
  const double lo = kRMin + step * static_cast<double>(best - 1);
  const double hi = kRMin + step * static_cast<double>(best + 1);
  return golden_section_min(lo, hi, alpha);
}

double matched_sigma(double c, double alpha, bool fast) {
  require(c > 0.0, "scale c must be positive");
  if (fast) return std::sqrt(2.0) * c;
  return c / optimal_r(alpha);
}

AlphaStableFit fit(std::span<const double> samples, std::optional<BlockShape> blocks, bool fast) {
  const BlockShape shape = blocks.value_or(default_blocks(samples.size()));
  AlphaStableFit out;
  out.alpha = estimate_alpha(samples, shape.n1, shape.n2);
  out.c = estimate_c(samples.first(shape.n1 * shape.n2), out.alpha);
  out.r_opt = fast ? 1.0 / std::sqrt(2.0) : optimal_r(out.alpha);
  out.sigma = fast ? matched_sigma(out.c, out.alpha, true) : out.c / out.r_opt;
  return out;
}

GroupLambdas lambda_alpha(const std::vector<std::vector<double>>& group_samples,
                          std::optional<BlockShape> blocks, bool fast) {
  GroupLambdas out;
  out.lambda.resize(static_cast<Eigen::Index>(group_samples.size()));
  for (std::size_t p = 0; p < group_samples.size(); ++p) {
    const auto& samples = group_samples[p];
    const std::size_t needed = blocks ? blocks->n1 * blocks->n2 : 4;
    if (samples.size() < needed) {
      throw ContractViolation("group " + std::to_string(p) + " has " +
                              std::to_string(samples.size()) + " noise samples, needs " +
                              std::to_string(needed));
    }
    const AlphaStableFit f = fit(samples, blocks, fast);
    out.lambda[static_cast<Eigen::Index>(p)] = 0.5 * f.sigma * f.sigma;
    out.fits.push_back(f);
  }
  return out;
}

}  // namespace isgd::stable
