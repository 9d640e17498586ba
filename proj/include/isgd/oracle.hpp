#pragma once

#include <cstddef>
#include <vector>

#include "isgd/model.hpp"

namespace isgd::oracle {

/// Multivariate normal with a validated, Cholesky-factorizable covariance.
class GaussianDist {
 public:
  GaussianDist(Vector mean, Matrix covariance);

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  /// Lower Cholesky factor L, covariance = L L^T.
  const Matrix& cholesky() const { return chol_; }

  double log_density(const Vector& x) const;
  Vector draw(Rng& rng) const;
  /// n x d matrix of independent draws.
  Matrix draws(std::size_t n, Rng& rng) const;

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
};

/// Exact posterior of the trigonometric regression weights under a Gaussian prior.
GaussianDist conjugate_posterior(const Dataset& data, const Vector& frequencies, double lik_var,
                                 const GaussianDist& prior);

/// KL(p || q) in closed form.
double gaussian_kl(const GaussianDist& p, const GaussianDist& q);

struct GridAxis {
  double lo;
  double hi;
  std::size_t points;

  double step() const { return (hi - lo) / static_cast<double>(points - 1); }
  double at(std::size_t k) const { return lo + step() * static_cast<double>(k); }
};

/// Normalized posterior density tabulated on a tensor grid (row-major, last
/// axis fastest).
struct GridDensity {
  std::vector<GridAxis> axes;
  std::vector<double> density;
  double log_evidence = 0.0;

  std::size_t size() const { return density.size(); }
  Vector point(std::size_t flat) const;
  /// Trapezoid weight of a flat grid index (product of per-axis weights).
  double weight(std::size_t flat) const;
  double integral() const;
  Vector mean() const;
  Matrix covariance() const;
};

/// Brute-force posterior on explicit axes, d <= 3.
GridDensity grid_posterior(const Model& model, const Dataset& data,
                           const std::vector<GridAxis>& axes);

/// Axes spanning MAP +/- width * Laplace standard deviation.
std::vector<GridAxis> laplace_axes(const Model& model, const Dataset& data,
                                   std::size_t points_per_axis, double width = 8.0);

/// Mode found by damped Newton iterations with a finite-difference Hessian.
struct LaplaceFit {
  Vector mode;
  Matrix hessian;
};
LaplaceFit laplace_fit(const Model& model, const Dataset& data);

struct ChainMoments {
  Vector mean;
  Matrix covariance;
  Vector std_error;  // batch-means standard error of the mean
};

/// Moments of rows [burn, n) of a sample matrix.
ChainMoments chain_moments(const Matrix& samples, std::size_t burn = 0);

/// Normalized autocorrelation of a scalar series at a lag.
double autocorrelation(const Vector& series, std::size_t lag);

/// n / (1 + 2 sum_k rho_k), summing until the first non-positive rho.
double effective_sample_size(const Vector& series);

struct PredictivePoint {
  double mean;
  double variance;
};

/// Mixture predictive from parameter samples for a linear-in-features model.
PredictivePoint predictive_mc(const Matrix& samples, const Vector& features, double lik_var);

/// -log of the equal-weight Gaussian mixture density at y.
double predictive_mc_nll(const Matrix& samples, const Vector& features, double lik_var, double y);

PredictivePoint predictive_analytic(const GaussianDist& posterior, const Vector& features,
                                    double lik_var);

}  // namespace isgd::oracle
