#include "isgd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace isgd::oracle {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix fd_hessian(const Model& model, const Vector& theta, const Dataset& data) {
  const Eigen::Index d = theta.size();
  Matrix h(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta[k]));
    Vector up = theta;
    Vector down = theta;
    up[k] += step;
    down[k] -= step;
    h.col(k) = (grad_full(model, up, data) - grad_full(model, down, data)) / (2.0 * step);
  }
  return symmetrized(h);
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianDist

GaussianDist::GaussianDist(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  require(covariance_.rows() == mean_.size() && covariance_.cols() == mean_.size(),
          "covariance shape does not match mean");
  const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
  require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "covariance must be symmetric");
  Eigen::LLT<Matrix> llt(covariance_);
  require(llt.info() == Eigen::Success, "covariance must be positive definite");
  chol_ = llt.matrixL();
}

double GaussianDist::log_density(const Vector& x) const {
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  const double log_det = 2.0 * chol_.diagonal().array().log().sum();
  return -0.5 * (z.squaredNorm() + log_det + static_cast<double>(dim()) * kLog2Pi);
}

Vector GaussianDist::draw(Rng& rng) const { return mean_ + chol_ * rng.normal_vector(dim()); }

Matrix GaussianDist::draws(std::size_t n, Rng& rng) const {
  Matrix out(static_cast<Eigen::Index>(n), dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = draw(rng).transpose();
  return out;
}

GaussianDist conjugate_posterior(const Dataset& data, const Vector& frequencies, double lik_var,
                                 const GaussianDist& prior) {
  require(lik_var > 0.0, "likelihood variance must be positive");
  require(prior.dim() == frequencies.size(), "prior dimension does not match feature count");
  if (data.empty()) return prior;

  const TrigRegression model(frequencies, lik_var);
  const Matrix phi = model.design(data);
  const Eigen::LLT<Matrix> prior_llt(prior.covariance());
  const Matrix prior_precision = prior_llt.solve(Matrix::Identity(prior.dim(), prior.dim()));
  const Matrix precision = symmetrized(prior_precision + phi.transpose() * phi / lik_var);
  const Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
  const Matrix cov = symmetrized(llt.solve(Matrix::Identity(prior.dim(), prior.dim())));
  const Vector rhs = phi.transpose() * data.targets / lik_var + prior_precision * prior.mean();
  return GaussianDist(llt.solve(rhs), cov);
}

double gaussian_kl(const GaussianDist& p, const GaussianDist& q) {
  require(p.dim() == q.dim(), "KL needs distributions of equal dimension");
  const auto& lq = q.cholesky();
  const Matrix a = lq.triangularView<Eigen::Lower>().solve(p.cholesky());
  const Vector diff = lq.triangularView<Eigen::Lower>().solve(q.mean() - p.mean());
  const double log_det_q = 2.0 * lq.diagonal().array().log().sum();
  const double log_det_p = 2.0 * p.cholesky().diagonal().array().log().sum();
  const double kl = 0.5 * (a.squaredNorm() + diff.squaredNorm() - static_cast<double>(p.dim()) +
                           log_det_q - log_det_p);
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Grid oracle

Vector GridDensity::point(std::size_t flat) const {
  Vector x(static_cast<Eigen::Index>(axes.size()));
  for (std::size_t k = axes.size(); k-- > 0;) {
    const std::size_t idx = flat % axes[k].points;
    flat /= axes[k].points;
    x[static_cast<Eigen::Index>(k)] = axes[k].at(idx);
  }
  return x;
}

double GridDensity::weight(std::size_t flat) const {
  double w = 1.0;
  for (std::size_t k = axes.size(); k-- > 0;) {
    const std::size_t idx = flat % axes[k].points;
    flat /= axes[k].points;
    const bool edge = idx == 0 || idx + 1 == axes[k].points;
    w *= axes[k].step() * (edge ? 0.5 : 1.0);
  }
  return w;
}

double GridDensity::integral() const {
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i) total += weight(i) * density[i];
  return total;
}

Vector GridDensity::mean() const {
  Vector m = Vector::Zero(static_cast<Eigen::Index>(axes.size()));
  for (std::size_t i = 0; i < size(); ++i) m += weight(i) * density[i] * point(i);
  return m;
}

Matrix GridDensity::covariance() const {
  const Vector m = mean();
  Matrix c = Matrix::Zero(m.size(), m.size());
  for (std::size_t i = 0; i < size(); ++i) {
    const Vector delta = point(i) - m;
    c += weight(i) * density[i] * delta * delta.transpose();
  }
  return c;
}

GridDensity grid_posterior(const Model& model, const Dataset& data,
                           const std::vector<GridAxis>& axes) {
  require(!axes.empty() && axes.size() <= 3, "grid posterior supports 1 to 3 dimensions");
  require(axes.size() == model.dim(), "one grid axis per parameter");
  std::size_t total = 1;
  for (const auto& a : axes) {
    require(a.points >= 2 && a.hi > a.lo, "each grid axis needs >= 2 points and hi > lo");
    total *= a.points;
  }

  GridDensity grid;
  grid.axes = axes;
  std::vector<double> log_p(total);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < total; ++i) {
    log_p[i] = -neg_log_joint(model, grid.point(i), data);
    max_log = std::max(max_log, log_p[i]);
  }
  grid.density.resize(total);
  for (std::size_t i = 0; i < total; ++i) grid.density[i] = std::exp(log_p[i] - max_log);
  const double z = grid.integral();
  for (double& v : grid.density) v /= z;
  grid.log_evidence = max_log + std::log(z);
  return grid;
}

LaplaceFit laplace_fit(const Model& model, const Dataset& data) {
  Vector theta = Vector::Zero(static_cast<Eigen::Index>(model.dim()));
  double f = neg_log_joint(model, theta, data);
  for (int iter = 0; iter < 200; ++iter) {
    const Vector g = grad_full(model, theta, data);
    if (g.norm() < 1e-10 * (1.0 + std::abs(f))) break;
    const Matrix h = fd_hessian(model, theta, data);
    Eigen::LLT<Matrix> llt(h);
    const Vector dir = llt.info() == Eigen::Success ? Vector(-llt.solve(g)) : Vector(-g);
    double step = 1.0;
    Vector trial = theta + dir;
    double f_trial = neg_log_joint(model, trial, data);
    while (f_trial > f && step > 1e-12) {
      step *= 0.5;
      trial = theta + step * dir;
      f_trial = neg_log_joint(model, trial, data);
    }
    if (f_trial > f) break;
    const bool stalled = (trial - theta).norm() < 1e-14 * (1.0 + theta.norm());
    theta = trial;
    f = f_trial;
    if (stalled) break;
  }
  return {theta, fd_hessian(model, theta, data)};
}

std::vector<GridAxis> laplace_axes(const Model& model, const Dataset& data,
                                   std::size_t points_per_axis, double width) {
  const LaplaceFit fit = laplace_fit(model, data);
  const Eigen::LLT<Matrix> llt(fit.hessian);
  if (llt.info() != Eigen::Success) throw NumericalError("Laplace Hessian is not positive definite");
  const Matrix cov = llt.solve(Matrix::Identity(fit.hessian.rows(), fit.hessian.cols()));
  std::vector<GridAxis> axes;
  for (Eigen::Index k = 0; k < fit.mode.size(); ++k) {
    const double sd = std::sqrt(cov(k, k));
    axes.push_back({fit.mode[k] - width * sd, fit.mode[k] + width * sd, points_per_axis});
  }
  return axes;
}

// ---------------------------------------------------------------------------
// Chain summaries

ChainMoments chain_moments(const Matrix& samples, std::size_t burn) {
  const auto total = static_cast<std::size_t>(samples.rows());
  require(total >= burn + 2, "chain moments need at least two rows after burn-in");
  const auto n = static_cast<Eigen::Index>(total - burn);
  const Matrix x = samples.bottomRows(n);

  ChainMoments out;
  out.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - out.mean.transpose();
  out.covariance = centered.transpose() * centered / static_cast<double>(n - 1);

  const auto batches = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  if (batches < 2) {
    out.std_error = (out.covariance.diagonal() / static_cast<double>(n)).cwiseSqrt();
    return out;
  }
  const Eigen::Index batch_len = n / batches;
  Matrix means(batches, x.cols());
  for (Eigen::Index b = 0; b < batches; ++b) {
    means.row(b) = x.middleRows(b * batch_len, batch_len).colwise().mean();
  }
  const Matrix dev = means.rowwise() - means.colwise().mean();
  const Vector batch_var = dev.cwiseAbs2().colwise().sum().transpose() / static_cast<double>(batches - 1);
  out.std_error = (batch_var / static_cast<double>(batches)).cwiseSqrt();
  return out;
}

double autocorrelation(const Vector& series, std::size_t lag) {
  const auto n = static_cast<std::size_t>(series.size());
  require(lag < n, "lag must be shorter than the series");
  const double m = series.mean();
  const Vector c = series.array() - m;
  const double denom = c.squaredNorm();
  if (denom == 0.0) return 0.0;
  const auto len = static_cast<Eigen::Index>(n - lag);
  return c.head(len).dot(c.segment(static_cast<Eigen::Index>(lag), len)) / denom;
}

double effective_sample_size(const Vector& series) {
  const auto n = static_cast<std::size_t>(series.size());
  require(n >= 2, "effective sample size needs at least two values");
  double sum = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double rho = autocorrelation(series, k);
    if (rho <= 0.0) break;
    sum += rho;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

// ---------------------------------------------------------------------------
// Predictive distributions

PredictivePoint predictive_mc(const Matrix& samples, const Vector& features, double lik_var) {
  require(samples.rows() >= 1, "predictive needs at least one sample");
  require(samples.cols() == features.size(), "feature length does not match parameters");
  const Vector f = samples * features;
  const double mean = f.mean();
  const double spread = (f.array() - mean).square().mean();
  return {mean, lik_var + spread};
}

double predictive_mc_nll(const Matrix& samples, const Vector& features, double lik_var, double y) {
  require(samples.rows() >= 1, "predictive needs at least one sample");
  const Vector f = samples * features;
  const Vector log_terms =
      (-0.5 * (y - f.array()).square() / lik_var - 0.5 * (kLog2Pi + std::log(lik_var))).matrix();
  const double m = log_terms.maxCoeff();
  const double lse = m + std::log((log_terms.array() - m).exp().sum());
  return -(lse - std::log(static_cast<double>(samples.rows())));
}

PredictivePoint predictive_analytic(const GaussianDist& posterior, const Vector& features,
                                    double lik_var) {
  require(features.size() == posterior.dim(), "feature length does not match posterior");
  return {features.dot(posterior.mean()),
          features.dot(posterior.covariance() * features) + lik_var};
}

}  // namespace isgd::oracle
