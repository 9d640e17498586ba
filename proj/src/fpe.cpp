#include "isgd/fpe.hpp"

#include <cmath>
#include <limits>

namespace isgd::fpe {
namespace {

struct GridIndex {
  std::vector<std::size_t> strides;
  std::vector<oracle::GridAxis> axes;

  explicit GridIndex(const std::vector<oracle::GridAxis>& a) : strides(a.size()), axes(a) {
    std::size_t stride = 1;
    for (std::size_t k = a.size(); k-- > 0;) {
      strides[k] = stride;
      stride *= a[k].points;
    }
  }

  std::size_t coord(std::size_t flat, std::size_t axis) const {
    return (flat / strides[axis]) % axes[axis].points;
  }

  /// True if the point is at least `margin` cells from every boundary.
  bool interior(std::size_t flat, std::size_t margin) const {
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const std::size_t c = coord(flat, k);
      if (c < margin || c + margin >= axes[k].points) return false;
    }
    return true;
  }
};

}  // namespace

FpeResidual fpe_residual(const FpeProblem& problem, const std::vector<oracle::GridAxis>& axes) {
  const std::size_t dim = axes.size();
  require(dim == 1 || dim == 2, "Fokker-Planck residual supports 1 or 2 dimensions");
  require(problem.drift && problem.diffusion && problem.potential, "problem fields must be set");
  for (const auto& a : axes) {
    require(a.points >= 5, "grid too coarse: need at least 5 points per dimension");
    require(a.hi > a.lo, "grid axis needs hi > lo");
  }

  oracle::GridDensity rho;
  rho.axes = axes;
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.points;
  const GridIndex grid(axes);

  std::vector<double> neg_phi(total);
  double max_neg_phi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < total; ++i) {
    neg_phi[i] = -problem.potential(rho.point(i));
    max_neg_phi = std::max(max_neg_phi, neg_phi[i]);
  }
  rho.density.resize(total);
  for (std::size_t i = 0; i < total; ++i) rho.density[i] = std::exp(neg_phi[i] - max_neg_phi);
  const double z = rho.integral();
  for (double& v : rho.density) v /= z;

  // drift_rho[i][k] = s_k rho, diff_rho[i](j, k) = D_jk rho
  std::vector<Vector> drift_rho(total);
  std::vector<Matrix> diff_rho(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Vector x = rho.point(i);
    const Vector s = problem.drift(x);
    const Matrix d = problem.diffusion(x);
    require(static_cast<std::size_t>(s.size()) == dim, "drift has the wrong dimension");
    require(static_cast<std::size_t>(d.rows()) == dim && static_cast<std::size_t>(d.cols()) == dim,
            "diffusion has the wrong shape");
    drift_rho[i] = s * rho.density[i];
    diff_rho[i] = d * rho.density[i];
  }

  // Flux F_k = -s_k rho + eta sum_j d/dz_j (D_jk rho), on points one cell in.
  std::vector<Vector> flux(total, Vector::Zero(static_cast<Eigen::Index>(dim)));
  for (std::size_t i = 0; i < total; ++i) {
    if (!grid.interior(i, 1)) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      double div = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const std::size_t up = i + grid.strides[j];
        const std::size_t down = i - grid.strides[j];
        const auto jj = static_cast<Eigen::Index>(j);
        const auto kk = static_cast<Eigen::Index>(k);
        div += (diff_rho[up](jj, kk) - diff_rho[down](jj, kk)) / (2.0 * axes[j].step());
      }
      flux[i][static_cast<Eigen::Index>(k)] = -drift_rho[i][static_cast<Eigen::Index>(k)] + problem.eta * div;
    }
  }

  FpeResidual out;
  out.axes = axes;
  out.residual.assign(total, 0.0);
  double cell = 1.0;
  for (const auto& a : axes) cell *= a.step();
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    if (!grid.interior(i, 2)) continue;
    double r = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      r += (flux[i + grid.strides[k]][kk] - flux[i - grid.strides[k]][kk]) / (2.0 * axes[k].step());
    }
    out.residual[i] = r;
    sum_sq += r * r * cell;
  }
  out.l2_norm = std::sqrt(sum_sq);
  return out;
}

FpeProblem preconditioned_sgd_1d(double curvature, double noise_var, double eta, double scale) {
  require(curvature > 0.0 && noise_var > 0.0 && eta > 0.0 && scale > 0.0,
          "curvature, noise variance, eta and scale must be positive");
  const double p = scale / (eta * noise_var);
  FpeProblem problem;
  problem.eta = eta;
  problem.drift = [=](const Vector& z) { return Vector::Constant(1, -p * curvature * z[0]); };
  problem.diffusion = [=](const Vector&) { return Matrix::Constant(1, 1, p * noise_var * p); };
  problem.potential = [=](const Vector& z) { return 0.5 * curvature * z[0] * z[0]; };
  return problem;
}

}  // namespace isgd::fpe
