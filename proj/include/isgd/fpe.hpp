#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "isgd/oracle.hpp"

namespace isgd::fpe {

/// SDE dz = s(z) dt + sqrt(2 eta D(z)) dW with a candidate stationary density
/// rho ~ exp(-phi).
struct FpeProblem {
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> diffusion;
  std::function<double(const Vector&)> potential;
  double eta = 1.0;
};

struct FpeResidual {
  std::vector<oracle::GridAxis> axes;
  /// Residual on the full grid (row-major, last axis fastest); zero within two
  /// points of the boundary, where the nested stencil is undefined.
  std::vector<double> residual;
  /// sqrt(sum residual^2 * cell volume) over the interior.
  double l2_norm = 0.0;
};

/// Evaluates Tr{ grad [ -s^T rho + eta grad^T (D rho) ] } with central
/// differences, rho normalized on the grid. Supports 1 or 2 dimensions.
FpeResidual fpe_residual(const FpeProblem& problem, const std::vector<oracle::GridAxis>& axes);

/// Preconditioned SGD on f(z) = curvature z^2 / 2 with SG noise covariance
/// `noise_var`: drift -P f', diffusion P Sigma P, with eta P = scale / Sigma.
/// The candidate density is exp(-f); scale = 1 makes it stationary.
FpeProblem preconditioned_sgd_1d(double curvature, double noise_var, double eta, double scale);

}  // namespace isgd::fpe
