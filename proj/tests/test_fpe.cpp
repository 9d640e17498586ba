#include <gtest/gtest.h>

#include <cmath>

#include "isgd/fpe.hpp"

namespace {

using namespace isgd;
using namespace isgd::fpe;

// Preconditioned SGD on f = 1/2 z^T H z with noise covariance S and eta P = scale * S^-1.
FpeProblem sgd_problem_2d(const Matrix& h, const Matrix& s, double eta, double scale) {
  const Matrix p = scale * s.inverse() / eta;
  const Matrix d = p * s * p;
  FpeProblem problem;
  problem.eta = eta;
  problem.drift = [=](const Vector& z) { return Vector(-p * h * z); };
  problem.diffusion = [=](const Vector&) { return d; };
  problem.potential = [=](const Vector& z) { return 0.5 * z.dot(h * z); };
  return problem;
}

std::vector<oracle::GridAxis> square(double half, std::size_t n) { return {{-half, half, n}, {-half, half, n}}; }

TEST(FpeResidual, OneDimensionalSecondOrderConvergence) {
  std::vector<double> norms;
  for (std::size_t n : {101u, 201u, 401u}) {
    norms.push_back(fpe_residual(preconditioned_sgd_1d(2.0, 0.5, 0.05, 1.0), {{-5.0, 5.0, n}}).l2_norm);
  }
  EXPECT_NEAR(norms[0] / norms[1], 4.0, 0.5);
  EXPECT_NEAR(norms[1] / norms[2], 4.0, 0.5);
  const double control = fpe_residual(preconditioned_sgd_1d(2.0, 0.5, 0.05, 2.0), {{-5.0, 5.0, 401}}).l2_norm;
  EXPECT_GT(control, 10.0 * norms[2]);
}

TEST(FpeResidual, TwoDimensionalAnisotropicNoise) {
  Matrix h(2, 2);
  h << 2.0, 0.5, 0.5, 1.0;
  Matrix s(2, 2);
  s << 1.0, 0.3, 0.3, 0.5;
  const auto coarse = fpe_residual(sgd_problem_2d(h, s, 0.1, 1.0), square(5.0, 61));
  const auto fine = fpe_residual(sgd_problem_2d(h, s, 0.1, 1.0), square(5.0, 121));
  EXPECT_NEAR(coarse.l2_norm / fine.l2_norm, 4.0, 0.6);
  const auto control = fpe_residual(sgd_problem_2d(h, s, 0.1, 0.5), square(5.0, 121));
  EXPECT_GT(control.l2_norm, 10.0 * fine.l2_norm);
}

TEST(FpeResidual, WrongPreconditionerShapeIsNotStationary) {
  // eta P = I instead of S^-1 with anisotropic S: the drift no longer balances diffusion.
  Matrix h(2, 2);
  h << 1.0, 0.0, 0.0, 1.0;
  Matrix s(2, 2);
  s << 1.0, 0.0, 0.0, 4.0;
  const double eta = 0.1;
  const auto good = fpe_residual(sgd_problem_2d(h, s, eta, 1.0), square(5.0, 121));
  FpeProblem bad = sgd_problem_2d(h, s, eta, 1.0);
  const Matrix p = Matrix::Identity(2, 2) / eta;
  bad.drift = [=](const Vector& z) { return Vector(-p * h * z); };
  bad.diffusion = [=](const Vector&) { return Matrix(p * s * p); };
  EXPECT_GT(fpe_residual(bad, square(5.0, 121)).l2_norm, 10.0 * good.l2_norm);
}

TEST(FpeResidual, BoundaryBandIsZero) {
  const auto r = fpe_residual(preconditioned_sgd_1d(1.0, 1.0, 0.1, 2.0), {{-4.0, 4.0, 41}});
  ASSERT_EQ(r.residual.size(), 41u);
  EXPECT_EQ(r.residual[0], 0.0);
  EXPECT_EQ(r.residual[1], 0.0);
  EXPECT_EQ(r.residual[40], 0.0);
  EXPECT_NE(r.residual[20], 0.0);
}

TEST(FpeResidual, Validates) {
  const auto problem = preconditioned_sgd_1d(1.0, 1.0, 0.1, 1.0);
  EXPECT_THROW(fpe_residual(problem, {{-1.0, 1.0, 4}}), ContractViolation);
  EXPECT_THROW(fpe_residual(problem, {{-1.0, 1.0, 9}, {-1.0, 1.0, 9}, {-1.0, 1.0, 9}}), ContractViolation);
  EXPECT_THROW(fpe_residual(problem, {{-1.0, 1.0, 9}, {-1.0, 1.0, 9}}), ContractViolation);
  EXPECT_THROW(preconditioned_sgd_1d(-1.0, 1.0, 0.1, 1.0), ContractViolation);
}

}  // namespace
