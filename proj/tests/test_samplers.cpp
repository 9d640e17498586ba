#include <gtest/gtest.h>

#include <cmath>

#include "isgd/gradient.hpp"
#include "isgd/oracle.hpp"
#include "isgd/samplers.hpp"

namespace {

using namespace isgd;
using namespace isgd::samplers;

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

noise::NoiseEstimatorState state_with(const Vector& lambda, const Vector& b) {
  noise::NoiseEstimatorState s;
  s.lambda = lambda;
  s.b_diag = b;
  return s;
}

TEST(SgdStep, ZeroGradientIsFixedPoint) {
  const Vector theta = vec({1.0, -2.0});
  EXPECT_EQ(sgd_step(theta, Vector::Zero(2), 0.1), theta);
  EXPECT_EQ(sgd_step(theta, vec({1.0, 1.0}), 0.5), vec({0.5, -2.5}));
  EXPECT_THROW(sgd_step(theta, theta, 0.0), ContractViolation);
}

TEST(SgdStep, MonotoneDescentOnQuadratic) {
  Matrix h(2, 2);
  h << 3.0, 1.0, 1.0, 2.0;
  const QuadraticPotential quad(vec({1.0, 1.0}), h);
  const Dataset none;
  Vector theta = vec({-3.0, 4.0});
  double f = neg_log_joint(quad, theta, none);
  for (int k = 0; k < 100; ++k) {
    theta = sgd_step(theta, grad_full(quad, theta, none), 0.3);  // L < 3.62, eta < 2 / L
    const double next = neg_log_joint(quad, theta, none);
    EXPECT_LE(next, f);
    f = next;
  }
}

TEST(SgldStep, ZeroNoiseMatchesSgd) {
  const Vector theta = vec({0.3, 0.7});
  const Vector g = vec({2.0, -1.0});
  EXPECT_EQ(sgld_step(theta, g, 0.01, Vector::Zero(2)), sgd_step(theta, g, 0.01));
  EXPECT_NEAR((sgld_step(theta, g, 0.01, vec({1.0, 0.0})) - sgd_step(theta, g, 0.01))[0], std::sqrt(0.02), 1e-15);
}

TEST(SgldStep, SameSeedSameTrajectory) {
  Rng a(4);
  Rng b(4);
  Vector ta = Vector::Zero(3);
  Vector tb = Vector::Zero(3);
  for (int k = 0; k < 100; ++k) {
    ta = sgld_step(ta, ta, 0.01, a);
    tb = sgld_step(tb, tb, 0.01, b);
  }
  EXPECT_EQ(ta, tb);
}

TEST(SghmcStep, MatchesStatedUpdate) {
  const Vector theta = vec({0.5, -0.5});
  const Vector r = vec({1.0, 2.0});
  const Vector g = vec({0.2, -0.1});
  const Vector c = vec({3.0, 4.0});
  const Vector m = vec({2.0, 1.0});
  const Vector xi = vec({0.7, -1.3});
  const double eta = 0.05;
  const PhasePoint next = sghmc_step(theta, r, g, eta, c, m, xi);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double w = std::sqrt(2.0 * c[j]) * xi[j];
    const double r_next = r[j] - eta * (eta * c[j]) * r[j] / m[j] - eta * (g[j] + w);
    EXPECT_NEAR(next.momentum[j], r_next, 1e-15);
    EXPECT_NEAR(next.theta[j], theta[j] + eta * r_next / m[j], 1e-15);
  }
  EXPECT_THROW(sghmc_step(theta, r, g, eta, vec({0.0, 1.0}), m, xi), ContractViolation);
}

TEST(SghmcStep, FrictionlessEnergyDriftIsFirstOrder) {
  // Without friction and noise the update is symplectic Euler; its energy error
  // stays bounded by O(eta) over many steps, while a leapfrog reference is O(eta^2).
  const double k = 1.0;
  auto energy = [&](double q, double p) { return 0.5 * k * q * q + 0.5 * p * p; };
  for (double eta : {0.1, 0.05}) {
    // A vanishing friction parameter stands in for A = 0.
    const Vector tiny = Vector::Constant(1, 1e-300);
    Vector q = vec({1.0});
    Vector p = vec({0.0});
    double worst = 0.0;
    double lq = 1.0;
    double lp = 0.0;
    double leap_worst = 0.0;
    const double e0 = energy(1.0, 0.0);
    for (int s = 0; s < 1000; ++s) {
      const PhasePoint next = sghmc_step(q, p, k * q, eta, tiny, Vector::Ones(1), Vector::Zero(1));
      q = next.theta;
      p = next.momentum;
      worst = std::max(worst, std::abs(energy(q[0], p[0]) - e0));
      lp -= 0.5 * eta * k * lq;
      lq += eta * lp;
      lp -= 0.5 * eta * k * lq;
      leap_worst = std::max(leap_worst, std::abs(energy(lq, lp) - e0));
    }
    EXPECT_LE(worst, 1.0 * eta);
    EXPECT_GT(worst, leap_worst);
    EXPECT_LE(leap_worst, eta * eta);
  }
}

TEST(IsgdStep, IsotropicNoiseMeansNoInjection) {
  const Vector theta = vec({1.0, 2.0, 3.0});
  const Vector g = vec({4.0, -2.0, 1.0});
  const Vector lambda = vec({2.0, 2.0, 8.0});
  IsgdStepInfo info;
  const Vector next = isgd_step(theta, g, lambda, lambda, 1.0, vec({5.0, -5.0, 5.0}), &info);
  EXPECT_EQ(next, (theta.array() - g.array() / lambda.array()).matrix());
  EXPECT_EQ(info.clamped, 0u);
  EXPECT_EQ(info.composite_error, 0.0);
}

TEST(IsgdStep, InjectsTopUpAndCountsClamps) {
  const Vector theta = Vector::Zero(2);
  const Vector g = Vector::Zero(2);
  const Vector lambda = vec({5.0, 5.0});
  const Vector b = vec({1.0, 7.0});
  IsgdStepInfo info;
  const Vector next = isgd_step(theta, g, lambda, b, 0.5, vec({1.0, 1.0}), &info);
  EXPECT_NEAR(next[0], -std::sqrt(2.0 * 0.5 * 4.0) / 5.0, 1e-15);
  EXPECT_EQ(next[1], 0.0);
  EXPECT_EQ(info.clamped, 1u);
  EXPECT_THROW(isgd_step(theta, g, vec({1.0, 0.0}), b, 1.0, Vector::Zero(2)), ContractViolation);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.warmup_steps, 2000u);
  EXPECT_EQ(c.keepevery, 2000u);
  EXPECT_EQ(c.num_samples, 100u);
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = SamplerConfig{};
  c.temperature = 1.5;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = SamplerConfig{};
  c.keepevery = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = SamplerConfig{};
  c.eta = -1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(RunChain, SingleStepRecordsOneSample) {
  const QuadraticPotential quad(Vector::Zero(2), Matrix::Identity(2, 2));
  const Dataset none;
  const ExactGradient grad(quad, none);
  SamplerConfig c;
  c.kind = SamplerKind::sgld;
  c.eta = 0.1;
  c.warmup_steps = 0;
  c.keepevery = 1;
  c.num_samples = 1;
  c.seed = 11;
  const Vector start = vec({1.0, -1.0});
  const SampleChain chain = run_chain(grad, c, start);
  ASSERT_EQ(chain.samples.rows(), 1);
  Rng rng(11);
  const Vector expected = sgld_step(start, grad.exact(start), 0.1, rng.normal_vector(2));
  EXPECT_EQ(Vector(chain.samples.row(0).transpose()), expected);
  EXPECT_EQ(chain.diagnostics.total_steps, 1u);
}

TEST(RunChain, DeterministicInSeed) {
  const Vector freqs = TrigRegression::default_frequencies(2);
  const TrigRegression model(freqs, 0.1);
  const Dataset data = make_toy_dataset(100, Vector::Ones(2), freqs, 0.1, 1);
  const MinibatchGradient grad(model, data, 10);
  for (SamplerKind kind : {SamplerKind::sgd, SamplerKind::sgld, SamplerKind::sghmc, SamplerKind::isgd}) {
    SamplerConfig c;
    c.kind = kind;
    c.eta = 1e-4;
    c.warmup_steps = 50;
    c.keepevery = 5;
    c.num_samples = 20;
    c.seed = 3;
    std::optional<IsgdSetup> setup;
    if (kind == SamplerKind::isgd) setup = IsgdSetup{state_with(vec({5000.0}), Vector::Zero(2)), noise::LambdaMode::layerwise};
    const SampleChain a = run_chain(grad, c, Vector::Zero(2), setup);
    const SampleChain b = run_chain(grad, c, Vector::Zero(2), setup);
    EXPECT_EQ(a.samples, b.samples) << to_string(kind);
    EXPECT_TRUE(a.samples.allFinite());
    c.seed = 4;
    EXPECT_NE(run_chain(grad, c, Vector::Zero(2), setup).samples, a.samples) << to_string(kind);
  }
}

TEST(RunChain, IsgdNeedsState) {
  const QuadraticPotential quad(Vector::Zero(2), Matrix::Identity(2, 2));
  const Dataset none;
  const ExactGradient grad(quad, none);
  SamplerConfig c;
  c.kind = SamplerKind::isgd;
  EXPECT_THROW(run_chain(grad, c, Vector::Zero(2)), ContractViolation);
  const IsgdSetup wrong{state_with(vec({1.0, 1.0}), Vector::Zero(2)), noise::LambdaMode::layerwise};
  EXPECT_THROW(run_chain(grad, c, Vector::Zero(2), wrong), ContractViolation);
}

TEST(RunChain, DivergenceReportsStep) {
  const QuadraticPotential quad(Vector::Zero(1), Matrix::Constant(1, 1, 10.0));
  const Dataset none;
  const ExactGradient grad(quad, none);
  SamplerConfig c;
  c.kind = SamplerKind::sgd;
  c.eta = 1.0;  // |1 - eta h| = 9
  c.warmup_steps = 0;
  c.keepevery = 1000;
  c.num_samples = 10;
  try {
    run_chain(grad, c, vec({1.0}));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    // Flagged once theta^2 overflows, long before theta itself does.
    double x = 1.0;
    std::size_t expected = 0;
    for (x = -9.0 * x; std::isfinite(x * x); x = -9.0 * x) ++expected;
    EXPECT_EQ(e.step(), expected);
    EXPECT_LT(e.step(), 200u);
  }
}

TEST(RunChain, LowTemperatureConcentrates) {
  const QuadraticPotential quad(Vector::Zero(2), Matrix::Identity(2, 2));
  const Dataset none;
  const SyntheticNoiseGradient grad(quad, none, vec({1.0, 1.0}));
  SamplerConfig c;
  c.kind = SamplerKind::isgd;
  c.warmup_steps = 1000;
  c.keepevery = 10;
  c.num_samples = 2000;
  c.b_tracking = BTracking::frozen;
  const IsgdSetup setup{state_with(vec({20.0}), vec({1.0, 1.0})), noise::LambdaMode::layerwise};
  const auto hot = oracle::chain_moments(run_chain(grad, c, Vector::Zero(2), setup).samples);
  c.temperature = 1e-5;
  const auto cold = oracle::chain_moments(run_chain(grad, c, Vector::Zero(2), setup).samples);
  EXPECT_LT(cold.covariance.trace(), hot.covariance.trace());
}

TEST(RunChain, IsgdMatchesGaussianTargetWithExactLambda) {
  Matrix h(2, 2);
  h << 1.5, 0.3, 0.3, 1.0;
  const QuadraticPotential quad(vec({0.5, -0.5}), h, LayerPartition({{0}, {1}}));
  const Dataset none;
  const Vector b = vec({30.0, 60.0});
  const SyntheticNoiseGradient grad(quad, none, b);
  SamplerConfig c;
  c.kind = SamplerKind::isgd;
  c.warmup_steps = 5000;
  c.keepevery = 10;
  c.num_samples = 50000;
  c.seed = 19;
  c.b_tracking = BTracking::frozen;
  const IsgdSetup setup{state_with(b, b), noise::LambdaMode::layerwise};
  const SampleChain chain = run_chain(grad, c, quad.mean(), setup);
  const auto mom = oracle::chain_moments(chain.samples);
  const Matrix target = quad.covariance();
  for (Eigen::Index j = 0; j < 2; ++j) {
    EXPECT_LE(std::abs(mom.mean[j] - quad.mean()[j]), 4.0 * mom.std_error[j]);
    EXPECT_NEAR(mom.covariance(j, j), target(j, j), 0.1 * target(j, j));
  }
  EXPECT_EQ(chain.diagnostics.clamp_events, 0u);
  EXPECT_LE(chain.diagnostics.max_composite_error, 1e-12);
}

TEST(RunChain, ThinningReducesAutocorrelation) {
  const QuadraticPotential quad(Vector::Zero(1), Matrix::Identity(1, 1));
  const Dataset none;
  const ExactGradient grad(quad, none);
  SamplerConfig c;
  c.kind = SamplerKind::sgld;
  c.eta = 0.01;
  c.warmup_steps = 0;
  c.keepevery = 1;
  c.num_samples = 100000;
  c.seed = 2;
  const Vector series = run_chain(grad, c, Vector::Zero(1)).samples.col(0);
  EXPECT_LT(oracle::autocorrelation(series, 200), oracle::autocorrelation(series, 1));
  EXPECT_GT(oracle::effective_sample_size(series), 0.0);
}

TEST(RunChain, SlrModeUsesSummedLambda) {
  const QuadraticPotential quad(Vector::Zero(2), Matrix::Identity(2, 2), LayerPartition({{0}, {1}}));
  const Dataset none;
  const ExactGradient grad(quad, none);
  SamplerConfig c;
  c.kind = SamplerKind::isgd;
  c.warmup_steps = 0;
  c.keepevery = 1;
  c.num_samples = 1;
  c.b_tracking = BTracking::zero;
  const SampleChain chain =
      run_chain(grad, c, Vector::Ones(2), IsgdSetup{state_with(vec({3.0, 5.0}), Vector::Zero(2)), noise::LambdaMode::slr});
  EXPECT_EQ(chain.diagnostics.lambda, vec({8.0, 8.0}));
}

TEST(Parsing, KindsAndTracking) {
  EXPECT_EQ(parse_kind("sghmc"), SamplerKind::sghmc);
  EXPECT_EQ(to_string(SamplerKind::isgd), "isgd");
  EXPECT_THROW(parse_kind("hmc"), ContractViolation);
  EXPECT_EQ(parse_b_tracking("frozen"), BTracking::frozen);
  EXPECT_THROW(parse_b_tracking("thawed"), ContractViolation);
}

}  // namespace
