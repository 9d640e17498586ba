#include <gtest/gtest.h>

#include <cmath>

#include "isgd/gradient.hpp"
#include "isgd/noise.hpp"

namespace {

using namespace isgd;
using namespace isgd::noise;

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

TEST(LambdaGaussianInstant, HalfSquaredNormPerGroup) {
  EXPECT_EQ(lambda_gaussian_instant(vec({3.0, 4.0}), LayerPartition::single(2)), vec({12.5}));
  const LayerPartition two({{0}, {1}});
  EXPECT_EQ(lambda_gaussian_instant(vec({2.0, -2.0}), two), vec({2.0, 2.0}));
  EXPECT_EQ(lambda_gaussian_instant(Vector::Zero(3), LayerPartition::single(3)), vec({0.0}));
}

TEST(LambdaNaiveMax, MaxSquaredEntryPerGroup) {
  EXPECT_EQ(lambda_naive_max(vec({3.0, 4.0}), LayerPartition::single(2)), vec({16.0}));
  EXPECT_EQ(lambda_naive_max(Vector::Zero(2), LayerPartition::single(2)), vec({0.0}));
  Rng rng(3);
  const std::vector<std::size_t> sizes{3, 4, 2};
  const LayerPartition p = LayerPartition::from_sizes(sizes);
  for (int t = 0; t < 20; ++t) {
    const Vector g = rng.normal_vector(9);
    const Vector got = lambda_naive_max(g, p);
    for (std::size_t q = 0; q < p.num_groups(); ++q) {
      double best = 0.0;
      for (std::size_t j : p.group(q)) best = std::max(best, g[static_cast<Eigen::Index>(j)] * g[static_cast<Eigen::Index>(j)]);
      EXPECT_EQ(got[static_cast<Eigen::Index>(q)], best);
    }
  }
}

TEST(LambdaSpec, PerCoordinateIsFloored) {
  const LambdaSpec spec{LambdaMode::layerwise, vec({0.0, 2.0})};
  const LayerPartition p({{0, 2}, {1}});
  EXPECT_EQ(spec.per_coordinate(p), vec({kLambdaFloor, 2.0, kLambdaFloor}));
}

TEST(EmaUpdate, FilterArithmetic) {
  NoiseEstimatorState s;
  s.lambda = vec({2.0});
  s.step_count = 1;
  EXPECT_EQ(ema_update(s, vec({4.0}), 0.5).lambda, vec({3.0}));
  EXPECT_EQ(ema_update(s, vec({4.0}), 0.0).lambda, vec({4.0}));
  for (int k = 0; k < 300; ++k) s = ema_update(s, vec({7.0}), 0.9);
  EXPECT_NEAR(s.lambda[0], 7.0, 1e-12);
  EXPECT_EQ(s.step_count, 301u);
  EXPECT_THROW(ema_update(s, vec({1.0}), 1.0), ContractViolation);
  EXPECT_THROW(ema_update(s, vec({1.0, 2.0}), 0.5), ContractViolation);
}

TEST(EmaUpdate, FirstStepTakesFreshValue) {
  NoiseEstimatorState s;
  const auto next = ema_update(s, vec({5.0, 1.0}), 0.5);
  EXPECT_EQ(next.lambda, vec({5.0, 1.0}));
  EXPECT_EQ(next.step_count, 1u);
}

TEST(SlrCollapse, SumsLayerwiseValues) {
  NoiseEstimatorState s;
  s.lambda = vec({1.0, 2.0, 3.0});
  EXPECT_EQ(slr_collapse(s).values, vec({6.0}));
  s.lambda = vec({4.5});
  EXPECT_EQ(slr_collapse(s).values, vec({4.5}));
  Rng rng(1);
  s.lambda = rng.normal_vector(7).cwiseAbs();
  double total = 0.0;
  for (Eigen::Index i = 0; i < 7; ++i) total += s.lambda[i];
  EXPECT_DOUBLE_EQ(slr_collapse(s).values[0], total);
}

TEST(NoiseState, JsonRoundTrip) {
  NoiseEstimatorState s;
  s.lambda = vec({1.0 / 3.0, 2e-9});
  s.b_diag = vec({0.1, 0.2, std::sqrt(2.0)});
  s.mu = 0.5;
  s.step_count = 17;
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<NoiseEstimatorState>(), s);
  nlohmann::json bad = j;
  bad["b_diag"][0] = -1.0;
  EXPECT_THROW(bad.get<NoiseEstimatorState>(), ContractViolation);
}

TEST(EmpiricalB, FullBatchGivesZero) {
  const Vector freqs = TrigRegression::default_frequencies(2);
  const TrigRegression model(freqs, 0.1);
  const Dataset data = make_toy_dataset(12, Vector::Ones(2), freqs, 0.1, 2);
  const Vector b = empirical_b_diag(model, Vector::Constant(2, 0.2), data, 10, 12, 4);
  EXPECT_LE(b.maxCoeff(), 1e-12);
}

TEST(EmpiricalB, RecoversSyntheticDiagonal) {
  const QuadraticPotential quad(Vector::Zero(3), Matrix::Identity(3, 3));
  const Dataset none;
  const Vector truth = vec({0.5, 2.0, 9.0});
  const SyntheticNoiseGradient grad(quad, none, truth);
  Rng rng(12);
  const Vector b = empirical_b_diag(grad, Vector::Ones(3), 10000, rng);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(b[j], truth[j], 0.1 * truth[j]);
}

TEST(EmpiricalB, NeedsTwoDraws) {
  const QuadraticPotential quad(Vector::Zero(1), Matrix::Identity(1, 1));
  const Dataset none;
  const ExactGradient grad(quad, none);
  Rng rng(1);
  EXPECT_THROW(empirical_b_diag(grad, Vector::Zero(1), 1, rng), ContractViolation);
}

TEST(EstimateLambdas, SchemeCFullBatchIsDeterministic) {
  const Vector freqs = TrigRegression::default_frequencies(2);
  const TrigRegression model(freqs, 0.1);
  const Dataset data = make_toy_dataset(10, Vector::Ones(2), freqs, 0.1, 2);
  const MinibatchGradient grad(model, data, 10);
  EstimationSettings settings;
  settings.estimator = Estimator::gaussian;
  settings.scheme = Scheme::c;
  settings.steps = 20;
  Rng rng(3);
  const Vector theta = Vector::Constant(2, 0.4);
  const auto result = estimate_lambdas(grad, settings, theta, rng);
  const Vector expected = lambda_gaussian_instant(grad.exact(theta), model.partition());
  EXPECT_NEAR(result.state.lambda[0], expected[0], 1e-9 * expected[0]);
  for (const auto& l : result.lambda_trace) EXPECT_NEAR(l[0], expected[0], 1e-9 * expected[0]);
  EXPECT_EQ(result.theta, theta);
}

TEST(EstimateLambdas, SchemeCGaussianMatchesGroupSumOfB) {
  // Large groups keep the relative spread of ||g||^2 / 2 small.
  const std::size_t half = 400;
  const LayerPartition layers = LayerPartition::from_sizes(std::vector<std::size_t>{half, half});
  const QuadraticPotential quad(Vector::Zero(2 * half), Matrix::Identity(2 * half, 2 * half), layers);
  const Dataset none;
  Vector b(2 * half);
  for (std::size_t j = 0; j < 2 * half; ++j) b[static_cast<Eigen::Index>(j)] = j < half ? 1.0 + 0.001 * j : 5.0;
  const SyntheticNoiseGradient grad(quad, none, b);
  EstimationSettings settings;
  settings.estimator = Estimator::gaussian;
  settings.scheme = Scheme::c;
  settings.steps = 200;
  Rng rng(21);
  const auto result = estimate_lambdas(grad, settings, Vector::Zero(2 * half), rng);
  EXPECT_NEAR(result.state.lambda[0], b.head(half).sum(), 0.15 * b.head(half).sum());
  EXPECT_NEAR(result.state.lambda[1], b.tail(half).sum(), 0.15 * b.tail(half).sum());
  EXPECT_EQ(result.state.step_count, 200u);
  EXPECT_TRUE((result.state.b_diag.array() >= 0.0).all());
}

TEST(EstimateLambdas, SchemeCAlphaRecoversPerCoordinateLevel) {
  const LayerPartition layers = LayerPartition::from_sizes(std::vector<std::size_t>{2, 3});
  const QuadraticPotential quad(Vector::Zero(5), Matrix::Identity(5, 5), layers);
  const Dataset none;
  const Vector b = vec({2.0, 2.0, 30.0, 30.0, 30.0});
  const SyntheticNoiseGradient grad(quad, none, b);
  EstimationSettings settings;
  settings.estimator = Estimator::alpha;
  settings.scheme = Scheme::c;
  settings.steps = 20000;
  Rng rng(5);
  const auto result = estimate_lambdas(grad, settings, Vector::Zero(5), rng);
  ASSERT_EQ(result.fits.size(), 2u);
  EXPECT_NEAR(result.state.lambda[0], 2.0, 0.2);
  EXPECT_NEAR(result.state.lambda[1], 30.0, 3.0);
  for (const auto& f : result.fits) EXPECT_NEAR(f.alpha, 2.0, 0.1);
}

TEST(EstimateLambdas, SchemesAAndBAgreeFromTheSameStart) {
  const Vector freqs = TrigRegression::default_frequencies(3);
  const TrigRegression model(freqs, 0.1);
  const Dataset data = make_toy_dataset(200, Vector::Ones(3), freqs, 0.1, 2);
  const MinibatchGradient grad(model, data, 20);
  for (Estimator e : {Estimator::gaussian, Estimator::alpha}) {
    EstimationSettings settings;
    settings.estimator = e;
    settings.steps = 300;
    settings.train_lr = 1e-4;
    settings.scheme = Scheme::a;
    Rng rng_a(9);
    const auto a = estimate_lambdas(grad, settings, Vector::Zero(3), rng_a);
    settings.scheme = Scheme::b;
    Rng rng_b(9);
    const auto b = estimate_lambdas(grad, settings, Vector::Zero(3), rng_b);
    EXPECT_EQ(a.theta, b.theta);
    EXPECT_EQ(a.state, b.state);
    EXPECT_NE(a.theta, Vector::Zero(3));
  }
}

TEST(EstimateLambdas, LambdaPositiveAfterOneStep) {
  const QuadraticPotential quad(Vector::Zero(2), Matrix::Identity(2, 2));
  const Dataset none;
  const ExactGradient grad(quad, none);
  EstimationSettings settings;
  settings.estimator = Estimator::gaussian;
  settings.steps = 1;
  Rng rng(1);
  const auto result = estimate_lambdas(grad, settings, Vector::Zero(2), rng);
  EXPECT_GT(result.state.lambda[0], 0.0);
}

TEST(Parsing, EstimatorAndScheme) {
  EXPECT_EQ(parse_estimator("G"), Estimator::gaussian);
  EXPECT_EQ(parse_estimator("alpha"), Estimator::alpha);
  EXPECT_EQ(parse_scheme("b"), Scheme::b);
  EXPECT_THROW(parse_scheme("d"), ContractViolation);
  EXPECT_THROW(parse_estimator("beta"), ContractViolation);
}

}  // namespace
