#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "isgd/stable.hpp"

namespace {

using namespace isgd;
using namespace isgd::stable;

const double kHalf = 1.0 / std::sqrt(2.0);

std::vector<double> normal_draws(std::size_t n, double sd, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(engine);
  return out;
}

std::vector<double> cauchy_draws(std::size_t n, double scale, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::cauchy_distribution<double> dist(0.0, scale);
  std::vector<double> out(n);
  for (auto& v : out) v = dist(engine);
  return out;
}

TEST(EstimateAlpha, GaussianAndCauchy) {
  const auto g = normal_draws(1000000, 1.0, 1);
  const auto c = cauchy_draws(1000000, 1.0, 2);
  const double ag = estimate_alpha(g, 1000, 1000);
  const double ac = estimate_alpha(c, 1000, 1000);
  EXPECT_GE(ag, 1.95);
  EXPECT_LE(ag, 2.05);
  EXPECT_GE(ac, 0.95);
  EXPECT_LE(ac, 1.05);
}

TEST(EstimateAlpha, ScaleInvariant) {
  const auto g = normal_draws(10000, 1.0, 3);
  std::vector<double> scaled(g);
  for (auto& v : scaled) v *= 37.5;
  EXPECT_NEAR(estimate_alpha(scaled, 100, 100), estimate_alpha(g, 100, 100), 1e-12);
}

TEST(EstimateAlpha, ClampsAndValidates) {
  // Cancelling pairs make block sums tiny, which would push alpha above 2.
  std::vector<double> alternating(10000);
  for (std::size_t i = 0; i < alternating.size(); ++i) alternating[i] = (i % 2 ? 1.0 : -1.0) * (1.0 + 1e-3 * (i % 7));
  const double a = estimate_alpha(alternating, 100, 100);
  EXPECT_GE(a, kMinAlpha);
  EXPECT_LE(a, kMaxAlpha);
  EXPECT_THROW(estimate_alpha(alternating, 1, 100), ContractViolation);
  EXPECT_THROW(estimate_alpha(std::vector<double>(50, 1.0), 10, 10), ContractViolation);
  EXPECT_THROW(estimate_alpha(std::vector<double>(100, 0.0), 10, 10), NumericalError);
}

TEST(EstimateC, GaussianCauchyAndEquivariance) {
  const auto g = normal_draws(1000000, 2.0, 4);
  EXPECT_NEAR(estimate_c(g, 2.0), 2.0 * kHalf, 0.03 * 2.0 * kHalf);
  const auto c = cauchy_draws(1000000, 1.0, 5);
  EXPECT_NEAR(estimate_c(c, 1.0), 1.0, 0.05);
  std::vector<double> scaled(c.begin(), c.begin() + 1000);
  const double base = estimate_c(scaled, 1.3);
  for (auto& v : scaled) v *= 4.0;
  EXPECT_NEAR(estimate_c(scaled, 1.3), 4.0 * base, 1e-12 * base);
}

TEST(ExpectedExpTerm, LimitsAndClosedForm) {
  for (int k = 0; k < 50; ++k) {
    const double r = 0.01 + 0.2 * k;
    EXPECT_NEAR(expected_exp_term(r, 2.0), 1.0 / std::sqrt(1.0 + 2.0 * r * r), 1e-8);
  }
  for (double a : {0.3, 1.0, 1.7}) {
    // Small r: 1 - E exp(-|rT|^a) ~ r^a E|T|^a with E|T|^a = 2^(a/2) Gamma((a+1)/2) / sqrt(pi).
    const double r = std::pow(1e-4, 1.0 / a);
    const double moment = std::pow(2.0, a / 2.0) * std::tgamma((a + 1.0) / 2.0) / std::sqrt(std::numbers::pi);
    EXPECT_NEAR((1.0 - expected_exp_term(r, a)) / (std::pow(r, a) * moment), 1.0, 0.01);
    EXPECT_LT(expected_exp_term(1e6, a), 1e-3);
  }
  EXPECT_THROW(expected_exp_term(0.0, 1.0), ContractViolation);
  EXPECT_THROW(expected_exp_term(1.0, 2.5), ContractViolation);
}

TEST(OptimalR, AnalyticAtTwoAndNearHalfElsewhere) {
  EXPECT_NEAR(optimal_r(2.0), kHalf, 1e-3);
  // Closed-form objective at alpha = 2.
  const double r = kHalf;
  const double closed = r * (std::sqrt(std::numbers::pi) - 2.0 * std::sqrt(2.0 * std::numbers::pi) / std::sqrt(1.0 + 2.0 * r * r));
  EXPECT_NEAR(matching_objective(r, 2.0), closed, 1e-10);
  for (double a : {0.6, 1.0, 1.5}) {
    const double opt = optimal_r(a);
    EXPECT_NEAR(opt, kHalf, 0.15 * kHalf);
    EXPECT_LE(matching_objective(opt, a), matching_objective(opt + 1e-3, a));
    EXPECT_LE(matching_objective(opt, a), matching_objective(opt - 1e-3, a));
  }
}

TEST(MatchedSigma, FastAndExactPaths) {
  EXPECT_NEAR(matched_sigma(1.0, 2.0, false), std::sqrt(2.0), 1e-3);
  EXPECT_NEAR(matched_sigma(1.0, 2.0, true), std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(matched_sigma(3.0, 1.2, true), 3.0 * std::sqrt(2.0));
  const double fast = matched_sigma(1.0, 1.0, true);
  const double exact = matched_sigma(1.0, 1.0, false);
  EXPECT_LT(std::abs(fast - exact) / exact, 0.15);
  EXPECT_THROW(matched_sigma(0.0, 1.0, false), ContractViolation);
}

TEST(Fit, InvariantsAndJson) {
  const auto g = normal_draws(40000, 3.0, 6);
  const AlphaStableFit f = fit(g, std::nullopt, false);
  EXPECT_GT(f.alpha, 0.0);
  EXPECT_LE(f.alpha, 2.0);
  EXPECT_GT(f.c, 0.0);
  EXPECT_NEAR(f.sigma, f.c / f.r_opt, 1e-12 * f.sigma);
  const nlohmann::json j = f;
  EXPECT_TRUE(j.contains("alpha") && j.contains("c") && j.contains("r_opt") && j.contains("sigma"));
  EXPECT_EQ(j.get<AlphaStableFit>(), f);
  EXPECT_THROW(fit(std::vector<double>(3, 1.0), std::nullopt, false), ContractViolation);
}

TEST(LambdaAlpha, GaussianNoiseGivesHalfVariance) {
  const double s = 2.5;
  const auto g = normal_draws(40000, s, 7);
  const GroupLambdas out = lambda_alpha({g, g}, std::nullopt, false);
  ASSERT_EQ(out.lambda.size(), 2);
  EXPECT_NEAR(out.lambda[0], s * s / 2.0, 0.1 * s * s / 2.0);
  EXPECT_EQ(out.lambda[0], out.lambda[1]);
}

TEST(LambdaAlpha, CauchyNoiseUsesOptimalR) {
  const double c = 1.5;
  const auto draws = cauchy_draws(250000, c, 8);
  const GroupLambdas out = lambda_alpha({draws}, std::nullopt, false);
  const double sigma = c / optimal_r(1.0);
  EXPECT_NEAR(out.lambda[0], sigma * sigma / 2.0, 0.15 * sigma * sigma / 2.0);
}

TEST(LambdaAlpha, ErrorNamesTheGroup) {
  const auto g = normal_draws(400, 1.0, 9);
  try {
    lambda_alpha({g, std::vector<double>(3, 1.0)}, std::nullopt, false);
    FAIL() << "expected an error";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("group 1"), std::string::npos);
  }
}

TEST(DefaultBlocks, SquareRootShape) {
  const BlockShape b = default_blocks(1000000);
  EXPECT_EQ(b.n1, 1000u);
  EXPECT_EQ(b.n2, 1000u);
  const BlockShape odd = default_blocks(1050);
  EXPECT_EQ(odd.n1, 32u);
  EXPECT_EQ(odd.n2, 32u);
}

}  // namespace
