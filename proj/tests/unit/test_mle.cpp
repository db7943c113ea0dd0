#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "zips/mle.hpp"
#include "zips/numeric.hpp"
#include "zips/zero_inflated.hpp"

namespace zips {
namespace {

const CountSummary kPublished = CountSummary::from_summaries(67856, 63232, 0.07275);

std::vector<std::int64_t> draw_counts(const PowerSeriesFamily& family, double theta, double omega,
                                      std::size_t n, std::uint64_t seed) {
  const ZeroInflatedModel m(family, theta, omega);
  RandomStream rng(seed);
  std::vector<std::int64_t> y(n);
  for (auto& v : y) v = zi_sample(m, rng);
  return y;
}

// Bisection on an increasing function, independent of the library's solver.
template <typename Fn>
double bisect(const Fn& fn, double target, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (fn(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(MleNocov, PublishedPoisson) {
  const auto fit = mle_nocov(kPublished, PowerSeriesFamily::poisson(), false);
  EXPECT_NEAR(*fit.theta_hat, 0.07275, 1e-12);
  EXPECT_NEAR(std::exp(-*fit.theta_hat), 0.92983, 5e-6);
  EXPECT_TRUE(fit.loglik_is_kernel);
  ASSERT_TRUE(fit.std_errors.has_value());
  // Poisson information is n / theta.
  EXPECT_NEAR((*fit.std_errors)[0], std::sqrt(0.07275 / 67856.0), 1e-3 * std::sqrt(0.07275 / 67856.0));
}

TEST(MleNocov, PublishedZip) {
  const auto fit = mle_nocov(kPublished, PowerSeriesFamily::poisson(), true);
  const double target = 0.07275 * 67856.0 / (67856.0 - 63232.0);
  const double theta = bisect([](double t) { return t / -std::expm1(-t); }, target, 1e-9, 10.0);
  EXPECT_NEAR(*fit.theta_hat, theta, 1e-9);
  EXPECT_NEAR(*fit.theta_hat, 0.13226, 5e-5);
  EXPECT_NEAR(*fit.omega_hat, 0.44995, 5e-5);
  const ZeroInflatedModel m(PowerSeriesFamily::poisson(), *fit.theta_hat, *fit.omega_hat);
  EXPECT_NEAR(zi_pmf(m, 0), 63232.0 / 67856.0, 1e-10);
}

TEST(MleNocov, PublishedZigHasNegativeOmega) {
  const auto fit = mle_nocov(kPublished, PowerSeriesFamily::geometric(), true);
  const double target = 0.07275 * 67856.0 / (67856.0 - 63232.0);
  // Truncated geometric mean is 1/(1 - theta).
  EXPECT_NEAR(*fit.theta_hat, 1.0 - 1.0 / target, 1e-10);
  EXPECT_LT(*fit.omega_hat, 0.0);
  EXPECT_NEAR(*fit.omega_hat, -0.07638, 5e-5);
  EXPECT_GT(*fit.omega_hat, omega_lower_bound(PowerSeriesFamily::geometric(), *fit.theta_hat));
  const ZeroInflatedModel m(PowerSeriesFamily::geometric(), *fit.theta_hat, *fit.omega_hat);
  EXPECT_NEAR(zi_pmf(m, 0), 63232.0 / 67856.0, 1e-10);
  EXPECT_NEAR(zi_pmf(m, 0), 0.93186, 2e-4);
}

TEST(MleNocov, DegenerateSamples) {
  const std::vector<std::int64_t> zeros(10, 0);
  try {
    mle_nocov(CountSummary::from_counts(zeros), PowerSeriesFamily::poisson(), true);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
  EXPECT_THROW(CountSummary::from_counts(std::vector<std::int64_t>{}), std::invalid_argument);
  EXPECT_THROW(CountSummary::from_summaries(10, 11, 0.5), std::invalid_argument);
}

TEST(MleNocov, UnreachableMeanReportsInterval) {
  // A binomial(2) mean can never reach 3.
  const std::vector<std::int64_t> y{3, 3, 3};
  try {
    mle_nocov(CountSummary::from_counts(y), PowerSeriesFamily::binomial(2), false);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("("), std::string::npos) << e.what();
  }
}

TEST(MleNocov, SummaryAndCountsAgree) {
  const auto y = draw_counts(PowerSeriesFamily::poisson(), 0.8, 0.3, 3000, 4);
  const auto from_counts = CountSummary::from_counts(y);
  const auto from_summary = CountSummary::from_summaries(from_counts.n, from_counts.n0, from_counts.mean());
  const auto a = mle_nocov(from_counts, PowerSeriesFamily::poisson(), true);
  const auto b = mle_nocov(from_summary, PowerSeriesFamily::poisson(), true);
  EXPECT_NEAR(*a.theta_hat, *b.theta_hat, 1e-10);
  EXPECT_NEAR(*a.omega_hat, *b.omega_hat, 1e-10);
  EXPECT_FALSE(a.loglik_is_kernel);
  EXPECT_NEAR(a.loglik_at_max, loglik_constant(y, PowerSeriesFamily::poisson(), *a.theta_hat, *a.omega_hat), 1e-8);
}

TEST(MleNocovProperty, ZeroCellIdentityAndErratum) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const bool geometric = seed % 2 == 0;
    const auto family = geometric ? PowerSeriesFamily::geometric() : PowerSeriesFamily::poisson();
    const double theta = geometric ? 0.15 + 0.03 * seed : 0.2 + 0.15 * seed;
    const double omega = (seed % 3 == 0) ? -0.05 : 0.1 + 0.04 * seed;
    const auto sample = CountSummary::from_counts(draw_counts(family, theta, omega, 2000, seed));
    const auto fit = mle_nocov(sample, family, true);
    const ZeroInflatedModel m(family, *fit.theta_hat, *fit.omega_hat);
    EXPECT_NEAR(zi_pmf(m, 0), sample.zero_fraction(), 1e-10);
    EXPECT_NEAR(parent_weight_expression(sample, family, *fit.theta_hat), 1.0 - *fit.omega_hat, 1e-10);
    EXPECT_GE(fit.loglik_at_max, fit.loglik_at_start);
    ++checked;
  }
  EXPECT_EQ(checked, 12);
}

TEST(MleNocovProperty, AgreesWithGridOracle) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const bool geometric = seed > 2;
    const bool inflated = seed % 2 == 1;
    const auto family = geometric ? PowerSeriesFamily::geometric() : PowerSeriesFamily::poisson();
    const auto y = draw_counts(family, geometric ? 0.35 : 1.1, inflated ? 0.25 : 0.0, 800, 100 + seed);
    const auto fit = mle_nocov(CountSummary::from_counts(y), family, inflated);
    const auto grid = oracle::grid_oracle(y, family.kind(), std::nullopt, inflated, 600);
    EXPECT_NEAR(*fit.theta_hat, grid.theta, 1e-3) << seed;
    EXPECT_NEAR(*fit.omega_hat, grid.omega, 1e-3) << seed;
    EXPECT_GE(fit.loglik_at_max, static_cast<double>(grid.coarse_best) - 1e-6);
    EXPECT_GE(fit.loglik_at_max, static_cast<double>(grid.loglik) - 1e-6);
  }
}

TEST(MleNocov, NoZerosSitsOnLowerBound) {
  const std::vector<std::int64_t> y{1, 2, 1, 3, 1, 1, 2, 4, 1, 2};
  const auto fit = mle_nocov(CountSummary::from_counts(y), PowerSeriesFamily::poisson(), true);
  EXPECT_TRUE(fit.at_boundary);
  EXPECT_FALSE(fit.warnings.empty());
  const double lb = omega_lower_bound(PowerSeriesFamily::poisson(), *fit.theta_hat);
  EXPECT_NEAR(*fit.omega_hat, lb, 1e-12);
  const auto grid = oracle::grid_oracle(y, FamilyKind::Poisson, std::nullopt, true, 600);
  EXPECT_NEAR(grid.omega, grid.omega_lower, 0.01 * std::abs(grid.omega_lower));
  EXPECT_NEAR(*fit.theta_hat, grid.theta, 1e-2);
}

TEST(MleNocov, NoInflationTruthGivesSmallOmega) {
  const auto y = draw_counts(PowerSeriesFamily::poisson(), 0.9, 0.0, 100'000, 55);
  const auto fit = mle_nocov(CountSummary::from_counts(y), PowerSeriesFamily::poisson(), true);
  EXPECT_NEAR(*fit.omega_hat, 0.0, 0.02);
  const auto grid = oracle::grid_oracle(y, FamilyKind::Poisson, std::nullopt, true, 400);
  EXPECT_NEAR(grid.omega, 0.0, 0.02);
}

TEST(TruncatedMean, GeometricClosedForm) {
  for (double theta : {0.1, 0.5, 0.8}) {
    EXPECT_NEAR(truncated_mean(PowerSeriesFamily::geometric(), theta), 1.0 / (1.0 - theta), 1e-12);
  }
  EXPECT_NEAR(truncated_mean(PowerSeriesFamily::poisson(), 1.0), 1.0 / (1.0 - std::exp(-1.0)), 1e-12);
}

DesignData regression_data(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  RandomStream rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), 2);
  std::vector<std::int64_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = rng.normal();
    const double theta = std::exp(0.2 + 0.5 * x(r, 1));
    const double omega = logistic(-0.4 + 0.3 * x(r, 1));
    y[i] = zi_sample(ZeroInflatedModel(PowerSeriesFamily::poisson(), theta, omega), rng);
    x(r, 1) *= scale;
  }
  return DesignData(std::move(y), x, std::vector<std::string>{"intercept", "v"});
}

TEST(MleRegression, InterceptOnlyMatchesNocov) {
  for (const auto& family : {PowerSeriesFamily::poisson(), PowerSeriesFamily::geometric()}) {
    const auto y = draw_counts(family, family.kind() == FamilyKind::Poisson ? 1.3 : 0.4, 0.3, 4000, 9);
    const auto fit = mle_regression(DesignData::intercept_only(y), family, true);
    const auto direct = mle_nocov(CountSummary::from_counts(y), family, true);
    ASSERT_TRUE(fit.converged);
    const double theta = family.kind() == FamilyKind::Poisson ? std::exp(fit.coefficients->beta[0])
                                                              : logistic(fit.coefficients->beta[0]);
    EXPECT_NEAR(theta, *direct.theta_hat, 1e-6) << family.name();
    EXPECT_NEAR(logistic(fit.coefficients->gamma[0]), *direct.omega_hat, 1e-6) << family.name();
    EXPECT_NEAR(fit.loglik_at_max, direct.loglik_at_max, 1e-8 * std::abs(direct.loglik_at_max));
  }
}

TEST(MleRegression, ColumnScalingInvariance) {
  const double c = 4.0;
  const auto a = mle_regression(regression_data(3000, 17), PowerSeriesFamily::poisson(), true);
  const auto b = mle_regression(regression_data(3000, 17, c), PowerSeriesFamily::poisson(), true);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_NEAR(b.coefficients->beta[1] * c, a.coefficients->beta[1], 1e-5 * std::abs(a.coefficients->beta[1]));
  EXPECT_NEAR(b.coefficients->gamma[1] * c, a.coefficients->gamma[1], 1e-5 * std::abs(a.coefficients->gamma[1]));
  EXPECT_NEAR(a.loglik_at_max, b.loglik_at_max, 1e-8);
}

TEST(MleRegression, ReportsStartAndErrors) {
  const auto fit = mle_regression(regression_data(2000, 3), PowerSeriesFamily::poisson(), true);
  EXPECT_GE(fit.loglik_at_max, fit.loglik_at_start);
  ASSERT_TRUE(fit.std_errors.has_value());
  for (Eigen::Index j = 0; j < fit.std_errors->size(); ++j) EXPECT_GT((*fit.std_errors)[j], 0.0);
  EXPECT_EQ(fit.parameter_count(), 4u);
  EXPECT_EQ(fit.parameter_names.size(), 4u);
  const auto d = regression_data(2000, 3);
  EXPECT_NEAR(fit.loglik_at_max, loglik(d, PowerSeriesFamily::poisson(), *fit.coefficients), 1e-9);
}

TEST(MleRegression, GradientVanishesAtMaximum) {
  const auto d = regression_data(2000, 8);
  const auto fit = mle_regression(d, PowerSeriesFamily::poisson(), true);
  const Vector g = oracle::zi_regression_gradient(d, FamilyKind::Poisson, *fit.coefficients);
  EXPECT_LT(g.cwiseAbs().maxCoeff() / static_cast<double>(d.n()), 1e-5);
}

TEST(MleRegression, IterationCapGivesUnconvergedResult) {
  MleOptions options;
  options.max_iterations = 1;
  const auto fit = mle_regression(regression_data(1000, 5), PowerSeriesFamily::poisson(), true, options);
  EXPECT_FALSE(fit.converged);
  EXPECT_FALSE(fit.warnings.empty());
}

TEST(MleRegression, ProfiledNegativeBinomial) {
  RandomStream rng(31);
  std::vector<std::int64_t> y(3000);
  const auto nb = PowerSeriesFamily::negative_binomial(2.0);
  for (auto& v : y) v = sample(nb, 0.4, rng);
  const auto d = DesignData::intercept_only(y);
  const auto fit = mle_regression_profile_r(d, false);
  ASSERT_TRUE(fit.profiled_r.has_value());
  EXPECT_GT(*fit.profiled_r, 1.2);
  EXPECT_LT(*fit.profiled_r, 3.5);
  const auto fixed = mle_regression(d, PowerSeriesFamily::negative_binomial(0.5), false);
  EXPECT_GE(fit.loglik_at_max, fixed.loglik_at_max);
}

TEST(MleRegression, FlatInflationCoefficientKeepsOtherErrors) {
  // Every row with d = 1 has a positive count, so gamma[d] runs off to -infinity.
  RandomStream rng(19);
  const std::size_t n = 2000;
  Matrix x = Matrix::Ones(static_cast<Eigen::Index>(n), 1);
  Matrix z(static_cast<Eigen::Index>(n), 2);
  std::vector<std::int64_t> y(n);
  const ZeroInflatedModel zip(PowerSeriesFamily::poisson(), 1.5, 0.4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    z(r, 0) = 1.0;
    z(r, 1) = i % 2 == 0 ? 1.0 : 0.0;
    do {
      y[i] = zi_sample(zip, rng);
    } while (z(r, 1) == 1.0 && y[i] == 0);
  }
  const DesignData d(std::move(y), x, z, {"intercept"}, {"intercept", "d"});
  const auto fit = mle_regression(d, PowerSeriesFamily::poisson(), true);
  ASSERT_TRUE(fit.std_errors.has_value());
  EXPECT_LT(fit.estimates[2], -4.0);
  EXPECT_GT((*fit.std_errors)[0], 0.0);
  EXPECT_GT((*fit.std_errors)[1], 0.0);
  // Either the flat direction is dropped or its error swamps the estimate.
  const double se = (*fit.std_errors)[2];
  if (std::isnan(se)) {
    EXPECT_TRUE(fit.hessian_singular);
    bool named = false;
    for (const auto& w : fit.warnings) named = named || w.find("gamma[d]") != std::string::npos;
    EXPECT_TRUE(named);
  } else {
    EXPECT_LT(std::abs(fit.estimates[2]) / se, 1.0);
  }
}

TEST(Wald, PValuesAndStars) {
  EXPECT_NEAR(wald_p_value(1.96, 1.0), 0.05, 1e-3);
  EXPECT_NEAR(wald_p_value(-2.5758, 1.0), 0.01, 1e-4);
  EXPECT_EQ(stars_from_p_value(0.005), "***");
  EXPECT_EQ(stars_from_p_value(0.03), "**");
  EXPECT_EQ(stars_from_p_value(0.07), "*");
  EXPECT_EQ(stars_from_p_value(0.2), "");
}

TEST(Hessian, QuadraticIsExact) {
  Matrix a(2, 2);
  a << -3.0, 1.0, 1.0, -2.0;
  auto fn = [&](const Vector& v) { return 0.5 * v.dot(a * v) + v[0]; };
  const Matrix h = numerical_hessian(fn, Vector::Constant(2, 0.5));
  EXPECT_NEAR((h - a).cwiseAbs().maxCoeff(), 0.0, 1e-6);
}

}  // namespace
}  // namespace zips
