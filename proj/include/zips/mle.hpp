#ifndef ZIPS_MLE_HPP
#define ZIPS_MLE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zips/regression.hpp"

namespace zips {

// Sufficient statistics of an i.i.d. count sample. Built either from raw
// counts (histogram present, log-likelihoods exact) or from published
// summaries (n, n0, mean) only, in which case log-likelihoods omit the
// constant sum of log b(y_i).
struct CountSummary {
  std::size_t n = 0;
  std::size_t n0 = 0;
  double total = 0.0;
  std::vector<std::size_t> histogram;  // histogram[y] = #{i : y_i = y}

  static CountSummary from_counts(std::span<const std::int64_t> counts);
  static CountSummary from_summaries(std::size_t n, std::size_t n0, double mean);

  double mean() const { return total / static_cast<double>(n); }
  double zero_fraction() const { return static_cast<double>(n0) / static_cast<double>(n); }
  bool has_histogram() const { return !histogram.empty(); }
};

// Log-likelihood of ZIPS(omega, theta) for the summarized sample;
// -infinity outside the extended parameter space.
double loglik_summary(const CountSummary& sample, const PowerSeriesFamily& family, double theta,
                      double omega);

// Mean of the zero-truncated parent: theta f'(theta) / (f(theta) - b(0)).
double truncated_mean(const PowerSeriesFamily& family, double theta);

// (n - n0) f(theta) / (n [f(theta) - b(0)]). At the inflated fit this is the
// weight 1 - omega_hat of the parent component, not omega_hat itself.
double parent_weight_expression(const CountSummary& sample, const PowerSeriesFamily& family,
                                double theta);

struct MleResult {
  std::vector<std::string> parameter_names;
  Vector estimates;
  std::optional<Vector> std_errors;
  std::optional<Matrix> covariance;
  double loglik_at_max = 0.0;
  double loglik_at_start = 0.0;
  bool converged = false;
  int iterations = 0;
  bool hessian_singular = false;
  // The supremum sits on the boundary of the omega support (no zeros observed).
  bool at_boundary = false;
  // Log-likelihood values omit sum log b(y_i) (summary-only input).
  bool loglik_is_kernel = false;
  std::size_t n = 0;
  std::vector<std::string> warnings;

  // No-covariate fits.
  std::optional<double> theta_hat;
  std::optional<double> omega_hat;

  // Regression fits.
  std::optional<CoefficientSet> coefficients;
  ThetaLink link = ThetaLink::Log;
  // Set when the negative binomial size was profiled.
  std::optional<double> profiled_r;

  std::size_t parameter_count() const { return static_cast<std::size_t>(estimates.size()); }
};

// No-covariate maximum likelihood.
//   non-inflated: theta solves  mean = theta f'/f.
//   inflated:     theta solves  mean * n/(n - n0) = theta f'/(f - b(0)),
//                 then 1 - omega = (1 - n0/n) / (1 - b(0)/f(theta)),
// so the fitted zero probability equals n0/n. omega may be negative.
// Throws std::invalid_argument for an empty or all-zero sample and
// std::domain_error when the moment equation has no root in the domain.
MleResult mle_nocov(const CountSummary& sample, const PowerSeriesFamily& family, bool inflated);

struct MleOptions {
  std::optional<ThetaLink> link;  // default_theta_link(family) when unset
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the per-observation mean log-likelihood
  double step_tolerance = 1e-9;
};

// Regression fit by BFGS on numerical gradients, warm-started from the
// non-inflated fit. Never throws on non-convergence: converged=false.
MleResult mle_regression(const DesignData& data, const PowerSeriesFamily& family, bool inflated,
                         const MleOptions& options = {});

// Negative binomial regression with r chosen by maximizing the profile
// likelihood over r in [r_min, r_max].
MleResult mle_regression_profile_r(const DesignData& data, bool inflated,
                                   const MleOptions& options = {}, double r_min = 0.05,
                                   double r_max = 200.0);

// Two-sided Wald p-value for estimate/std_error.
double wald_p_value(double estimate, double std_error);
// "***" below 0.01, "**" below 0.05, "*" below 0.10, else "".
std::string stars_from_p_value(double p);

// Central-difference Hessian of fn at x, step h_i = rel_step * max(1, |x_i|).
template <typename Fn>
Matrix numerical_hessian(const Fn& fn, const Vector& x, double rel_step = 1e-4);

}  // namespace zips

#include "zips/detail/numerical_hessian.hpp"

#endif  // ZIPS_MLE_HPP
