#include "zips/mle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "zips/numeric.hpp"
#include "zips/zero_inflated.hpp"

namespace zips {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double link_inverse(double u, ThetaLink link) {
  return link == ThetaLink::Log ? std::exp(u) : logistic(u);
}

// Solves g(theta) = target for g increasing in theta, searching over the
// linear-predictor scale of the family's default link.
double solve_increasing(const PowerSeriesFamily& family, const std::function<double(double)>& g,
                        double target, const char* what) {
  const ThetaLink link = default_theta_link(family);
  const double lo = link == ThetaLink::Log ? -60.0 : -36.0;
  const double hi = -lo;
  auto f = [&](double u) { return g(link_inverse(u, link)) - target; };
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (!(f_lo <= 0.0 && f_hi >= 0.0)) {
    std::ostringstream msg;
    msg << family.name() << ": " << what << " = " << target
        << " has no root for theta in [" << link_inverse(lo, link) << ", "
        << link_inverse(hi, link) << "]";
    throw std::domain_error(msg.str());
  }
  if (f_lo == 0.0) return link_inverse(lo, link);
  if (f_hi == 0.0) return link_inverse(hi, link);
  std::uintmax_t max_iter = 300;
  const auto bracket = boost::math::tools::toms748_solve(
      f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return link_inverse(0.5 * (bracket.first + bracket.second), link);
}

double parent_zero_probability(const PowerSeriesFamily& family, double theta) {
  return family.in_support(0) ? std::exp(family.log_b(0) - family.log_series(theta)) : 0.0;
}

std::optional<Matrix> invert_information(const Matrix& hessian) {
  const Matrix information = -hessian;
  if (!information.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(information);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix cov = llt.solve(Matrix::Identity(information.rows(), information.cols()));
  if (!cov.allFinite() || (cov.diagonal().array() <= 0.0).any()) return std::nullopt;
  return cov;
}

// Coordinates whose curvature is negligible next to the largest, e.g. an
// inflation coefficient that ran off towards -infinity.
std::vector<Eigen::Index> flat_coordinates(const Matrix& information) {
  const double largest = information.diagonal().cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> flat;
  for (Eigen::Index j = 0; j < information.rows(); ++j) {
    if (!(information(j, j) > 1e-7 * largest)) flat.push_back(j);
  }
  return flat;
}

void attach_standard_errors(MleResult& result, const Matrix& hessian) {
  if (auto cov = invert_information(hessian)) {
    result.std_errors = cov->diagonal().cwiseSqrt();
    result.covariance = std::move(*cov);
    return;
  }
  result.hessian_singular = true;
  const Eigen::Index k = hessian.rows();
  const auto flat = hessian.allFinite() ? flat_coordinates(-hessian) : std::vector<Eigen::Index>{};
  if (!flat.empty() && static_cast<Eigen::Index>(flat.size()) < k) {
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (std::find(flat.begin(), flat.end(), j) == flat.end()) kept.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(kept.size());
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = hessian(kept[a], kept[b]);
    }
    if (auto cov = invert_information(sub)) {
      Vector se = Vector::Constant(k, std::numeric_limits<double>::quiet_NaN());
      for (Eigen::Index a = 0; a < m; ++a) se[kept[a]] = std::sqrt((*cov)(a, a));
      result.std_errors = std::move(se);
      std::string names;
      for (Eigen::Index j : flat) {
        names += (names.empty() ? "" : ", ") + result.parameter_names[static_cast<std::size_t>(j)];
      }
      result.warnings.push_back("observed information is flat in " + names +
                                "; those standard errors are undefined");
      return;
    }
  }
  result.warnings.emplace_back("observed information is singular; standard errors omitted");
}

struct BfgsOutcome {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

template <typename Fn>
Vector central_gradient(const Fn& fn, const Vector& x) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = fn(xp);
    xp[i] = x[i] - h;
    const double fm = fn(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Minimizes fn. Converged when the gradient max-norm drops below the
// tolerance, or when steps stall below step_tolerance with a gradient
// already within 100x of it.
template <typename Fn>
BfgsOutcome minimize_bfgs(const Fn& fn, Vector x, const MleOptions& options) {
  const Eigen::Index k = x.size();
  BfgsOutcome out;
  double f = fn(x);
  if (!std::isfinite(f)) {
    out.x = x;
    out.value = f;
    return out;
  }
  Vector g = central_gradient(fn, x);
  Matrix h_inv = Matrix::Identity(k, k);
  bool fresh = true;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (!g.allFinite()) break;
    if (max_abs(g) < options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    Vector d = -h_inv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      fresh = true;
      d = -g;
      slope = g.dot(d);
    }
    // Keep trial steps in a sane range for exp/logistic links.
    const double longest = max_abs(d);
    if (longest > 5.0) {
      d *= 5.0 / longest;
      slope = g.dot(d);
    }
    double t = 1.0;
    Vector x_new;
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + t * d;
      f_new = fn(x_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        h_inv.setIdentity();
        fresh = true;
        continue;
      }
      out.converged = max_abs(g) < 100.0 * options.gradient_tolerance;
      break;
    }
    const Vector s = x_new - x;
    const Vector g_new = central_gradient(fn, x_new);
    const Vector yv = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    if (max_abs(s) < options.step_tolerance) {
      out.converged = max_abs(g) < 100.0 * options.gradient_tolerance;
      ++it;
      break;
    }
    const double sy = s.dot(yv);
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      if (fresh) {
        h_inv *= sy / yv.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(k, k);
      h_inv = (eye - rho * s * yv.transpose()) * h_inv * (eye - rho * yv * s.transpose()) +
              rho * s * s.transpose();
    }
  }
  out.x = x;
  out.value = f;
  out.iterations = it;
  return out;
}

std::vector<std::string> coefficient_names(const DesignData& data, bool inflated) {
  std::vector<std::string> names;
  for (const auto& n : data.x_names()) names.push_back("beta[" + n + "]");
  if (inflated) {
    for (const auto& n : data.z_names()) names.push_back("gamma[" + n + "]");
  }
  return names;
}

struct StageResult {
  Vector x;
  double loglik;
  int iterations;
  bool converged;
};

StageResult fit_stage(const Likelihood& like, std::size_t beta_size, const Vector& start,
                      const MleOptions& options) {
  const double n = static_cast<double>(like.data().n());
  auto objective = [&](const Vector& v) {
    const double l = like(CoefficientSet::unflatten(v, beta_size));
    return std::isfinite(l) ? -l / n : kInf;
  };
  const BfgsOutcome o = minimize_bfgs(objective, start, options);
  return {o.x, -o.value * n, o.iterations, o.converged};
}

}  // namespace

CountSummary CountSummary::from_counts(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("count sample is empty");
  CountSummary s;
  s.n = counts.size();
  for (std::int64_t y : counts) {
    if (y < 0) throw std::invalid_argument("counts must be nonnegative");
    const auto idx = static_cast<std::size_t>(y);
    if (idx >= s.histogram.size()) s.histogram.resize(idx + 1, 0);
    ++s.histogram[idx];
    s.total += static_cast<double>(y);
  }
  s.n0 = s.histogram[0];
  return s;
}

CountSummary CountSummary::from_summaries(std::size_t n, std::size_t n0, double mean) {
  if (n == 0) throw std::invalid_argument("summary sample size must be positive");
  if (n0 > n) throw std::invalid_argument("number of zeros exceeds the sample size");
  if (!(mean >= 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("summary mean must be finite and nonnegative");
  }
  if (n0 == n && mean > 0.0) {
    throw std::invalid_argument("summary mean is positive but every count is zero");
  }
  if (n0 < n && mean == 0.0) {
    throw std::invalid_argument("summary mean is zero but some counts are positive");
  }
  CountSummary s;
  s.n = n;
  s.n0 = n0;
  s.total = mean * static_cast<double>(n);
  return s;
}

double loglik_summary(const CountSummary& sample, const PowerSeriesFamily& family, double theta,
                      double omega) {
  const double zero_term = zi_log_probability(family, theta, omega, 0);
  if (sample.has_histogram()) {
    double sum = 0.0;
    for (std::size_t y = 0; y < sample.histogram.size(); ++y) {
      if (sample.histogram[y] == 0) continue;
      const double lp = zi_log_probability(family, theta, omega, static_cast<std::int64_t>(y));
      if (lp == -kInf) return -kInf;
      sum += static_cast<double>(sample.histogram[y]) * lp;
    }
    return sum;
  }
  if (!family.in_domain(theta) || !(omega < 1.0)) return -kInf;
  // The zero cell must stay nonnegative even when no zeros were observed.
  if (omega + (1.0 - omega) * parent_zero_probability(family, theta) < -1e-14) return -kInf;
  double sum = 0.0;
  if (sample.n0 > 0) {
    if (zero_term == -kInf) return -kInf;
    sum += static_cast<double>(sample.n0) * zero_term;
  }
  const double positives = static_cast<double>(sample.n - sample.n0);
  if (positives > 0.0) {
    sum += positives * (std::log1p(-omega) - family.log_series(theta)) +
           sample.total * std::log(theta);
  }
  return sum;
}

double truncated_mean(const PowerSeriesFamily& family, double theta) {
  const double mean = moments(family, theta).mean;
  if (!family.in_support(0)) return mean;
  const double log_p0 = family.log_b(0) - family.log_series(theta);
  return mean / -std::expm1(log_p0);
}

double parent_weight_expression(const CountSummary& sample, const PowerSeriesFamily& family,
                                double theta) {
  const SeriesTriple s = evaluate_series(family, theta);
  const double b0 = family.in_support(0) ? std::exp(family.log_b(0)) : 0.0;
  const double n = static_cast<double>(sample.n);
  return (n - static_cast<double>(sample.n0)) * s.f / (n * (s.f - b0));
}

MleResult mle_nocov(const CountSummary& sample, const PowerSeriesFamily& family, bool inflated) {
  if (sample.n == 0) throw std::invalid_argument("count sample is empty");
  if (sample.n0 == sample.n || sample.total <= 0.0) {
    throw std::invalid_argument("degenerate sample: every count is zero");
  }
  MleResult result;
  result.n = sample.n;
  result.loglik_is_kernel = !sample.has_histogram();
  result.link = default_theta_link(family);
  result.converged = true;

  const double mean = sample.mean();
  auto parent_mean = [&](double t) { return moments(family, t).mean; };
  const double theta_plain = solve_increasing(family, parent_mean, mean, "sample mean");
  result.loglik_at_start = loglik_summary(sample, family, theta_plain, 0.0);

  if (!inflated) {
    result.parameter_names = {"theta"};
    result.estimates = Vector::Constant(1, theta_plain);
    result.theta_hat = theta_plain;
    result.omega_hat = 0.0;
    result.loglik_at_max = result.loglik_at_start;
    auto fn = [&](const Vector& v) { return loglik_summary(sample, family, v[0], 0.0); };
    attach_standard_errors(result, numerical_hessian(fn, result.estimates));
    return result;
  }

  const double positives = static_cast<double>(sample.n - sample.n0);
  const double target = sample.total / positives;
  const double theta =
      solve_increasing(family, [&](double t) { return truncated_mean(family, t); }, target,
                       "mean of the positive counts");
  const double p0 = parent_zero_probability(family, theta);
  const double parent_weight = (positives / static_cast<double>(sample.n)) / (1.0 - p0);
  double omega = 1.0 - parent_weight;
  if (sample.n0 == 0) {
    omega = omega_lower_bound(family, theta);
    result.at_boundary = true;
    result.warnings.emplace_back("no zeros observed: omega sits on the lower support bound");
  }
  result.parameter_names = {"theta", "omega"};
  result.estimates = Vector(2);
  result.estimates << theta, omega;
  result.theta_hat = theta;
  result.omega_hat = omega;
  result.loglik_at_max = loglik_summary(sample, family, theta, omega);
  if (result.loglik_at_max == -kInf && result.at_boundary) {
    // Evaluate the boundary as the zero-truncated likelihood.
    result.loglik_at_max = loglik_summary(sample, family, theta, omega + 1e-15);
  }
  if (!result.at_boundary) {
    auto fn = [&](const Vector& v) { return loglik_summary(sample, family, v[0], v[1]); };
    attach_standard_errors(result, numerical_hessian(fn, result.estimates));
  }
  return result;
}

MleResult mle_regression(const DesignData& data, const PowerSeriesFamily& family, bool inflated,
                         const MleOptions& options) {
  if (data.n0() == data.n()) throw std::invalid_argument("degenerate sample: every count is zero");
  const ThetaLink link = options.link.value_or(default_theta_link(family));
  const auto p = static_cast<std::size_t>(data.x().cols());
  const auto q = static_cast<Eigen::Index>(data.z().cols());

  MleResult result;
  result.n = data.n();
  result.link = link;
  result.parameter_names = coefficient_names(data, inflated);

  // Warm start: intercept matching the sample mean.
  Vector beta_start = Vector::Zero(static_cast<Eigen::Index>(p));
  try {
    const MleResult plain = mle_nocov(CountSummary::from_counts(data.y()), family, false);
    beta_start[0] = theta_to_linear_predictor(*plain.theta_hat, link);
  } catch (const std::exception&) {
    result.warnings.emplace_back("intercept warm start unavailable; starting from zero");
  }

  const Likelihood plain_like(data, family, link);
  StageResult stage = fit_stage(plain_like, p, beta_start, options);
  int iterations = stage.iterations;
  Vector start = beta_start;
  double start_loglik = plain_like(CoefficientSet{beta_start, Vector()});

  if (inflated) {
    // Mean fitted zero probability under the non-inflated fit.
    const Vector eta = data.x() * stage.x;
    double p0_bar = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double theta = link == ThetaLink::Log ? std::exp(eta[i]) : logistic(eta[i]);
      if (family.in_domain(theta)) p0_bar += parent_zero_probability(family, theta);
    }
    p0_bar /= static_cast<double>(eta.size());
    Vector gamma_start = Vector::Zero(q);
    const double zero_share = static_cast<double>(data.n0()) / static_cast<double>(data.n());
    gamma_start[0] = logit(std::max(zero_share - p0_bar, 0.01));
    start = Vector(stage.x.size() + q);
    start << stage.x, gamma_start;
    start_loglik = plain_like(CoefficientSet::unflatten(start, p));
    stage = fit_stage(plain_like, p, start, options);
    iterations += stage.iterations;
  }

  result.iterations = iterations;
  result.converged = stage.converged;
  result.loglik_at_start = start_loglik;

  auto total_loglik = [&](const Vector& v) {
    return plain_like(CoefficientSet::unflatten(v, p));
  };
  Vector x = stage.x;
  double best = total_loglik(x);
  Matrix hessian = numerical_hessian(total_loglik, x);
  // One Newton polish on the total log-likelihood.
  if (auto cov = invert_information(hessian)) {
    const Vector g = central_gradient(total_loglik, x);
    const Vector x_polished = x + (*cov) * g;
    const double polished = total_loglik(x_polished);
    if (std::isfinite(polished) && polished >= best) {
      x = x_polished;
      best = polished;
      hessian = numerical_hessian(total_loglik, x);
    }
  }
  result.estimates = x;
  result.loglik_at_max = best;
  result.coefficients = CoefficientSet::unflatten(x, p);
  attach_standard_errors(result, hessian);
  if (!result.converged) {
    result.warnings.emplace_back("optimizer did not converge within the iteration cap");
  }
  if (data.ill_conditioned()) {
    result.warnings.emplace_back("design matrix is close to rank deficient");
  }
  return result;
}

MleResult mle_regression_profile_r(const DesignData& data, bool inflated,
                                   const MleOptions& options, double r_min, double r_max) {
  if (!(r_min > 0.0 && r_max > r_min)) throw std::invalid_argument("invalid profile range for r");
  auto negative_profile = [&](double log_r) {
    const MleResult fit =
        mle_regression(data, PowerSeriesFamily::negative_binomial(std::exp(log_r)), inflated,
                       options);
    return std::isfinite(fit.loglik_at_max) ? -fit.loglik_at_max : kInf;
  };
  std::uintmax_t max_iter = 60;
  const auto best = boost::math::tools::brent_find_minima(negative_profile, std::log(r_min),
                                                          std::log(r_max), 20, max_iter);
  const double r = std::exp(best.first);
  MleResult result =
      mle_regression(data, PowerSeriesFamily::negative_binomial(r), inflated, options);
  result.profiled_r = r;
  return result;
}

double wald_p_value(double estimate, double std_error) {
  if (!(std_error > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(estimate / std_error) / std::sqrt(2.0));
}

std::string stars_from_p_value(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

}  // namespace zips
