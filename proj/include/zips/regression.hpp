#ifndef ZIPS_REGRESSION_HPP
#define ZIPS_REGRESSION_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zips/power_series.hpp"

namespace zips {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// How the linear predictor eta = x'beta maps to theta.
//   Log:   theta = exp(eta)                 (Poisson, Binomial)
//   Logit: theta = exp(eta) / (1 + exp(eta)) (Geometric, NegativeBinomial, Logarithmic)
// For the geometric family the logit link is the same model as putting a
// log link on the mean, since mean = theta/(1-theta) = exp(eta).
enum class ThetaLink { Log, Logit };

ThetaLink default_theta_link(const PowerSeriesFamily& family);
std::string to_string(ThetaLink link);

class LinkError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Linear predictors beyond this magnitude are rejected by the log link.
inline constexpr double kMaxLinearPredictor = 700.0;

// theta_i = exp(x'beta) (or its logistic counterpart). Throws LinkError when
// |x'beta| exceeds kMaxLinearPredictor, naming the row when one is given.
double link_theta(const Eigen::Ref<const RowVector>& x_row, const Vector& beta,
                  ThetaLink link = ThetaLink::Log, std::optional<std::size_t> row = std::nullopt);

// omega_i = logistic(z'gamma).
double link_omega(const Eigen::Ref<const RowVector>& z_row, const Vector& gamma);

// The linear predictor that maps to theta under the given link.
double theta_to_linear_predictor(double theta, ThetaLink link);

// Counts with covariate matrices for the theta-link (X) and omega-link (Z).
// The first column of each matrix must be the constant 1. Storage is shared,
// so copies are cheap.
class DesignData {
 public:
  DesignData(std::vector<std::int64_t> y, Matrix x, Matrix z,
             std::vector<std::string> x_names = {}, std::vector<std::string> z_names = {});
  // X and Z equal.
  DesignData(std::vector<std::int64_t> y, Matrix x, std::vector<std::string> names = {});

  static DesignData intercept_only(std::vector<std::int64_t> y);

  std::size_t n() const { return impl_->y.size(); }
  std::size_t n0() const { return impl_->n0; }
  double mean_count() const { return impl_->mean; }
  const std::vector<std::int64_t>& y() const { return impl_->y; }
  const Matrix& x() const { return impl_->x; }
  const Matrix& z() const { return impl_->z; }
  const std::vector<std::string>& x_names() const { return impl_->x_names; }
  const std::vector<std::string>& z_names() const { return impl_->z_names; }
  // Set when either matrix is close to rank deficient.
  bool ill_conditioned() const { return impl_->ill_conditioned; }
  bool intercept_only_x() const { return impl_->x.cols() == 1; }
  bool intercept_only_z() const { return impl_->z.cols() == 1; }

 private:
  struct Impl {
    std::vector<std::int64_t> y;
    Matrix x;
    Matrix z;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    std::size_t n0 = 0;
    double mean = 0.0;
    bool ill_conditioned = false;
  };
  std::shared_ptr<const Impl> impl_;
};

// beta drives theta, gamma drives omega. An empty gamma means no inflation
// (omega = 0).
struct CoefficientSet {
  Vector beta;
  Vector gamma;

  bool inflated() const { return gamma.size() > 0; }
  std::size_t size() const { return static_cast<std::size_t>(beta.size() + gamma.size()); }
  Vector flatten() const;
  static CoefficientSet unflatten(const Vector& flat, std::size_t beta_size);
};

// Per-row omega pieces: the linear predictor zeta_i and log(1 - omega_i).
struct OmegaTerms {
  std::vector<double> zeta;
  std::vector<double> log_one_minus_omega;
};

// Observation-level ZIPS log-likelihood with per-row (theta_i, omega_i).
// Precomputes log b(y_i) once per data set.
class Likelihood {
 public:
  Likelihood(DesignData data, PowerSeriesFamily family, ThetaLink link);
  Likelihood(DesignData data, PowerSeriesFamily family)
      : Likelihood(data, family, default_theta_link(family)) {}

  // Sum of log zi_pmf over rows, or -infinity when any row has zero
  // probability or a linear predictor leaves the representable range.
  double operator()(const CoefficientSet& coeffs) const;

  // Per-row terms, in row order; all -infinity when beta is inadmissible.
  std::vector<double> terms(const CoefficientSet& coeffs) const;

  // Blockwise pieces for samplers that update beta and gamma separately.
  // parent_terms fills log Pr(V = y_i | theta_i) and returns false when a
  // row is inadmissible; combine adds the omega part (none when null) and
  // sums, giving the same value as operator().
  bool parent_terms(const Vector& beta, std::vector<double>& out) const;
  void omega_terms(const Vector& gamma, OmegaTerms& out) const;
  double combine(const std::vector<double>& parent, const OmegaTerms* omega) const;

  const DesignData& data() const { return data_; }
  const PowerSeriesFamily& family() const { return family_; }
  ThetaLink link() const { return link_; }

 private:
  void check_sizes(const CoefficientSet& coeffs) const;
  void combine_terms(const std::vector<double>& parent, const OmegaTerms* omega,
                     std::vector<double>& out) const;

  DesignData data_;
  PowerSeriesFamily family_;
  ThetaLink link_;
  std::vector<double> log_b_;
  double log_b0_;
};

double loglik(const DesignData& data, const PowerSeriesFamily& family,
              const CoefficientSet& coeffs);
double loglik(const DesignData& data, const PowerSeriesFamily& family, ThetaLink link,
              const CoefficientSet& coeffs);

// Log-likelihood of i.i.d. counts under a single ZIPS(omega, theta), omega
// taken over the extended support. -infinity outside the parameter space.
double loglik_constant(const std::vector<std::int64_t>& y, const PowerSeriesFamily& family,
                       double theta, double omega);

}  // namespace zips

#endif  // ZIPS_REGRESSION_HPP
