#include "zips/regression.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "zips/numeric.hpp"
#include "zips/zero_inflated.hpp"

namespace zips {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PowerTerms {
  double log_theta;
  double log_f;
};

// log theta and log f(theta) as functions of the linear predictor. Returns
// nullopt when theta leaves the family's domain in floating point.
std::optional<PowerTerms> power_terms(const PowerSeriesFamily& family, ThetaLink link,
                                      double eta) {
  double log_theta;
  double theta;
  double log_one_minus_theta;  // only meaningful for theta < 1
  if (link == ThetaLink::Log) {
    if (std::abs(eta) > kMaxLinearPredictor) return std::nullopt;
    log_theta = eta;
    theta = std::exp(eta);
    log_one_minus_theta = family.kind() != FamilyKind::Poisson && theta < 1.0
                              ? std::log1p(-theta)
                              : -kInf;
  } else {
    log_theta = -softplus(-eta);
    theta = logistic(eta);
    log_one_minus_theta = -softplus(eta);
  }
  if (!family.in_domain(theta)) return std::nullopt;

  switch (family.kind()) {
    case FamilyKind::Poisson:
      return PowerTerms{log_theta, theta};
    case FamilyKind::Geometric:
      return PowerTerms{log_theta, -log_one_minus_theta};
    case FamilyKind::NegativeBinomial:
      return PowerTerms{log_theta, -*family.nuisance() * log_one_minus_theta};
    case FamilyKind::Binomial: {
      const double log1p_theta = link == ThetaLink::Log ? softplus(eta) : std::log1p(theta);
      return PowerTerms{log_theta, *family.nuisance() * log1p_theta};
    }
    case FamilyKind::Logarithmic:
      return PowerTerms{log_theta, std::log(-log_one_minus_theta)};
  }
  return std::nullopt;
}

void check_design(const Matrix& m, std::size_t n, const char* label, bool& ill_conditioned) {
  if (static_cast<std::size_t>(m.rows()) != n) {
    std::ostringstream msg;
    msg << "design matrix " << label << " has " << m.rows() << " rows, expected " << n;
    throw std::invalid_argument(msg.str());
  }
  if (m.cols() < 1) throw std::invalid_argument(std::string("design matrix ") + label + " is empty");
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string("design matrix ") + label + " has non-finite entries");
  }
  if (!(m.col(0).array() == 1.0).all()) {
    throw std::invalid_argument(std::string("first column of design matrix ") + label +
                                " must be the constant 1");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  if (qr.rank() < m.cols()) {
    throw std::invalid_argument(std::string("design matrix ") + label +
                                " does not have full column rank");
  }
  const auto diag = qr.matrixQR().diagonal().cwiseAbs();
  if (diag.maxCoeff() > 1e8 * diag.minCoeff()) ill_conditioned = true;
}

std::vector<std::string> default_names(std::vector<std::string> names, Eigen::Index cols) {
  if (!names.empty()) {
    if (static_cast<Eigen::Index>(names.size()) != cols) {
      throw std::invalid_argument("column name count does not match the design matrix");
    }
    return names;
  }
  names.emplace_back("intercept");
  for (Eigen::Index j = 1; j < cols; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

}  // namespace

ThetaLink default_theta_link(const PowerSeriesFamily& family) {
  return std::isinf(family.theta_domain().upper) ? ThetaLink::Log : ThetaLink::Logit;
}

std::string to_string(ThetaLink link) { return link == ThetaLink::Log ? "log" : "logit"; }

double link_theta(const Eigen::Ref<const RowVector>& x_row, const Vector& beta, ThetaLink link,
                  std::optional<std::size_t> row) {
  if (x_row.size() != beta.size()) {
    throw std::invalid_argument("link_theta: covariate row and beta have different lengths");
  }
  const double eta = x_row.dot(beta);
  if (!(std::abs(eta) <= kMaxLinearPredictor)) {
    std::ostringstream msg;
    msg << "linear predictor " << eta << " overflows the theta link";
    if (row) msg << " at row " << *row;
    throw LinkError(msg.str());
  }
  return link == ThetaLink::Log ? std::exp(eta) : logistic(eta);
}

double link_omega(const Eigen::Ref<const RowVector>& z_row, const Vector& gamma) {
  if (z_row.size() != gamma.size()) {
    throw std::invalid_argument("link_omega: covariate row and gamma have different lengths");
  }
  return logistic(z_row.dot(gamma));
}

double theta_to_linear_predictor(double theta, ThetaLink link) {
  return link == ThetaLink::Log ? std::log(theta) : logit(theta);
}

DesignData::DesignData(std::vector<std::int64_t> y, Matrix x, Matrix z,
                       std::vector<std::string> x_names, std::vector<std::string> z_names) {
  if (y.empty()) throw std::invalid_argument("design data needs at least one observation");
  auto impl = std::make_shared<Impl>();
  std::size_t zeros = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0) {
      throw std::invalid_argument("negative count at row " + std::to_string(i));
    }
    if (y[i] == 0) ++zeros;
    total += static_cast<double>(y[i]);
  }
  check_design(x, y.size(), "X", impl->ill_conditioned);
  check_design(z, y.size(), "Z", impl->ill_conditioned);
  impl->x_names = default_names(std::move(x_names), x.cols());
  impl->z_names = default_names(std::move(z_names), z.cols());
  impl->n0 = zeros;
  impl->mean = total / static_cast<double>(y.size());
  impl->y = std::move(y);
  impl->x = std::move(x);
  impl->z = std::move(z);
  impl_ = std::move(impl);
}

DesignData::DesignData(std::vector<std::int64_t> y, Matrix x, std::vector<std::string> names)
    : DesignData(std::move(y), x, x, names, names) {}

DesignData DesignData::intercept_only(std::vector<std::int64_t> y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  return DesignData(std::move(y), Matrix::Ones(n, 1));
}

Vector CoefficientSet::flatten() const {
  Vector flat(beta.size() + gamma.size());
  flat << beta, gamma;
  return flat;
}

CoefficientSet CoefficientSet::unflatten(const Vector& flat, std::size_t beta_size) {
  const auto p = static_cast<Eigen::Index>(beta_size);
  return {flat.head(p), flat.tail(flat.size() - p)};
}

Likelihood::Likelihood(DesignData data, PowerSeriesFamily family, ThetaLink link)
    : data_(std::move(data)), family_(std::move(family)), link_(link) {
  log_b_.reserve(data_.n());
  for (std::int64_t y : data_.y()) log_b_.push_back(family_.log_b(y));
  log_b0_ = family_.log_b(0);
}

void Likelihood::check_sizes(const CoefficientSet& coeffs) const {
  if (coeffs.beta.size() != data_.x().cols()) {
    throw std::invalid_argument("beta length does not match the columns of X");
  }
  if (coeffs.inflated() && coeffs.gamma.size() != data_.z().cols()) {
    throw std::invalid_argument("gamma length does not match the columns of Z");
  }
}

bool Likelihood::parent_terms(const Vector& beta, std::vector<double>& out) const {
  const Vector eta = data_.x() * beta;
  const auto& y = data_.y();
  out.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto pt = power_terms(family_, link_, eta[static_cast<Eigen::Index>(i)]);
    if (!pt) return false;
    const double term = y[i] == 0 ? log_b0_ - pt->log_f
                                  : log_b_[i] + static_cast<double>(y[i]) * pt->log_theta - pt->log_f;
    if (std::isnan(term)) return false;
    out[i] = term;
  }
  return true;
}

void Likelihood::omega_terms(const Vector& gamma, OmegaTerms& out) const {
  const Vector zeta = data_.z() * gamma;
  out.zeta.assign(zeta.data(), zeta.data() + zeta.size());
  out.log_one_minus_omega.resize(out.zeta.size());
  for (std::size_t i = 0; i < out.zeta.size(); ++i) {
    out.log_one_minus_omega[i] = -softplus(out.zeta[i]);
  }
}

void Likelihood::combine_terms(const std::vector<double>& parent, const OmegaTerms* omega,
                               std::vector<double>& out) const {
  const auto& y = data_.y();
  out.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double term = parent[i];
    if (omega) {
      // Zero cell: log(omega + (1 - omega) P0) with omega = logistic(zeta).
      term = y[i] == 0 ? log_add_exp(omega->zeta[i], term) + omega->log_one_minus_omega[i]
                       : term + omega->log_one_minus_omega[i];
    }
    out[i] = std::isnan(term) ? -kInf : term;
  }
}

double Likelihood::combine(const std::vector<double>& parent, const OmegaTerms* omega) const {
  std::vector<double> t;
  combine_terms(parent, omega, t);
  for (double v : t) {
    if (v == -kInf) return -kInf;
  }
  return pairwise_sum(t);
}

std::vector<double> Likelihood::terms(const CoefficientSet& coeffs) const {
  check_sizes(coeffs);
  std::vector<double> parent;
  if (!parent_terms(coeffs.beta, parent)) return std::vector<double>(data_.n(), -kInf);
  std::vector<double> out;
  if (coeffs.inflated()) {
    OmegaTerms omega;
    omega_terms(coeffs.gamma, omega);
    combine_terms(parent, &omega, out);
  } else {
    combine_terms(parent, nullptr, out);
  }
  return out;
}

double Likelihood::operator()(const CoefficientSet& coeffs) const {
  const std::vector<double> t = terms(coeffs);
  for (double v : t) {
    if (v == -kInf) return -kInf;
  }
  return pairwise_sum(t);
}

double loglik(const DesignData& data, const PowerSeriesFamily& family, ThetaLink link,
              const CoefficientSet& coeffs) {
  return Likelihood(data, family, link)(coeffs);
}

double loglik(const DesignData& data, const PowerSeriesFamily& family,
              const CoefficientSet& coeffs) {
  return loglik(data, family, default_theta_link(family), coeffs);
}

double loglik_constant(const std::vector<std::int64_t>& y, const PowerSeriesFamily& family,
                       double theta, double omega) {
  std::vector<double> t;
  t.reserve(y.size());
  for (std::int64_t v : y) {
    const double lp = zi_log_probability(family, theta, omega, v);
    if (lp == -kInf) return -kInf;
    t.push_back(lp);
  }
  return pairwise_sum(t);
}

}  // namespace zips
