#include "zips/power_series.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace zips {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// f'(theta)/f(theta) and f''(theta)/f(theta), formed without f itself so
// that moments stay finite where f overflows.
struct SeriesRatios {
  double first;
  double second;
};

SeriesRatios series_ratios(const PowerSeriesFamily& family, double theta) {
  switch (family.kind()) {
    case FamilyKind::Poisson:
      return {1.0, 1.0};
    case FamilyKind::Geometric: {
      const double q = 1.0 - theta;
      return {1.0 / q, 2.0 / (q * q)};
    }
    case FamilyKind::NegativeBinomial: {
      const double r = *family.nuisance();
      const double q = 1.0 - theta;
      return {r / q, r * (r + 1.0) / (q * q)};
    }
    case FamilyKind::Binomial: {
      const double n = *family.nuisance();
      const double s = 1.0 + theta;
      return {n / s, n * (n - 1.0) / (s * s)};
    }
    case FamilyKind::Logarithmic: {
      const double q = 1.0 - theta;
      const double l = -std::log1p(-theta);
      return {1.0 / (q * l), 1.0 / (q * q * l)};
    }
  }
  throw std::logic_error("unknown family");
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Poisson: return "Poisson";
    case FamilyKind::Geometric: return "Geometric";
    case FamilyKind::NegativeBinomial: return "NegativeBinomial";
    case FamilyKind::Binomial: return "Binomial";
    case FamilyKind::Logarithmic: return "Logarithmic";
  }
  return "unknown";
}

std::optional<FamilyKind> family_kind_from_string(std::string_view name) {
  if (name == "poisson") return FamilyKind::Poisson;
  if (name == "geometric") return FamilyKind::Geometric;
  if (name == "negative_binomial" || name == "nb") return FamilyKind::NegativeBinomial;
  if (name == "binomial") return FamilyKind::Binomial;
  if (name == "logarithmic") return FamilyKind::Logarithmic;
  return std::nullopt;
}

PowerSeriesFamily make_family(FamilyKind kind, std::optional<double> nuisance) {
  switch (kind) {
    case FamilyKind::Poisson: return PowerSeriesFamily::poisson();
    case FamilyKind::Geometric: return PowerSeriesFamily::geometric();
    case FamilyKind::Logarithmic: return PowerSeriesFamily::logarithmic();
    case FamilyKind::NegativeBinomial:
      if (!nuisance) throw std::invalid_argument("negative binomial family needs r");
      return PowerSeriesFamily::negative_binomial(*nuisance);
    case FamilyKind::Binomial:
      if (!nuisance || *nuisance != std::floor(*nuisance)) {
        throw std::invalid_argument("binomial family needs an integer n");
      }
      return PowerSeriesFamily::binomial(static_cast<int>(*nuisance));
  }
  throw std::invalid_argument("unknown family");
}

PowerSeriesFamily PowerSeriesFamily::poisson() { return {FamilyKind::Poisson, std::nullopt}; }

PowerSeriesFamily PowerSeriesFamily::geometric() { return {FamilyKind::Geometric, std::nullopt}; }

PowerSeriesFamily PowerSeriesFamily::negative_binomial(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("negative binomial size r must be positive and finite");
  }
  return {FamilyKind::NegativeBinomial, r};
}

PowerSeriesFamily PowerSeriesFamily::binomial(int n) {
  if (n < 1) throw std::invalid_argument("binomial size n must be a positive integer");
  return {FamilyKind::Binomial, static_cast<double>(n)};
}

PowerSeriesFamily PowerSeriesFamily::logarithmic() {
  return {FamilyKind::Logarithmic, std::nullopt};
}

ThetaInterval PowerSeriesFamily::theta_domain() const {
  switch (kind_) {
    case FamilyKind::Poisson:
    case FamilyKind::Binomial:
      return {0.0, kInf};
    default:
      return {0.0, 1.0};
  }
}

std::string PowerSeriesFamily::name() const {
  std::ostringstream out;
  out << to_string(kind_);
  if (kind_ == FamilyKind::NegativeBinomial) out << "(r=" << *nuisance_ << ")";
  if (kind_ == FamilyKind::Binomial) out << "(n=" << static_cast<int>(*nuisance_) << ")";
  return out.str();
}

void PowerSeriesFamily::check_domain(double theta) const {
  if (in_domain(theta)) return;
  const ThetaInterval d = theta_domain();
  std::ostringstream msg;
  msg << name() << ": theta = " << theta << " outside the admissible interval (" << d.lower
      << ", " << (std::isinf(d.upper) ? std::string("inf") : std::to_string(d.upper)) << ")";
  throw std::domain_error(msg.str());
}

std::optional<std::int64_t> PowerSeriesFamily::support_max() const {
  if (kind_ == FamilyKind::Binomial) return static_cast<std::int64_t>(*nuisance_);
  return std::nullopt;
}

bool PowerSeriesFamily::in_support(std::int64_t x) const {
  if (x < support_min()) return false;
  const auto top = support_max();
  return !top || x <= *top;
}

double PowerSeriesFamily::log_b(std::int64_t x) const {
  if (!in_support(x)) return -kInf;
  const double xd = static_cast<double>(x);
  switch (kind_) {
    case FamilyKind::Poisson:
      return -std::lgamma(xd + 1.0);
    case FamilyKind::Geometric:
      return 0.0;
    case FamilyKind::NegativeBinomial: {
      const double r = *nuisance_;
      return std::lgamma(xd + r) - std::lgamma(r) - std::lgamma(xd + 1.0);
    }
    case FamilyKind::Binomial: {
      const double n = *nuisance_;
      return std::lgamma(n + 1.0) - std::lgamma(xd + 1.0) - std::lgamma(n - xd + 1.0);
    }
    case FamilyKind::Logarithmic:
      return -std::log(xd);
  }
  return -kInf;
}

double PowerSeriesFamily::log_series(double theta) const {
  switch (kind_) {
    case FamilyKind::Poisson:
      return theta;
    case FamilyKind::Geometric:
      return -std::log1p(-theta);
    case FamilyKind::NegativeBinomial:
      return -*nuisance_ * std::log1p(-theta);
    case FamilyKind::Binomial:
      return *nuisance_ * std::log1p(theta);
    case FamilyKind::Logarithmic:
      return std::log(-std::log1p(-theta));
  }
  return kInf;
}

SeriesTriple evaluate_series(const PowerSeriesFamily& family, double theta) {
  family.check_domain(theta);
  switch (family.kind()) {
    case FamilyKind::Poisson: {
      const double e = std::exp(theta);
      return {e, e, e};
    }
    case FamilyKind::Geometric: {
      const double q = 1.0 - theta;
      return {1.0 / q, 1.0 / (q * q), 2.0 / (q * q * q)};
    }
    case FamilyKind::NegativeBinomial: {
      const double r = *family.nuisance();
      const double q = 1.0 - theta;
      return {std::pow(q, -r), r * std::pow(q, -r - 1.0), r * (r + 1.0) * std::pow(q, -r - 2.0)};
    }
    case FamilyKind::Binomial: {
      const double n = *family.nuisance();
      const double s = 1.0 + theta;
      return {std::pow(s, n), n * std::pow(s, n - 1.0), n * (n - 1.0) * std::pow(s, n - 2.0)};
    }
    case FamilyKind::Logarithmic: {
      const double q = 1.0 - theta;
      return {-std::log1p(-theta), 1.0 / q, 1.0 / (q * q)};
    }
  }
  throw std::logic_error("unknown family");
}

double log_pmf(const PowerSeriesFamily& family, double theta, std::int64_t x) {
  family.check_domain(theta);
  if (!family.in_support(x)) return -kInf;
  const double power = x == 0 ? 0.0 : static_cast<double>(x) * std::log(theta);
  return family.log_b(x) + power - family.log_series(theta);
}

double pmf(const PowerSeriesFamily& family, double theta, std::int64_t x) {
  const double lp = log_pmf(family, theta, x);
  return lp == -kInf ? 0.0 : std::exp(lp);
}

Moments moments(const PowerSeriesFamily& family, double theta) {
  family.check_domain(theta);
  const SeriesRatios r = series_ratios(family, theta);
  const double mean = theta * r.first;
  const double variance = theta * theta * r.second + mean * (1.0 - mean);
  return {mean, variance};
}

double dispersion_index(const PowerSeriesFamily& family, double theta) {
  family.check_domain(theta);
  const SeriesRatios r = series_ratios(family, theta);
  // Grouped so that Poisson (both ratios 1) yields exactly 1.
  return 1.0 + (theta * (r.second / r.first) - theta * r.first);
}

std::int64_t truncation_point(const PowerSeriesFamily& family, double theta) {
  family.check_domain(theta);
  const auto top = family.support_max();
  const std::int64_t last = top ? *top : kSupportCap;
  double cumulative = 0.0;
  std::int64_t x = family.support_min();
  for (; x < last; ++x) {
    cumulative += pmf(family, theta, x);
    if (cumulative >= 1.0 - kTailMass) break;
  }
  return x;
}

std::int64_t sample(const PowerSeriesFamily& family, double theta, RandomStream& source) {
  family.check_domain(theta);
  const auto top = family.support_max();
  const std::int64_t last = top ? *top : kSupportCap;
  const double u = source.uniform();
  std::int64_t x = family.support_min();
  double cumulative = pmf(family, theta, x);
  while (cumulative <= u && x < last) {
    ++x;
    cumulative += pmf(family, theta, x);
  }
  return x;
}

}  // namespace zips
