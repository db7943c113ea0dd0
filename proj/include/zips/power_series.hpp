#ifndef ZIPS_POWER_SERIES_HPP
#define ZIPS_POWER_SERIES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "zips/random.hpp"

namespace zips {

enum class FamilyKind { Poisson, Geometric, NegativeBinomial, Binomial, Logarithmic };

// Open interval of admissible power parameters.
struct ThetaInterval {
  double lower;
  double upper;  // +infinity for unbounded families
  bool contains(double theta) const { return theta > lower && theta < upper; }
};

// A power series distribution
//
//   Pr(X = x) = b(x) theta^x / f(theta),   f(theta) = sum_x b(x) theta^x.
//
// Instances:
//   Poisson              b(x) = 1/x!            f = exp(theta)        theta > 0
//   Geometric            b(x) = 1               f = (1-theta)^-1      0 < theta < 1
//   NegativeBinomial(r)  b(x) = C(x+r-1, x)     f = (1-theta)^-r      0 < theta < 1
//   Binomial(n)          b(x) = C(n, x)         f = (1+theta)^n       theta > 0 (odds p/(1-p))
//   Logarithmic          b(x) = 1/x, x >= 1     f = -log(1-theta)     0 < theta < 1
//
// The nuisance parameters r and n are structural and fixed at construction.
class PowerSeriesFamily {
 public:
  static PowerSeriesFamily poisson();
  static PowerSeriesFamily geometric();
  static PowerSeriesFamily negative_binomial(double r);
  static PowerSeriesFamily binomial(int n);
  static PowerSeriesFamily logarithmic();

  FamilyKind kind() const { return kind_; }
  std::optional<double> nuisance() const { return nuisance_; }
  ThetaInterval theta_domain() const;
  std::string name() const;

  bool in_domain(double theta) const { return theta_domain().contains(theta); }
  // Throws std::domain_error naming the family and its interval.
  void check_domain(double theta) const;

  std::int64_t support_min() const { return kind_ == FamilyKind::Logarithmic ? 1 : 0; }
  // Upper end of the support, absent for infinite support.
  std::optional<std::int64_t> support_max() const;
  bool in_support(std::int64_t x) const;

  // log b(x); -infinity outside the support.
  double log_b(std::int64_t x) const;
  // log f(theta), evaluated without forming f when that would lose precision.
  double log_series(double theta) const;

  bool operator==(const PowerSeriesFamily&) const = default;

 private:
  PowerSeriesFamily(FamilyKind kind, std::optional<double> nuisance)
      : kind_(kind), nuisance_(nuisance) {}

  FamilyKind kind_;
  std::optional<double> nuisance_;
};

// f(theta), f'(theta), f''(theta).
struct SeriesTriple {
  double f;
  double f_prime;
  double f_second;
};

struct Moments {
  double mean;
  double variance;
};

// Hard cap on summation/sampling walks over infinite supports.
inline constexpr std::int64_t kSupportCap = 1'000'000;
// Tail mass left out when truncating an infinite support.
inline constexpr double kTailMass = 1e-13;

SeriesTriple evaluate_series(const PowerSeriesFamily& family, double theta);

// b(x) theta^x / f(theta); exactly 0 for x outside the support.
double pmf(const PowerSeriesFamily& family, double theta, std::int64_t x);
double log_pmf(const PowerSeriesFamily& family, double theta, std::int64_t x);

// mean = theta f'/f, variance = theta^2 f''/f + mean (1 - mean).
Moments moments(const PowerSeriesFamily& family, double theta);

// variance/mean = 1 + theta f''/f' - mean.
double dispersion_index(const PowerSeriesFamily& family, double theta);

// Largest x that summations need to visit: the first x at which the
// cumulative mass reaches 1 - kTailMass, the top of a finite support, or
// kSupportCap, whichever comes first.
std::int64_t truncation_point(const PowerSeriesFamily& family, double theta);

// Inverse-CDF draw.
std::int64_t sample(const PowerSeriesFamily& family, double theta, RandomStream& source);

std::string to_string(FamilyKind kind);

// "poisson", "geometric", "negative_binomial" (or "nb"), "binomial",
// "logarithmic"; case-sensitive.
std::optional<FamilyKind> family_kind_from_string(std::string_view name);

// Negative binomial needs r > 0, binomial an integer n >= 1; others ignore
// the nuisance value. Throws std::invalid_argument otherwise.
PowerSeriesFamily make_family(FamilyKind kind, std::optional<double> nuisance = std::nullopt);

}  // namespace zips

#endif  // ZIPS_POWER_SERIES_HPP
