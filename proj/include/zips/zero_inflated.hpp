#ifndef ZIPS_ZERO_INFLATED_HPP
#define ZIPS_ZERO_INFLATED_HPP

#include <cstdint>

#include "zips/power_series.hpp"

namespace zips {

// Zero-inflated power series distribution ZIPS(omega, theta):
//
//   Pr(Y = 0) = omega + (1 - omega) b(0)/f(theta)
//   Pr(Y = k) = (1 - omega) b(k) theta^k / f(theta),   k != 0
//
// omega ranges over the extended support -P0/(1-P0) < omega < 1, where
// P0 is the parent's zero probability. Negative omega deflates the zero
// cell; the pmf is still genuine there but is no longer a mixture.
class ZeroInflatedModel {
 public:
  // Throws std::domain_error if theta is outside the family's domain or
  // omega is outside the open extended support (the message reports the
  // computed bound).
  ZeroInflatedModel(PowerSeriesFamily family, double theta, double omega);

  const PowerSeriesFamily& family() const { return family_; }
  double theta() const { return theta_; }
  double omega() const { return omega_; }
  // b(0)/f(theta)
  double parent_zero_probability() const { return parent_p0_; }

 private:
  PowerSeriesFamily family_;
  double theta_;
  double omega_;
  double parent_p0_;
};

// Latent representation Y = V (1 - B), B ~ Bernoulli(omega), V ~ PS(theta).
struct LatentDecomposition {
  double e_v;    // E(V)
  double delta;  // var(V)/E(V)
  double omega;
};

enum class Dispersion { Overdispersed, Underdispersed, Equidispersed };

// -P0/(1-P0). Throws std::domain_error when P0 rounds to 1.
double omega_lower_bound(const PowerSeriesFamily& family, double theta);

double zi_pmf(const ZeroInflatedModel& model, std::int64_t y);
double zi_log_pmf(const ZeroInflatedModel& model, std::int64_t y);

// Unvalidated log-probability used by likelihood code: returns -infinity
// when the cell probability is not positive (including inadmissible
// parameters) instead of throwing.
double zi_log_probability(const PowerSeriesFamily& family, double theta, double omega,
                          std::int64_t y) noexcept;

// ((1-omega) mu, (1-omega)(sigma^2 + omega mu^2)).
Moments zi_moments(const ZeroInflatedModel& model);

LatentDecomposition latent_decomposition(const ZeroInflatedModel& model);

// var(Y) = omega/(1-omega) E(Y)^2 + delta E(Y), the latent-variable form.
double latent_variance(const LatentDecomposition& decomp);

// Classifies Y as over/under/equidispersed. For omega > 0 the latent
// criterion is used (delta >= 1 => over; otherwise under iff
// E(V) < (1-delta)/omega). For omega <= 0 the criterion does not apply and
// the variance/mean ratio is used directly. Ratios within 1e-12 of 1 are
// equidispersed.
Dispersion classify_dispersion(const LatentDecomposition& decomp);

// omega >= 0: V (1 - B). omega < 0: inverse-CDF over the pmf.
std::int64_t zi_sample(const ZeroInflatedModel& model, RandomStream& source);

std::string to_string(Dispersion d);

}  // namespace zips

#endif  // ZIPS_ZERO_INFLATED_HPP
