#include "zips/zero_inflated.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace zips {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rounding slack when checking that the zero cell is nonnegative.
constexpr double kZeroCellSlack = 1e-14;

double parent_zero_log_probability(const PowerSeriesFamily& family, double theta) {
  if (!family.in_support(0)) return -kInf;
  return family.log_b(0) - family.log_series(theta);
}

}  // namespace

std::string to_string(Dispersion d) {
  switch (d) {
    case Dispersion::Overdispersed: return "overdispersed";
    case Dispersion::Underdispersed: return "underdispersed";
    case Dispersion::Equidispersed: return "equidispersed";
  }
  return "unknown";
}

double omega_lower_bound(const PowerSeriesFamily& family, double theta) {
  family.check_domain(theta);
  const double log_p0 = parent_zero_log_probability(family, theta);
  const double one_minus_p0 = -std::expm1(log_p0);
  if (one_minus_p0 <= 0.0) {
    throw std::domain_error(family.name() +
                            ": zero probability is 1 at this theta, no zero-inflation possible");
  }
  return -std::exp(log_p0) / one_minus_p0;
}

ZeroInflatedModel::ZeroInflatedModel(PowerSeriesFamily family, double theta, double omega)
    : family_(std::move(family)), theta_(theta), omega_(omega) {
  family_.check_domain(theta_);
  const double lower = omega_lower_bound(family_, theta_);
  // Without a parent zero cell the bound is 0 and omega = 0 is the parent itself.
  const bool admissible = family_.in_support(0) ? omega_ > lower : omega_ >= 0.0;
  if (!(admissible && omega_ < 1.0)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << family_.name() << " at theta = " << theta_ << ": omega = " << omega_
        << " outside the admissible interval (" << (lower == 0.0 ? 0.0 : lower) << ", 1)";
    throw std::domain_error(msg.str());
  }
  parent_p0_ = pmf(family_, theta_, 0);
}

double zi_log_probability(const PowerSeriesFamily& family, double theta, double omega,
                          std::int64_t y) noexcept {
  if (!family.in_domain(theta) || !(omega < 1.0) || y < 0 || std::isnan(omega)) return -kInf;
  const double p0 = std::exp(parent_zero_log_probability(family, theta));
  const double zero_cell = omega + (1.0 - omega) * p0;
  if (zero_cell < -kZeroCellSlack) return -kInf;
  if (y == 0) return zero_cell > 0.0 ? std::log(zero_cell) : -kInf;
  if (!family.in_support(y)) return -kInf;
  const double lp = family.log_b(y) + static_cast<double>(y) * std::log(theta) -
                    family.log_series(theta);
  return std::log1p(-omega) + lp;
}

double zi_log_pmf(const ZeroInflatedModel& model, std::int64_t y) {
  if (y < 0) return -kInf;
  if (y == 0) {
    const double w = model.omega();
    return std::log(w + (1.0 - w) * model.parent_zero_probability());
  }
  return std::log1p(-model.omega()) + log_pmf(model.family(), model.theta(), y);
}

double zi_pmf(const ZeroInflatedModel& model, std::int64_t y) {
  if (y < 0) return 0.0;
  const double w = model.omega();
  if (y == 0) return std::clamp(w + (1.0 - w) * model.parent_zero_probability(), 0.0, 1.0);
  return (1.0 - w) * pmf(model.family(), model.theta(), y);
}

Moments zi_moments(const ZeroInflatedModel& model) {
  const Moments parent = moments(model.family(), model.theta());
  const double w = model.omega();
  const double mean = (1.0 - w) * parent.mean;
  const double variance = (1.0 - w) * (parent.variance + w * parent.mean * parent.mean);
  return {mean, std::max(0.0, variance)};
}

LatentDecomposition latent_decomposition(const ZeroInflatedModel& model) {
  return {moments(model.family(), model.theta()).mean,
          dispersion_index(model.family(), model.theta()), model.omega()};
}

double latent_variance(const LatentDecomposition& decomp) {
  const double w = decomp.omega;
  const double ey = (1.0 - w) * decomp.e_v;
  return w / (1.0 - w) * ey * ey + decomp.delta * ey;
}

Dispersion classify_dispersion(const LatentDecomposition& decomp) {
  if (!(decomp.e_v > 0.0) || !(decomp.delta > 0.0) || !(decomp.omega < 1.0)) {
    throw std::domain_error("classify_dispersion: invalid latent decomposition");
  }
  const double w = decomp.omega;
  const double ratio = latent_variance(decomp) / ((1.0 - w) * decomp.e_v);
  if (std::abs(ratio - 1.0) <= 1e-12) return Dispersion::Equidispersed;
  if (w > 0.0) {
    if (decomp.delta >= 1.0) return Dispersion::Overdispersed;
    return decomp.e_v < (1.0 - decomp.delta) / w ? Dispersion::Underdispersed
                                                 : Dispersion::Overdispersed;
  }
  return ratio > 1.0 ? Dispersion::Overdispersed : Dispersion::Underdispersed;
}

std::int64_t zi_sample(const ZeroInflatedModel& model, RandomStream& source) {
  if (model.omega() >= 0.0) {
    if (source.bernoulli(model.omega())) return 0;
    return sample(model.family(), model.theta(), source);
  }
  const auto top = model.family().support_max();
  const std::int64_t last = top ? *top : kSupportCap;
  const double u = source.uniform();
  std::int64_t y = 0;
  double cumulative = zi_pmf(model, 0);
  while (cumulative <= u && y < last) {
    ++y;
    cumulative += zi_pmf(model, y);
  }
  return y;
}

}  // namespace zips
