#ifndef ZIPS_INDICES_HPP
#define ZIPS_INDICES_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "zips/zero_inflated.hpp"

namespace zips {

// Departures from the Poisson: zero share p0, third central moment kappa3,
// zero-inflation index z = 1 + log(p0)/mean and kappa = kappa3/mean - 1.
// Both indices vanish for a Poisson distribution.
struct InflationIndices {
  double p0 = 0.0;
  double mean = 0.0;
  std::optional<double> kappa3;  // needs raw data or a model
  double z_index = 0.0;          // -infinity when p0 == 0
  std::optional<double> kappa_index;
  bool no_zeros = false;
};

// Throws std::invalid_argument for an empty sample, negative counts or a
// zero mean.
InflationIndices inflation_indices_sample(std::span<const std::int64_t> counts);

// From published summaries. kappa3 and kappa are filled only when the
// sample third central moment is supplied.
InflationIndices inflation_indices_summaries(std::size_t n, std::size_t n0, double mean,
                                             std::optional<double> kappa3 = std::nullopt);

InflationIndices inflation_indices_model(const ZeroInflatedModel& model);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

// AIC = -2 loglik + 2k, BIC = -2 loglik + k log n.
InformationCriteria aic_bic(double loglik_at_max, std::size_t k, std::size_t n);

}  // namespace zips

#endif  // ZIPS_INDICES_HPP
