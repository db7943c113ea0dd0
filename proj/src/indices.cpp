#include "zips/indices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "zips/numeric.hpp"

namespace zips {
namespace {

void finish(InflationIndices& out) {
  out.no_zeros = out.p0 == 0.0;
  out.z_index = out.no_zeros ? -std::numeric_limits<double>::infinity()
                             : 1.0 + std::log(out.p0) / out.mean;
  if (out.kappa3) out.kappa_index = *out.kappa3 / out.mean - 1.0;
}

}  // namespace

InflationIndices inflation_indices_sample(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("inflation indices of an empty sample");
  std::size_t zeros = 0;
  std::vector<double> values;
  values.reserve(counts.size());
  for (std::int64_t y : counts) {
    if (y < 0) throw std::invalid_argument("counts must be nonnegative");
    if (y == 0) ++zeros;
    values.push_back(static_cast<double>(y));
  }
  const double n = static_cast<double>(counts.size());
  const double mean = pairwise_sum(values) / n;
  if (!(mean > 0.0)) throw std::invalid_argument("inflation indices need a positive mean");
  std::vector<double> cubes;
  cubes.reserve(values.size());
  for (double v : values) cubes.push_back((v - mean) * (v - mean) * (v - mean));

  InflationIndices out;
  out.p0 = static_cast<double>(zeros) / n;
  out.mean = mean;
  out.kappa3 = pairwise_sum(cubes) / n;
  finish(out);
  return out;
}

InflationIndices inflation_indices_summaries(std::size_t n, std::size_t n0, double mean,
                                             std::optional<double> kappa3) {
  if (n == 0) throw std::invalid_argument("inflation indices need n > 0");
  if (n0 > n) throw std::invalid_argument("number of zeros exceeds the sample size");
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw std::invalid_argument("inflation indices need a positive mean");
  }
  InflationIndices out;
  out.p0 = static_cast<double>(n0) / static_cast<double>(n);
  out.mean = mean;
  out.kappa3 = kappa3;
  finish(out);
  return out;
}

InflationIndices inflation_indices_model(const ZeroInflatedModel& model) {
  InflationIndices out;
  out.p0 = zi_pmf(model, 0);
  out.mean = zi_moments(model).mean;
  // Cubed deviations weight the tail, so keep summing past the truncation
  // point until the terms stop registering.
  const std::int64_t top = truncation_point(model.family(), model.theta());
  const std::int64_t last = model.family().support_max().value_or(kSupportCap);
  std::vector<double> terms;
  double largest = 0.0;
  for (std::int64_t y = model.family().support_min(); y <= last; ++y) {
    const double d = static_cast<double>(y) - out.mean;
    const double term = d * d * d * zi_pmf(model, y);
    if (y > top && std::abs(term) <= 1e-20 * largest) break;
    largest = std::max(largest, std::abs(term));
    terms.push_back(term);
  }
  // zi_pmf(0) carries the structural zeros even when the parent support
  // starts above zero.
  if (model.family().support_min() > 0) terms.push_back(-out.mean * out.mean * out.mean * out.p0);
  out.kappa3 = pairwise_sum(terms);
  finish(out);
  return out;
}

InformationCriteria aic_bic(double loglik_at_max, std::size_t k, std::size_t n) {
  if (n == 0) throw std::invalid_argument("aic_bic needs n >= 1");
  const double kd = static_cast<double>(k);
  return {-2.0 * loglik_at_max + 2.0 * kd,
          -2.0 * loglik_at_max + kd * std::log(static_cast<double>(n))};
}

}  // namespace zips
