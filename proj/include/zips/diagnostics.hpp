#ifndef ZIPS_DIAGNOSTICS_HPP
#define ZIPS_DIAGNOSTICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "zips/bayes.hpp"

namespace zips {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  Interval ci90;
  Interval ci95;
  Interval ci99;
  std::optional<double> rhat;  // absent with a single chain
  double ess = 0.0;
  double mcse = 0.0;  // Monte Carlo standard error of the mean
  std::string stars;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;

  std::optional<double> max_rhat() const;
  double min_ess() const;
};

// Moments, equal-tailed intervals, rank-normalized split R-hat, ESS and
// relevance stars for every parameter.
PosteriorSummary diagnostics(const ChainSet& chains);

// Rank-normalized split R-hat: the larger of the bulk and folded-tail
// values. Requires at least two chains.
double split_rhat(const std::vector<std::vector<double>>& chains);

// Multi-chain effective sample size with the autocorrelation sum truncated
// at the first negative pair of consecutive lags.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

// Type-7 sample quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double p);

// "***" if the 99% interval excludes 0, "**" for 95%, "*" for 90%.
std::string stars_from_intervals(const Interval& ci90, const Interval& ci95, const Interval& ci99);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;     // mean of -2 loglik over draws
  double deviance_at_mean = 0.0;  // -2 loglik at the posterior mean
  bool valid = true;
  std::string warning;
};

DicResult dic(const ChainSet& chains);

}  // namespace zips

#endif  // ZIPS_DIAGNOSTICS_HPP
