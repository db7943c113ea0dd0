#include "zips/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace zips {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of pooled ranks, ties sharing their average rank.
std::vector<std::vector<double>> rank_normalize(const std::vector<std::vector<double>>& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains) {
    for (double x : c) pooled.emplace_back(x, pooled.size());
  }
  std::sort(pooled.begin(), pooled.end());
  const double s = static_cast<double>(pooled.size());
  std::vector<double> scores(pooled.size());
  const boost::math::normal standard;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    const double z = boost::math::quantile(standard, (rank - 0.375) / (s + 0.25));
    for (std::size_t k = i; k < j; ++k) scores[pooled[k].second] = z;
    i = j;
  }
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  for (const auto& c : chains) {
    out.emplace_back(scores.begin() + static_cast<std::ptrdiff_t>(pos),
                     scores.begin() + static_cast<std::ptrdiff_t>(pos + c.size()));
    pos += c.size();
  }
  return out;
}

double classic_rhat(const std::vector<std::vector<double>>& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    w += sample_variance(c);
  }
  w /= static_cast<double>(chains.size());
  const double b_over_n = sample_variance(means);
  if (!(w > 0.0)) return kNaN;
  return std::sqrt(((n - 1.0) / n * w + b_over_n) / w);
}

}  // namespace

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("split_rhat needs at least two chains");
  for (const auto& c : chains) {
    if (c.size() != chains.front().size() || c.size() < 4) {
      throw std::invalid_argument("split_rhat needs equal-length chains of at least 4 draws");
    }
  }
  const auto halves = split_halves(chains);
  const double bulk = classic_rhat(rank_normalize(halves));

  std::vector<double> pooled;
  for (const auto& c : halves) pooled.insert(pooled.end(), c.begin(), c.end());
  std::sort(pooled.begin(), pooled.end());
  const double median = sorted_quantile(pooled, 0.5);
  auto folded = halves;
  for (auto& c : folded) {
    for (double& x : c) x = std::abs(x - median);
  }
  const double tail = classic_rhat(rank_normalize(folded));
  if (std::isnan(bulk) || std::isnan(tail)) return kNaN;
  return std::max(bulk, tail);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  if (chains.empty() || chains.front().size() < 4) {
    throw std::invalid_argument("effective_sample_size needs chains of at least 4 draws");
  }
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("chains must have equal length");
    means.push_back(mean_of(c));
    w += sample_variance(c);
  }
  w /= static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double var_plus = (nd - 1.0) / nd * w + (m > 1 ? sample_variance(means) : 0.0);
  const double total = static_cast<double>(m) * nd;
  if (!(var_plus > 0.0)) return kNaN;

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) {
        s += (chains[c][t] - means[c]) * (chains[c][t + lag] - means[c]);
      }
      acov += s / nd;
    }
    acov /= static_cast<double>(m);
    return 1.0 - (w - acov) / var_plus;
  };

  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double rho_even = k == 0 ? 1.0 : rho(2 * k);
    double pair = rho_even + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(total));
  return total / tau;
}

std::string stars_from_intervals(const Interval& ci90, const Interval& ci95, const Interval& ci99) {
  if (ci99.excludes_zero()) return "***";
  if (ci95.excludes_zero()) return "**";
  if (ci90.excludes_zero()) return "*";
  return "";
}

std::optional<double> PosteriorSummary::max_rhat() const {
  std::optional<double> out;
  for (const auto& p : parameters) {
    if (!p.rhat) continue;
    if (std::isnan(*p.rhat)) return kNaN;
    out = out ? std::max(*out, *p.rhat) : *p.rhat;
  }
  return out;
}

double PosteriorSummary::min_ess() const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& p : parameters) out = std::min(out, p.ess);
  return out;
}

PosteriorSummary diagnostics(const ChainSet& chains) {
  PosteriorSummary summary;
  for (std::size_t j = 0; j < chains.dim; ++j) {
    ParameterSummary ps;
    ps.name = chains.parameter_names[j];
    const auto per_chain = chains.parameter_chains(j);
    std::vector<double> pooled;
    for (const auto& c : per_chain) pooled.insert(pooled.end(), c.begin(), c.end());
    ps.mean = mean_of(pooled);
    ps.sd = pooled.size() > 1 ? std::sqrt(sample_variance(pooled)) : 0.0;
    std::sort(pooled.begin(), pooled.end());
    ps.ci90 = {sorted_quantile(pooled, 0.05), sorted_quantile(pooled, 0.95)};
    ps.ci95 = {sorted_quantile(pooled, 0.025), sorted_quantile(pooled, 0.975)};
    ps.ci99 = {sorted_quantile(pooled, 0.005), sorted_quantile(pooled, 0.995)};
    ps.stars = stars_from_intervals(ps.ci90, ps.ci95, ps.ci99);
    if (chains.chains >= 2 && chains.kept >= 4) ps.rhat = split_rhat(per_chain);
    if (chains.kept >= 4) {
      ps.ess = effective_sample_size(per_chain);
      ps.mcse = ps.sd / std::sqrt(ps.ess);
    }
    summary.parameters.push_back(std::move(ps));
  }
  return summary;
}

DicResult dic(const ChainSet& chains) {
  DicResult out;
  double sum = 0.0;
  for (double ll : chains.loglik_draws) sum += -2.0 * ll;
  out.mean_deviance = sum / static_cast<double>(chains.loglik_draws.size());
  const double ll_at_mean = chains.loglik_at ? chains.loglik_at(chains.posterior_mean()) : kNaN;
  if (!std::isfinite(ll_at_mean)) {
    out.valid = false;
    out.warning = "log-likelihood at the posterior mean is not finite; DIC undefined";
    out.deviance_at_mean = std::numeric_limits<double>::infinity();
    out.p_d = kNaN;
    out.dic = kNaN;
    return out;
  }
  out.deviance_at_mean = -2.0 * ll_at_mean;
  out.p_d = out.mean_deviance - out.deviance_at_mean;
  out.dic = out.mean_deviance + out.p_d;
  return out;
}

}  // namespace zips
