#include "zips/bayes.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "zips/numeric.hpp"
#include "zips/random.hpp"

namespace zips {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool inside(const Vector& v, const CoefficientBox& box) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= box.lower && v[i] <= box.upper)) return false;
  }
  return true;
}

double log_theta_of(double eta, ThetaLink link) {
  return link == ThetaLink::Log ? eta : -softplus(-eta);
}

double theta_of(double eta, ThetaLink link) {
  return link == ThetaLink::Log ? std::exp(eta) : logistic(eta);
}

struct Block {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  Matrix chol;
  double log_scale = 0.0;
};

struct TargetValue {
  double log_target;
  double loglik;
};

// Lower Cholesky factor of a covariance block, or nullopt.
std::optional<Matrix> cholesky(const Matrix& cov) {
  if (!cov.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Matrix(llt.matrixL());
}

Matrix conditional_covariance(const Matrix& cov, Eigen::Index off, Eigen::Index size) {
  const Eigen::Index d = cov.rows();
  if (size == d) return cov;
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (i < off || i >= off + size) rest.push_back(i);
  }
  const auto r = static_cast<Eigen::Index>(rest.size());
  Matrix cross(size, r);
  Matrix other(r, r);
  for (Eigen::Index a = 0; a < r; ++a) {
    for (Eigen::Index i = 0; i < size; ++i) cross(i, a) = cov(off + i, rest[a]);
    for (Eigen::Index b = 0; b < r; ++b) other(a, b) = cov(rest[a], rest[b]);
  }
  const Matrix block = cov.block(off, off, size, size);
  return block - cross * other.ldlt().solve(cross.transpose());
}

struct ChainSetup {
  Vector center;
  std::vector<Block> blocks;
  bool mle_shape = true;
};

void run_chain(const Posterior& post, ChainSetup setup, const McmcConfig& cfg,
               std::size_t beta_size, std::size_t chain, ChainSet& out) {
  RandomStream rng(cfg.seed, chain + 1);
  const Likelihood& like = post.likelihood();
  const auto p = static_cast<Eigen::Index>(beta_size);
  const bool inflated = setup.blocks.size() > 1;

  // Per-row likelihood pieces are cached so a block update only recomputes
  // the pieces that depend on that block.
  struct State {
    Vector x;
    std::vector<double> parent;
    OmegaTerms omega;
    TargetValue value{-kInf, -kInf};
  };
  auto target = [&](const Vector& v, const std::vector<double>& parent,
                    const OmegaTerms& omega) -> TargetValue {
    const CoefficientSet coeffs = CoefficientSet::unflatten(v, beta_size);
    const double lp = post.log_prior(coeffs);
    if (lp == -kInf) return {-kInf, -kInf};
    const double ll = like.combine(parent, inflated ? &omega : nullptr);
    if (ll == -kInf) return {-kInf, -kInf};
    return {ll + lp + post.log_jacobian(coeffs), ll};
  };
  auto evaluate = [&](State& s) {
    s.value = {-kInf, -kInf};
    if (!like.parent_terms(s.x.head(p), s.parent)) return;
    if (inflated) like.omega_terms(s.x.tail(s.x.size() - p), s.omega);
    s.value = target(s.x, s.parent, s.omega);
  };
  auto normals = [&](Eigen::Index k) {
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
    return z;
  };

  // Dispersed start around the warm start point.
  State state;
  double jitter = 1.0;
  for (int attempt = 0; attempt < 50 && state.value.log_target == -kInf; ++attempt) {
    state.x = setup.center;
    for (const Block& b : setup.blocks) {
      state.x.segment(b.offset, b.size) += jitter * b.chol * normals(b.size);
    }
    evaluate(state);
    jitter *= 0.5;
  }
  if (state.value.log_target == -kInf) {
    state.x = setup.center;
    evaluate(state);
    if (state.value.log_target == -kInf) {
      throw std::runtime_error("run_mcmc: the posterior is zero at the warm start");
    }
  }
  std::vector<double> scratch_parent;
  OmegaTerms scratch_omega;

  const std::size_t nb = setup.blocks.size();
  std::vector<int> window_accepts(nb, 0);
  std::vector<int> kept_accepts(nb, 0);
  std::vector<std::vector<double>> window_rates(nb);
  std::vector<std::vector<Vector>> burn_history(nb);
  const int post_burn = cfg.iterations - cfg.burn_in;
  const auto kept = static_cast<std::size_t>(cfg.kept());
  std::size_t stored = 0;
  int window_index = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const Block& b = setup.blocks[bi];
      Vector proposal = state.x;
      proposal.segment(b.offset, b.size) += std::exp(b.log_scale) * (b.chol * normals(b.size));
      TargetValue cand{-kInf, -kInf};
      if (bi == 0) {
        if (like.parent_terms(proposal.head(p), scratch_parent)) {
          cand = target(proposal, scratch_parent, state.omega);
        }
      } else {
        like.omega_terms(proposal.tail(proposal.size() - p), scratch_omega);
        cand = target(proposal, state.parent, scratch_omega);
      }
      const double log_u = std::log(rng.uniform_open());
      if (cand.log_target != -kInf && log_u < cand.log_target - state.value.log_target) {
        state.x = std::move(proposal);
        state.value = cand;
        if (bi == 0) {
          std::swap(state.parent, scratch_parent);
        } else {
          std::swap(state.omega, scratch_omega);
        }
        if (it < cfg.burn_in) {
          ++window_accepts[bi];
        } else {
          ++kept_accepts[bi];
        }
      }
      if (it < cfg.burn_in && !setup.mle_shape) burn_history[bi].push_back(state.x.segment(b.offset, b.size));
    }

    if (it < cfg.burn_in && (it + 1) % cfg.adapt_window == 0) {
      ++window_index;
      for (std::size_t bi = 0; bi < nb; ++bi) {
        const double rate = static_cast<double>(window_accepts[bi]) / cfg.adapt_window;
        window_rates[bi].push_back(rate);
        setup.blocks[bi].log_scale +=
            2.0 * (rate - cfg.target_acceptance) / std::sqrt(static_cast<double>(window_index));
        window_accepts[bi] = 0;
      }
    }

    // Without an MLE covariance, learn the proposal shape once from the
    // second quarter of burn-in.
    if (!setup.mle_shape && it + 1 == cfg.burn_in / 2) {
      for (std::size_t bi = 0; bi < nb; ++bi) {
        Block& b = setup.blocks[bi];
        const auto& hist = burn_history[bi];
        const std::size_t from = hist.size() / 2;
        const std::size_t count = hist.size() - from;
        if (count < static_cast<std::size_t>(20 * b.size)) continue;
        Vector mean = Vector::Zero(b.size);
        for (std::size_t i = from; i < hist.size(); ++i) mean += hist[i];
        mean /= static_cast<double>(count);
        Matrix cov = Matrix::Zero(b.size, b.size);
        for (std::size_t i = from; i < hist.size(); ++i) {
          const Vector d = hist[i] - mean;
          cov += d * d.transpose();
        }
        cov /= static_cast<double>(count - 1);
        if (auto l = cholesky(cov)) {
          b.chol = *l;
          b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(b.size)));
        }
      }
      for (auto& h : burn_history) h.clear();
    }

    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 && stored < kept) {
      const std::size_t row = chain * kept + stored;
      for (Eigen::Index j = 0; j < state.x.size(); ++j) {
        out.draws[row * out.dim + static_cast<std::size_t>(j)] = state.x[j];
      }
      out.loglik_draws[row] = state.value.loglik;
      ++stored;
    }
  }

  out.acceptance_rates[chain].resize(nb);
  for (std::size_t bi = 0; bi < nb; ++bi) {
    out.acceptance_rates[chain][bi] =
        post_burn > 0 ? static_cast<double>(kept_accepts[bi]) / post_burn : 0.0;
  }
  out.adaptation_rates[chain] = std::move(window_rates);
}

}  // namespace

void PriorSpec::validate() const {
  if (omega_prior && !(omega_prior->b1 > 0.0 && omega_prior->b2 > 0.0)) {
    throw std::invalid_argument("Beta prior shapes b1, b2 must be positive");
  }
  if (theta_prior && !(theta_prior->a1 >= 0.0 && theta_prior->a2 >= 0.0)) {
    throw std::invalid_argument("conjugate prior exponents a1, a2 must be nonnegative");
  }
  for (const CoefficientBox* box : {&beta_box, &gamma_box}) {
    if (!std::isfinite(box->lower) || !std::isfinite(box->upper) || !(box->lower < box->upper)) {
      throw std::invalid_argument("coefficient prior box must be finite with lower < upper");
    }
  }
}

Posterior::Posterior(Likelihood likelihood, PriorSpec prior)
    : likelihood_(std::move(likelihood)), prior_(std::move(prior)) {
  prior_.validate();
}

bool Posterior::theta_prior_active() const {
  return prior_.theta_prior.has_value() && likelihood_.data().intercept_only_x();
}

bool Posterior::omega_prior_active(bool inflated) const {
  return inflated && prior_.omega_prior.has_value() && likelihood_.data().intercept_only_z();
}

double Posterior::log_prior(const CoefficientSet& coeffs) const {
  if (!inside(coeffs.beta, prior_.beta_box) || !inside(coeffs.gamma, prior_.gamma_box)) {
    return -kInf;
  }
  double lp = 0.0;
  if (theta_prior_active()) {
    const double eta = coeffs.beta[0];
    const double theta = theta_of(eta, likelihood_.link());
    const PowerSeriesFamily& family = likelihood_.family();
    if (!family.in_domain(theta)) return -kInf;
    lp += prior_.theta_prior->a1 * log_theta_of(eta, likelihood_.link()) -
          prior_.theta_prior->a2 * family.log_series(theta);
  } else {
    lp -= static_cast<double>(coeffs.beta.size()) *
          std::log(prior_.beta_box.upper - prior_.beta_box.lower);
  }
  if (coeffs.inflated()) {
    if (omega_prior_active(true)) {
      const double zeta = coeffs.gamma[0];
      const double b1 = prior_.omega_prior->b1;
      const double b2 = prior_.omega_prior->b2;
      const double log_beta_fn = std::lgamma(b1) + std::lgamma(b2) - std::lgamma(b1 + b2);
      lp += (b1 - 1.0) * -softplus(-zeta) + (b2 - 1.0) * -softplus(zeta) - log_beta_fn;
    } else {
      lp -= static_cast<double>(coeffs.gamma.size()) *
            std::log(prior_.gamma_box.upper - prior_.gamma_box.lower);
    }
  }
  return lp;
}

double Posterior::log_density(const CoefficientSet& coeffs) const {
  const double lp = log_prior(coeffs);
  if (lp == -kInf) return -kInf;
  const double ll = likelihood_(coeffs);
  return ll == -kInf ? -kInf : ll + lp;
}

double Posterior::log_jacobian(const CoefficientSet& coeffs) const {
  double lj = 0.0;
  if (theta_prior_active()) {
    const double eta = coeffs.beta[0];
    lj += likelihood_.link() == ThetaLink::Log ? eta : -softplus(-eta) - softplus(eta);
  }
  if (coeffs.inflated() && omega_prior_active(true)) {
    const double zeta = coeffs.gamma[0];
    lj += -softplus(-zeta) - softplus(zeta);
  }
  return lj;
}

double log_posterior(const DesignData& data, const PowerSeriesFamily& family,
                     const CoefficientSet& coeffs, const PriorSpec& prior) {
  return Posterior(Likelihood(data, family), prior).log_density(coeffs);
}

void McmcConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("need at least one chain");
  if (iterations < 1 || burn_in < 0 || thin < 1) {
    throw std::invalid_argument("iterations must be positive, burn-in nonnegative, thin >= 1");
  }
  if (kept() < 1) throw std::invalid_argument("no draws left after burn-in and thinning");
  if (adapt_window < 1) throw std::invalid_argument("adaptation window must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  }
}

std::vector<double> ChainSet::parameter_chain(std::size_t chain, std::size_t j) const {
  std::vector<double> out(kept);
  for (std::size_t t = 0; t < kept; ++t) out[t] = draw(chain, t, j);
  return out;
}

std::vector<std::vector<double>> ChainSet::parameter_chains(std::size_t j) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains);
  for (std::size_t c = 0; c < chains; ++c) out.push_back(parameter_chain(c, j));
  return out;
}

Vector ChainSet::posterior_mean() const {
  Vector mean = Vector::Zero(static_cast<Eigen::Index>(dim));
  const std::size_t rows = chains * kept;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < dim; ++j) mean[static_cast<Eigen::Index>(j)] += draws[r * dim + j];
  }
  return mean / static_cast<double>(rows);
}

ChainSet run_mcmc(const DesignData& data, const PowerSeriesFamily& family, const PriorSpec& prior,
                  const McmcConfig& config, bool inflated, std::optional<ThetaLink> link) {
  config.validate();
  const ThetaLink theta_link = link.value_or(default_theta_link(family));
  const Posterior post(Likelihood(data, family, theta_link), prior);
  const auto p = static_cast<Eigen::Index>(data.x().cols());
  const auto q = inflated ? static_cast<Eigen::Index>(data.z().cols()) : Eigen::Index{0};

  MleOptions options;
  options.link = theta_link;
  const MleResult warm = mle_regression(data, family, inflated, options);

  ChainSetup setup;
  ChainSet out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans{{0, p}};
  if (inflated) spans.emplace_back(p, q);
  if (warm.converged && std::isfinite(warm.loglik_at_max)) {
    setup.center = warm.estimates;
    for (auto [off, size] : spans) {
      Block b;
      b.offset = off;
      b.size = size;
      b.log_scale = std::log(2.38 / std::sqrt(static_cast<double>(size)));
      // Each block moves with the other held fixed, so its proposal follows
      // the conditional covariance.
      std::optional<Matrix> l;
      if (warm.covariance) l = cholesky(conditional_covariance(*warm.covariance, off, size));
      if (l) {
        b.chol = *l;
      } else {
        b.chol = 0.1 * Matrix::Identity(size, size);
        setup.mle_shape = false;
      }
      setup.blocks.push_back(std::move(b));
    }
  } else {
    out.warm_start_fallback = true;
    setup.center = Vector::Zero(p + q);
    setup.mle_shape = false;
    for (auto [off, size] : spans) {
      Block b;
      b.offset = off;
      b.size = size;
      b.chol = Matrix::Identity(size, size);
      b.log_scale = 0.0;
      setup.blocks.push_back(std::move(b));
    }
  }

  out.chains = static_cast<std::size_t>(config.chains);
  out.kept = static_cast<std::size_t>(config.kept());
  out.dim = static_cast<std::size_t>(p + q);
  out.beta_size = static_cast<std::size_t>(p);
  for (const auto& n : data.x_names()) out.parameter_names.push_back("beta[" + n + "]");
  if (inflated) {
    for (const auto& n : data.z_names()) out.parameter_names.push_back("gamma[" + n + "]");
  }
  out.draws.assign(out.chains * out.kept * out.dim, 0.0);
  out.loglik_draws.assign(out.chains * out.kept, 0.0);
  out.acceptance_rates.resize(out.chains);
  out.adaptation_rates.resize(out.chains);
  out.burn_in = config.burn_in;
  out.thin = config.thin;

  std::vector<std::exception_ptr> errors(out.chains);
  auto body = [&](std::size_t c) {
    try {
      run_chain(post, setup, config, static_cast<std::size_t>(p), c, out);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel && out.chains > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(out.chains);
    for (std::size_t c = 0; c < out.chains; ++c) workers.emplace_back(body, c);
  } else {
    for (std::size_t c = 0; c < out.chains; ++c) body(c);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const Likelihood like = post.likelihood();
  const auto beta_size = static_cast<std::size_t>(p);
  out.loglik_at = [like, beta_size](const Vector& v) {
    return like(CoefficientSet::unflatten(v, beta_size));
  };
  return out;
}

void write_chains_csv(const ChainSet& chains, std::ostream& out) {
  out << "chain,iteration";
  for (const auto& name : chains.parameter_names) out << ',' << name;
  out << ",loglik\n";
  const auto old_precision = out.precision(17);
  for (std::size_t c = 0; c < chains.chains; ++c) {
    for (std::size_t t = 0; t < chains.kept; ++t) {
      out << c + 1 << ',' << chains.burn_in + t * static_cast<std::size_t>(chains.thin) + 1;
      for (std::size_t j = 0; j < chains.dim; ++j) out << ',' << chains.draw(c, t, j);
      out << ',' << chains.loglik_draws[c * chains.kept + t] << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace zips
