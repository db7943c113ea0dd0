#ifndef ZIPS_BAYES_HPP
#define ZIPS_BAYES_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zips/mle.hpp"
#include "zips/regression.hpp"

namespace zips {

// omega ~ Beta(b1, b2). Used for constant-omega (intercept-only Z) models.
struct BetaPrior {
  double b1 = 1.0;
  double b2 = 1.0;
};

// pi(theta) proportional to theta^a1 / f(theta)^a2. Used for constant-theta
// (intercept-only X) models. For Poisson this is a Gamma(a1 + 1, a2) kernel.
struct ConjugateThetaPrior {
  double a1 = 0.0;
  double a2 = 0.0;
};

// Independent uniform priors on every coefficient of a block.
struct CoefficientBox {
  double lower = -1e5;
  double upper = 1e5;
};

// The constant-parameter priors apply only when the matching design matrix
// is intercept-only; otherwise that block falls back to its uniform box.
struct PriorSpec {
  std::optional<BetaPrior> omega_prior;
  std::optional<ConjugateThetaPrior> theta_prior;
  CoefficientBox beta_box;
  CoefficientBox gamma_box;

  // Throws std::invalid_argument on non-positive Beta shapes, negative
  // conjugate exponents, or an empty/non-finite box.
  void validate() const;
};

// Log posterior density (up to the normalizing constant) with loglik.
// Constant-parameter priors are densities in (theta, omega); coefficient
// priors are densities in (beta, gamma).
class Posterior {
 public:
  Posterior(Likelihood likelihood, PriorSpec prior);

  // -infinity outside the prior box.
  double log_prior(const CoefficientSet& coeffs) const;
  double log_density(const CoefficientSet& coeffs) const;
  // log |d(theta, omega) / d(beta_0, gamma_0)| for blocks carrying a
  // constant-parameter prior; zero otherwise.
  double log_jacobian(const CoefficientSet& coeffs) const;

  const Likelihood& likelihood() const { return likelihood_; }
  const PriorSpec& prior() const { return prior_; }
  bool theta_prior_active() const;
  bool omega_prior_active(bool inflated) const;

 private:
  Likelihood likelihood_;
  PriorSpec prior_;
};

double log_posterior(const DesignData& data, const PowerSeriesFamily& family,
                     const CoefficientSet& coeffs, const PriorSpec& prior);

struct McmcConfig {
  int chains = 3;
  // Total iterations per chain, burn-in included.
  int iterations = 10000;
  int burn_in = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  // Iterations per proposal-scale adaptation step during burn-in.
  int adapt_window = 100;
  double target_acceptance = 0.3;
  // Run chains on separate threads. Results do not depend on this.
  bool parallel = true;

  int kept() const { return thin > 0 ? (iterations - burn_in) / thin : 0; }
  void validate() const;
};

// Posterior draws in chain-major order.
struct ChainSet {
  std::vector<std::string> parameter_names;
  std::size_t chains = 0;
  std::size_t kept = 0;
  std::size_t dim = 0;
  std::size_t beta_size = 0;
  std::vector<double> draws;         // ((c * kept) + t) * dim + j
  std::vector<double> loglik_draws;  // c * kept + t
  // Post-burn-in acceptance rate per chain and block (beta, then gamma).
  std::vector<std::vector<double>> acceptance_rates;
  // Acceptance rate per adaptation window during burn-in, per chain and block.
  std::vector<std::vector<std::vector<double>>> adaptation_rates;
  bool warm_start_fallback = false;
  int burn_in = 0;
  int thin = 1;
  // Data log-likelihood at a flattened coefficient vector; used by dic().
  std::function<double(const Vector&)> loglik_at;

  double draw(std::size_t chain, std::size_t t, std::size_t j) const {
    return draws[(chain * kept + t) * dim + j];
  }
  std::vector<double> parameter_chain(std::size_t chain, std::size_t j) const;
  std::vector<std::vector<double>> parameter_chains(std::size_t j) const;
  Vector posterior_mean() const;
};

// Blockwise random-walk Metropolis within Gibbs: one block for beta and one
// for gamma. Proposals are Gaussian with shape taken from the MLE covariance
// and a per-block scale adapted during burn-in, then frozen. Chains start at
// the MLE jittered from each chain's own stream, so the output depends only on
// (data, prior, config, seed).
ChainSet run_mcmc(const DesignData& data, const PowerSeriesFamily& family, const PriorSpec& prior,
                  const McmcConfig& config, bool inflated = true,
                  std::optional<ThetaLink> link = std::nullopt);

// Writes one row per kept draw: chain,iteration,<parameters>,loglik.
void write_chains_csv(const ChainSet& chains, std::ostream& out);

}  // namespace zips

#endif  // ZIPS_BAYES_HPP
