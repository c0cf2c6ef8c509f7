#pragma once

#include <utility>
#include <vector>

#include "jsmix/common.hpp"
#include "jsmix/rng.hpp"

namespace jsmix {

// ---- special functions -----------------------------------------------------

double log_beta_fn(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction expansion,
// 1e-14 target accuracy. Needed for truncation normalisers at extreme
// shapes such as alpha = 1/T.
double ibeta_reg(double a, double b, double x);

// Inverse of ibeta_reg in x (Newton with bisection safeguard).
double ibeta_reg_inv(double a, double b, double p);

double beta_logpdf(double x, double a, double b);
double beta_cdf(double x, double a, double b);

// ---- constrained Beta family ----------------------------------------------

enum class BetaKind { Plain, Truncated, Restricted };

struct BetaSpec {
  double alpha = 1.0;
  double beta = 1.0;
  double lower = 0.0;
  double upper = 1.0;
  BetaKind kind = BetaKind::Plain;

  static BetaSpec plain(double a, double b) { return {a, b, 0.0, 1.0, BetaKind::Plain}; }
  static BetaSpec truncated(double a, double b, double lo, double hi = 1.0) {
    return {a, b, lo, hi, BetaKind::Truncated};
  }
  static BetaSpec restricted(double a, double b, double lo, double hi = 1.0) {
    return {a, b, lo, hi, BetaKind::Restricted};
  }
};

// Beta density renormalised over (lower, upper).
double tbeta_logpdf(double x, const BetaSpec& spec);
// Inverse-CDF draw restricted to the truncated quantile range, so runtime
// stays bounded as lower -> 1.
double tbeta_sample(const BetaSpec& spec, Rng& rng);

// Shift-and-scale ("4-parameter") Beta on (lower, upper).
double rbeta_logpdf(double x, const BetaSpec& spec);
double rbeta_sample(const BetaSpec& spec, Rng& rng);

double constrained_beta_logpdf(double x, const BetaSpec& spec);
double constrained_beta_sample(const BetaSpec& spec, Rng& rng);

// ---- recruitment prior ------------------------------------------------------

// Beta(1/T, 2 - t/T) shape pair for occasion t (1-based); induces an
// objective prior on the super-population size.
std::pair<double, double> entry_prior_params(int t, int n_occasions);

// ---- ordered chains ---------------------------------------------------------

// u_1 ~ Beta(links[0]); u_g | u_{g-1} ~ tBeta/rBeta(links[g]; u_{g-1}, 1).
// Sampling always yields u_1 < u_2 < ... < u_G.
struct OrderedChainSpec {
  std::vector<BetaSpec> links;

  int size() const { return static_cast<int>(links.size()); }

  // Beta(1,2) then tBeta(1,1; u1, 1): the two-component survival prior.
  static OrderedChainSpec beta_tbeta_pair();
  // Concatenated conditional uniforms for G components.
  static OrderedChainSpec uniform_chain(int n_components);
};

std::vector<double> ordered_chain_sample(const OrderedChainSpec& chain, Rng& rng);

// Joint log density of an ordered vector under the chain.
double ordered_chain_logpdf(const OrderedChainSpec& chain, std::span<const double> values);

// Closed-form marginal of u_2 when u_1 ~ Beta(a1, b1), u_2|u_1 ~ tBeta(1, b2; u_1, 1).
// Requires b1 > b2 to keep the beta function finite.
double tbeta_marginal_pdf(double u2, double alpha1, double beta1, double beta2);

// Marginal means/variances of a plain-Beta-then-restricted chain via the
// law of total expectation.
struct ChainMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

ChainMoments rbeta_chain_moments(const OrderedChainSpec& chain);

// Solves for the restricted-link shapes hitting target marginal moments given
// the previous component's moments.
std::pair<double, double> rbeta_params_from_moments(double prev_mean, double prev_var,
                                                    double target_mean, double target_var);

// ---- model prior configuration ----------------------------------------------

struct PriorConfig {
  double mu_variance = 10.0;        // Normal(0, mu_variance) on each intercept
  double tau_variance = 0.25;       // Normal(0, tau_variance) per occasion effect
  double delta_a = 1.0;             // Beta(delta_a, delta_b) on the undetectability
  double delta_b = 1.0;
  double dirichlet_alpha = 1.0;     // symmetric Dirichlet on the weights
  OrderedChainSpec survival_chain;  // empty -> defaults chosen per model
  double delta_fixed = -1.0;        // >= 0 pins delta (testing hook)

  bool has_fixed_delta() const { return delta_fixed >= 0.0; }
};

}  // namespace jsmix
