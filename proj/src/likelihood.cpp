#include "jsmix/likelihood.hpp"

#include <cmath>

#include "jsmix/time_grid.hpp"

namespace jsmix {

GroupCache build_group_cache(const ModelSpec& spec, const GroupParams& params,
                             const TimeGrid& grid) {
  const int G = spec.G;
  const int T = params.n_occasions();
  GroupCache cache;
  cache.p = Grid2<double>(G, T, 0.0);
  cache.phi_pow = Grid2<double>(G, T, 1.0);
  cache.rho = &params.rho;
  for (int g = 0; g < G; ++g) {
    for (int t = 0; t < T; ++t) {
      cache.p(g, t) = capture_prob_of(spec, params, g, t);
      if (t > 0) {
        cache.phi_pow(g, t) = compound_survival(survival_base_of(spec, params, g, t),
                                                grid.lags[t]);
      }
    }
  }
  return cache;
}

std::array<std::array<double, 3>, 3> transition_matrix(double rho_t, double phi_compounded) {
  return {{{1.0 - rho_t, rho_t, 0.0},
           {0.0, phi_compounded, 1.0 - phi_compounded},
           {0.0, 0.0, 1.0}}};
}

double forward_loglik(std::span<const uint8_t> history, const GroupCache& cache, int g) {
  const int T = static_cast<int>(history.size());
  double alpha[3] = {1.0, 0.0, 0.0};  // state mass before the first occasion
  double loglik = 0.0;
  for (int t = 0; t < T; ++t) {
    const double rho = (*cache.rho)(g, t);
    const double phi = cache.phi_pow(g, t);  // 1 at t=0 (no transition yet)
    double next[3];
    if (t == 0) {
      next[kNotEntered] = alpha[kNotEntered] * (1.0 - rho);
      next[kAlive] = alpha[kNotEntered] * rho;
      next[kDeparted] = 0.0;
    } else {
      next[kNotEntered] = alpha[kNotEntered] * (1.0 - rho);
      next[kAlive] = alpha[kNotEntered] * rho + alpha[kAlive] * phi;
      next[kDeparted] = alpha[kAlive] * (1.0 - phi) + alpha[kDeparted];
    }
    const double p = cache.p(g, t);
    if (history[t]) {
      next[kNotEntered] = 0.0;
      next[kAlive] *= p;
      next[kDeparted] = 0.0;
    } else {
      next[kAlive] *= 1.0 - p;
    }
    const double mass = next[0] + next[1] + next[2];
    if (!(mass > 0.0)) return kLogZero;
    loglik += std::log(mass);
    for (int s = 0; s < 3; ++s) alpha[s] = next[s] / mass;
  }
  return loglik;
}

double forward_loglik(std::span<const uint8_t> history, const ModelSpec& spec,
                      const GroupParams& params, const TimeGrid& grid, int g) {
  return forward_loglik(history, build_group_cache(spec, params, grid), g);
}

double mixture_loglik(std::span<const uint8_t> history, std::span<const double> weights,
                      const GroupCache& cache) {
  const int G = cache.n_groups();
  double terms[16];
  std::vector<double> big;
  double* buf = terms;
  if (G > 16) {
    big.resize(G);
    buf = big.data();
  }
  for (int g = 0; g < G; ++g) {
    const double ll = forward_loglik(history, cache, g);
    buf[g] = (weights[g] <= 0.0 || is_log_zero(ll)) ? kLogZero : std::log(weights[g]) + ll;
  }
  return log_sum_exp(buf, G);
}

double mixture_loglik(std::span<const uint8_t> history, const ModelSpec& spec,
                      const GroupParams& params, const TimeGrid& grid) {
  return mixture_loglik(history, params.weights, build_group_cache(spec, params, grid));
}

double inclusion_prob(std::span<const double> rho_row) {
  double log_miss = 0.0;
  for (double rho : rho_row) {
    if (rho >= 1.0) return 1.0;
    log_miss += std::log1p(-rho);
  }
  return -std::expm1(log_miss);
}

double expected_nsuper(int m_rows, std::span<const double> weights, std::span<const double> psi) {
  double acc = 0.0;
  for (size_t g = 0; g < weights.size(); ++g) acc += weights[g] * psi[g];
  return m_rows * acc;
}

}  // namespace jsmix
