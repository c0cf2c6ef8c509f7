#pragma once

#include <array>
#include <span>

#include "jsmix/common.hpp"
#include "jsmix/params.hpp"

namespace jsmix {

// Latent states of the multi-state chain.
enum LatentStateIndex { kNotEntered = 0, kAlive = 1, kDeparted = 2 };

// Per-occasion probabilities for one mixture component, precomputed once per
// sweep so the per-individual forward passes stay cheap.
struct GroupCache {
  Grid2<double> p;        // effective capture probability, G x T
  Grid2<double> phi_pow;  // survival across (t-1, t], G x T, column 0 unused
  const Grid2<double>* rho = nullptr;

  int n_groups() const { return p.rows(); }
  int n_occasions() const { return p.cols(); }
};

GroupCache build_group_cache(const ModelSpec& spec, const GroupParams& params,
                             const TimeGrid& grid);

// rows: (1-rho, rho, 0), (0, phi, 1-phi), (0, 0, 1); state 3 is absorbing.
std::array<std::array<double, 3>, 3> transition_matrix(double rho_t, double phi_compounded);

// Exact log P(y_i | theta_g) by the forward algorithm over
// {not-entered, alive, departed}; kLogZero for impossible histories.
double forward_loglik(std::span<const uint8_t> history, const GroupCache& cache, int g);

// Convenience overload building the cache for a single evaluation.
double forward_loglik(std::span<const uint8_t> history, const ModelSpec& spec,
                      const GroupParams& params, const TimeGrid& grid, int g);

// log sum_g w_g P(y_i | theta_g) via log-sum-exp.
double mixture_loglik(std::span<const uint8_t> history, std::span<const double> weights,
                      const GroupCache& cache);

double mixture_loglik(std::span<const uint8_t> history, const ModelSpec& spec,
                      const GroupParams& params, const TimeGrid& grid);

// psi = 1 - prod_t (1 - rho_t).
double inclusion_prob(std::span<const double> rho_row);

// M * sum_g w_g psi_g.
double expected_nsuper(int m_rows, std::span<const double> weights, std::span<const double> psi);

}  // namespace jsmix
