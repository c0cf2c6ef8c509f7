#pragma once

#include <vector>

#include "jsmix/common.hpp"
#include "jsmix/model_spec.hpp"
#include "jsmix/time_grid.hpp"

namespace jsmix {

// Full parameter state of the augmented mixture model.
struct GroupParams {
  Grid2<double> rho;            // G x T recruitment probabilities
  std::vector<double> phi;      // survival components, ascending where ordered
  Grid2<double> phi_gt;         // G x T free base survivals (TimeByGroup only)
  std::vector<double> mu;       // capture intercepts on the logit scale (1 or G)
  std::vector<double> tau;      // length T, constrained to sum zero
  Grid2<double> p_gt;           // G x T free capture probabilities (TimeByGroup only)
  double delta = 0.0;           // part-time undetectability, fixed 0 unless rpt
  std::vector<double> weights;  // mixture weights on the simplex

  int n_groups() const { return rho.rows(); }
  int n_occasions() const { return rho.cols(); }
};

// logit^-1(mu + tau_t), thinned by (1 - delta) for part-time individuals.
double capture_prob(double mu, double tau_t, double delta, bool part_time);

// Effective capture probability of group g at occasion t under the model spec.
double capture_prob_of(const ModelSpec& spec, const GroupParams& params, int g, int t);

// Base per-unit survival of group g governing the transition into occasion t.
double survival_base_of(const ModelSpec& spec, const GroupParams& params, int g, int t);

// Per-individual latent trajectories and mixture labels.
struct LatentState {
  Grid2<uint8_t> z;    // alive
  Grid2<uint8_t> r;    // recruitable
  Grid2<uint8_t> v;    // present (equals z outside the part-time group)
  std::vector<int> c;  // labels in 0..G-1

  int n_rows() const { return z.rows(); }
  int n_occasions() const { return z.cols(); }
};

// Recomputes r from z (r_1 = 1, r_t = min(r_{t-1}, 1 - z_{t-1})) and checks
// that z never re-enters after an exit.
void rebuild_recruitable(LatentState& latent);
bool latent_invariants_hold(const LatentState& latent);

struct AbundanceDraw {
  std::vector<int> n_t;      // alive per occasion
  int n_super = 0;           // rows ever alive
  std::vector<int> n_group;  // n_super split by label
  std::vector<double> psi;   // per-group inclusion probabilities (set by caller)
};

AbundanceDraw derived_counts(const LatentState& latent, int n_groups);

// Individuals ever alive in year `y` (per the occasion->year map), by group.
// Row per year: column g = group count, last column = total.
Grid2<int> yearly_group_counts(const LatentState& latent, const std::vector<int>& occasion_year,
                               int n_groups);

}  // namespace jsmix
