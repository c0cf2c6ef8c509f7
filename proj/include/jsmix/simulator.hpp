#pragma once

#include <string>
#include <vector>

#include "jsmix/capture_data.hpp"
#include "jsmix/model_spec.hpp"
#include "jsmix/params.hpp"
#include "jsmix/rng.hpp"
#include "jsmix/time_grid.hpp"

namespace jsmix {

// Configuration for the synthetic three-group study used by `simulate`
// and `experiment`.
struct ScenarioConfig {
  int n_occasions = 10;
  int n_available = 500;   // individuals available to enter (M*)
  double phi_transient = 0.01;
  double phi_resident = 0.997;
  double mu = 0.0;
  double delta = 0.7;
  double tau_sd = 0.5;     // occasion effects drawn N(0, tau_sd^2), recentred
  // residents / part-timers enter mostly at t=1, with a small boost at the
  // first occasion of each later year (t = occasions_per_year*k + 1) and a
  // trickle otherwise; transients use a constant hazard.
  int occasions_per_year = 10;
  double rho_r_first = 0.4;
  double rho_r_year_start = 0.02;
  double rho_r_later = 0.0025;
  double rho_p_first = 0.4;
  double rho_p_year_start = 0.04;
  double rho_p_later = 0.005;
  double rho_t_const = 0.02;
  std::vector<double> weights = {0.2, 0.45, 0.35};
  uint64_t seed = 1;
};

// Ground truth retained next to the generated capture histories.
struct SimTruth {
  ModelSpec spec;
  GroupParams params;
  TimeGrid grid;
  LatentState latent;       // rows aligned with all n_available individuals
  std::vector<int> group;   // true component per individual
  std::vector<int> kept;    // indices of individuals with >= 1 detection
  int n_super = 0;          // entered the population at some occasion
  std::vector<int> n_t;     // alive per occasion
};

struct SimResult {
  CaptureData data;  // observed rows only
  SimTruth truth;
};

// Survey-day pattern: nine within-year gaps (in days) repeated yearly with a
// fixed year-to-year gap, truncated to n_occasions.
std::vector<double> scenario_day_offsets(int n_occasions);

// Fully specified generator parameters for the scenario (tau drawn from rng).
GroupParams scenario_params(const ScenarioConfig& config, const TimeGrid& grid, Rng& rng);

// Simulate latent careers and detections under arbitrary params. Detection
// for part-timers composes presence (1 - delta) with the shared capture rate.
SimResult simulate_population(const ModelSpec& spec, const GroupParams& params,
                              const TimeGrid& grid, int n_available, uint64_t seed);

// Scenario wrapper: builds the grid, draws tau, simulates.
SimResult simulate_scenario(const ScenarioConfig& config);

// Expected super-population size E[N] = M* sum_g w_g psi_g.
double scenario_expected_nsuper(const ScenarioConfig& config);

}  // namespace jsmix
