#include "jsmix/simulator.hpp"

#include <algorithm>

#include "jsmix/likelihood.hpp"

namespace jsmix {

std::vector<double> scenario_day_offsets(int n_occasions) {
  if (n_occasions < 2) throw ValidationError("scenario needs at least 2 occasions");
  // within-year day gaps; a 240-day break starts each new year of surveying
  static const double kWithinYear[9] = {20, 1, 12, 15, 56, 9, 9, 12, 10};
  std::vector<double> offsets = {0.0};
  int within = 0;
  for (int t = 2; t <= n_occasions; ++t) {
    double lag;
    if ((t - 1) % 10 == 0) {
      lag = 240.0;
      within = 0;
    } else {
      lag = kWithinYear[within++];
    }
    offsets.push_back(offsets.back() + lag);
  }
  return offsets;
}

GroupParams scenario_params(const ScenarioConfig& config, const TimeGrid& grid, Rng& rng) {
  const int T = grid.n_occasions();
  const ModelSpec spec = ModelSpec::rpt_model();
  GroupParams params;
  params.rho = Grid2<double>(3, T, 0.0);
  for (int t = 0; t < T; ++t) {
    const bool first = t == 0;
    const bool year_start = !first && t % config.occasions_per_year == 0;
    params.rho(spec.roles.resident, t) =
        first ? config.rho_r_first : (year_start ? config.rho_r_year_start : config.rho_r_later);
    params.rho(spec.roles.part_time, t) =
        first ? config.rho_p_first : (year_start ? config.rho_p_year_start : config.rho_p_later);
    params.rho(spec.roles.transient, t) = config.rho_t_const;
  }
  params.phi = {config.phi_transient, config.phi_resident};
  params.mu = {config.mu};
  params.tau.assign(T, 0.0);
  double mean = 0.0;
  for (int t = 0; t < T; ++t) {
    params.tau[t] = rng.normal(0.0, config.tau_sd);
    mean += params.tau[t];
  }
  mean /= T;
  for (int t = 0; t < T; ++t) params.tau[t] -= mean;  // recentre to sum zero
  params.delta = config.delta;
  params.weights = config.weights;
  if (static_cast<int>(params.weights.size()) != 3) {
    throw ValidationError("scenario weights must have 3 entries");
  }
  return params;
}

SimResult simulate_population(const ModelSpec& spec, const GroupParams& params,
                              const TimeGrid& grid, int n_available, uint64_t seed) {
  if (n_available < 1) throw ValidationError("need at least one available individual");
  const int T = grid.n_occasions();
  Rng rng(mix_seed(seed, 0x51u));
  const GroupCache cache = build_group_cache(spec, params, grid);

  SimTruth truth;
  truth.spec = spec;
  truth.params = params;
  truth.grid = grid;
  truth.group.resize(n_available);
  truth.latent.z = Grid2<uint8_t>(n_available, T, 0);
  truth.latent.r = Grid2<uint8_t>(n_available, T, 1);
  truth.latent.v = Grid2<uint8_t>(n_available, T, 0);
  truth.latent.c.resize(n_available);
  truth.n_t.assign(T, 0);

  Grid2<uint8_t> y(n_available, T, 0);
  for (int i = 0; i < n_available; ++i) {
    const int g = rng.categorical(params.weights);
    truth.group[i] = g;
    truth.latent.c[i] = g;
    const bool part_time = spec.rpt && g == spec.roles.part_time;
    bool ever = false;
    uint8_t prev_z = 0;
    bool recruitable = true;
    for (int t = 0; t < T; ++t) {
      uint8_t z;
      if (t > 0 && prev_z) {
        z = rng.bernoulli(cache.phi_pow(g, t)) ? 1 : 0;
      } else if (recruitable) {
        z = rng.bernoulli(params.rho(g, t)) ? 1 : 0;
      } else {
        z = 0;
      }
      truth.latent.z(i, t) = z;
      if (z) {
        ever = true;
        ++truth.n_t[t];
        // present unless a part-timer wanders off; capture only while present
        const uint8_t present = (!part_time || rng.bernoulli(1.0 - params.delta)) ? 1 : 0;
        truth.latent.v(i, t) = present;
        if (present) {
          const double p_raw =
              spec.p == Effect::TimeByGroup
                  ? params.p_gt(g, t)
                  : expit(params.mu[spec.p == Effect::TimePlusGroup ? g : 0] + params.tau[t]);
          y(i, t) = rng.bernoulli(p_raw) ? 1 : 0;
        }
      }
      if (z) recruitable = false;
      prev_z = z;
    }
    if (ever) ++truth.n_super;
  }
  rebuild_recruitable(truth.latent);

  for (int i = 0; i < n_available; ++i) {
    for (int t = 0; t < T; ++t) {
      if (y(i, t)) {
        truth.kept.push_back(i);
        break;
      }
    }
  }
  if (truth.kept.empty()) throw ValidationError("simulation produced no detections");

  Grid2<uint8_t> observed(static_cast<int>(truth.kept.size()), T, 0);
  std::vector<std::string> ids;
  ids.reserve(truth.kept.size());
  for (size_t k = 0; k < truth.kept.size(); ++k) {
    for (int t = 0; t < T; ++t) observed(static_cast<int>(k), t) = y(truth.kept[k], t);
    ids.push_back("sim" + std::to_string(truth.kept[k] + 1));
  }

  SimResult result;
  result.data = make_capture_data(std::move(observed), std::move(ids));
  result.truth = std::move(truth);
  return result;
}

SimResult simulate_scenario(const ScenarioConfig& config) {
  const TimeGrid grid =
      build_time_grid(scenario_day_offsets(config.n_occasions), TimeUnit::Month);
  Rng tau_rng(mix_seed(config.seed, 0x7au));
  const GroupParams params = scenario_params(config, grid, tau_rng);
  return simulate_population(ModelSpec::rpt_model(), params, grid, config.n_available,
                             config.seed);
}

double scenario_expected_nsuper(const ScenarioConfig& config) {
  const TimeGrid grid =
      build_time_grid(scenario_day_offsets(config.n_occasions), TimeUnit::Month);
  Rng rng(1);  // tau does not enter the inclusion probabilities
  const GroupParams params = scenario_params(config, grid, rng);
  std::vector<double> psi(3);
  for (int g = 0; g < 3; ++g) {
    psi[g] = inclusion_prob(std::span<const double>(params.rho.row(g), grid.n_occasions()));
  }
  return expected_nsuper(config.n_available, params.weights, psi);
}

}  // namespace jsmix
