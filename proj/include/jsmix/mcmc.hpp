#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "jsmix/capture_data.hpp"
#include "jsmix/distributions.hpp"
#include "jsmix/likelihood.hpp"
#include "jsmix/model_spec.hpp"
#include "jsmix/params.hpp"
#include "jsmix/rng.hpp"
#include "jsmix/time_grid.hpp"

namespace jsmix {

struct McmcConfig {
  int n_chains = 2;
  int n_iters = 20000;
  int burn_in = 5000;
  int thin = 1;
  uint64_t seed = 1;
  bool store_loglik = true;   // per-row pointwise log-likelihood per retained draw
  bool adapt = true;          // Robbins-Monro step tuning during burn-in only
  double target_accept = 0.35;
  double init_step = 0.5;     // logit-scale random-walk sd before adaptation
  // optional reporting year per occasion (length T); enables yearly count series
  std::vector<int> occasion_year;
};

// Robbins-Monro tuner for one random-walk block; frozen after burn-in so the
// stationary law is untouched.
struct AdaptiveStep {
  double log_step = 0.0;
  double target = 0.35;
  int n_obs = 0;
  bool frozen = false;

  double step() const { return std::exp(log_step); }
  void observe(double accept_prob);
};

struct ChainState {
  GroupParams params;
  LatentState latent;
  int iteration = 0;
};

// Retained draws: scalar series in a dense matrix plus optional pointwise
// log-likelihoods and label counts for the observed rows.
struct DrawStore {
  std::vector<std::string> names;   // scalar series, fixed order
  std::vector<int> chain;           // 1-based chain id per draw
  std::vector<int> iter;            // 1-based sweep index within the chain
  Grid2<double> values;             // n_draws x names.size()
  Grid2<double> loglik;             // n_draws x M, 0x0 when disabled
  Grid2<double> label_counts;       // D x G accumulated label hits, 0x0 if G=1

  int n_draws() const { return static_cast<int>(chain.size()); }
  int n_series() const { return static_cast<int>(names.size()); }
  int series_index(const std::string& name) const;  // -1 when absent
  std::vector<double> series(const std::string& name) const;
  std::vector<int> chain_ids() const;  // distinct, ascending
  std::vector<std::vector<double>> series_by_chain(const std::string& name) const;

  // deterministic merge ordered by chain id
  static DrawStore merge(std::vector<DrawStore> parts);
};

// membership probabilities (D x G) from accumulated label counts
Grid2<double> membership_matrix(const DrawStore& draws);

// ---- free pieces used by the sampler and exercised directly in tests -------

// Exact trajectory draw over {not-entered, alive, departed} given a history.
std::vector<uint8_t> ffbs_states(std::span<const uint8_t> history, const GroupCache& cache,
                                 int g, Rng& rng);
// z = [state == alive]; r via the recruitability recurrence.
void decode_states(std::span<const uint8_t> states, uint8_t* z_row, uint8_t* r_row);

// log w_g + forward log-likelihood per group
std::vector<double> label_log_weights(std::span<const uint8_t> history, const GroupCache& cache,
                                      std::span<const double> weights);
int sample_label(std::span<const double> log_weights, Rng& rng);

// Beta posterior shapes for one (g,t) recruitment cell.
std::pair<double, double> recruitment_posterior(double prior_alpha, double prior_beta,
                                                int n_recruit, int n_at_risk);

// Sufficient statistics for the conditional updates.
struct SurvivalTallies {
  Grid2<int> n_survive;  // G x T, column t = transitions into occasion t (t >= 2)
  Grid2<int> n_depart;
};
struct CaptureTallies {
  Grid2<int> n_capture;  // G x T over exposed cells (z, presence-thinned for part-time)
  Grid2<int> n_miss;
};
struct RecruitTallies {
  Grid2<int> n_at_risk;  // G x T: recruitable cells
  Grid2<int> n_recruit;  // entries at t among those
};

SurvivalTallies survival_tallies(const LatentState& latent, int n_groups);
CaptureTallies capture_tallies(const LatentState& latent, const CaptureData& data,
                               const ModelSpec& spec, int n_groups);
RecruitTallies recruit_tallies(const LatentState& latent, int n_groups);

// ---- the Metropolis-within-Gibbs engine -------------------------------------

class GibbsSampler {
 public:
  GibbsSampler(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
               const PriorConfig& priors, const McmcConfig& config);

  void init(Rng& rng);

  // one full sweep: collapsed delta -> labels+trajectories -> presence/delta ->
  // weights -> recruitment -> survival -> capture
  void sweep(Rng& rng);

  // individual blocks, public so tests can drive them in isolation
  void update_delta_collapsed(Rng& rng);
  void update_labels_and_trajectories(Rng& rng);
  void update_presence_and_delta(Rng& rng);
  void update_weights(Rng& rng);
  void update_recruitment(Rng& rng);
  void update_survival(Rng& rng);
  void update_capture(Rng& rng);

  void freeze_adaptation();
  void check_invariants() const;  // throws InvariantError with context

  const ChainState& state() const { return state_; }
  ChainState& state() { return state_; }
  const GroupCache& cache() const { return cache_; }
  const ModelSpec& spec() const { return spec_; }

  // test hook: install parameters and refresh derived caches
  void set_params(const GroupParams& params);
  void rebuild_cache();

  std::vector<double> row_logliks() const;    // per augmented row, labels marginalised
  double total_loglik() const;

 private:
  double survival_log_target(int component, double phi, const SurvivalTallies& tallies) const;
  double survival_cell_log_target(int g, int t, double phi, const SurvivalTallies& tallies) const;
  double capture_log_target_mu(int idx, double mu_value, const CaptureTallies& tallies) const;
  double capture_log_target_tau(int t_free, double tau_value, const CaptureTallies& tallies) const;
  double capture_cell_log_target(int g, int t, double p, const CaptureTallies& tallies) const;

  const CaptureData& data_;
  ModelSpec spec_;
  TimeGrid grid_;
  PriorConfig priors_;
  McmcConfig config_;
  ChainState state_;
  GroupCache cache_;
  std::vector<AdaptiveStep> survival_steps_;  // per component, or per (g,t) cell flattened
  std::vector<AdaptiveStep> mu_steps_;        // per intercept
  std::vector<AdaptiveStep> tau_steps_;       // per free coordinate (T-1)
  std::vector<AdaptiveStep> p_steps_;         // per (g,t) cell when capture is t-by-group
  AdaptiveStep delta_step_;                   // collapsed part-time availability move
};

// One chain end to end; chain_index is 1-based and decides the seed stream.
DrawStore run_chain(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
                    const PriorConfig& priors, const McmcConfig& config, int chain_index);

// All chains sequentially, merged deterministically.
DrawStore run_fit(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
                  const PriorConfig& priors, const McmcConfig& config);

// Default survival prior chain for a model (ordered pair for RPT, single
// uniform or concatenated-uniform chain otherwise).
OrderedChainSpec default_survival_chain(const ModelSpec& spec);

}  // namespace jsmix
