#include "jsmix/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jsmix {

void AdaptiveStep::observe(double accept_prob) {
  if (frozen) return;
  ++n_obs;
  const double gain = 1.0 / std::pow(n_obs + 1.0, 0.6);
  log_step += gain * (accept_prob - target);
  log_step = std::clamp(log_step, std::log(1e-3), std::log(50.0));
}

int DrawStore::series_index(const std::string& name) const {
  for (size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

std::vector<double> DrawStore::series(const std::string& name) const {
  const int j = series_index(name);
  if (j < 0) throw ValidationError("no stored series named '" + name + "'");
  std::vector<double> out(n_draws());
  for (int i = 0; i < n_draws(); ++i) out[i] = values(i, j);
  return out;
}

std::vector<int> DrawStore::chain_ids() const {
  std::vector<int> ids;
  for (int c : chain) {
    if (std::find(ids.begin(), ids.end(), c) == ids.end()) ids.push_back(c);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::vector<double>> DrawStore::series_by_chain(const std::string& name) const {
  const int j = series_index(name);
  if (j < 0) throw ValidationError("no stored series named '" + name + "'");
  const std::vector<int> ids = chain_ids();
  std::vector<std::vector<double>> out(ids.size());
  for (int i = 0; i < n_draws(); ++i) {
    const size_t k = std::find(ids.begin(), ids.end(), chain[i]) - ids.begin();
    out[k].push_back(values(i, j));
  }
  return out;
}

DrawStore DrawStore::merge(std::vector<DrawStore> parts) {
  if (parts.empty()) throw ValidationError("nothing to merge");
  std::sort(parts.begin(), parts.end(), [](const DrawStore& a, const DrawStore& b) {
    const int ca = a.chain.empty() ? 0 : a.chain.front();
    const int cb = b.chain.empty() ? 0 : b.chain.front();
    return ca < cb;
  });
  DrawStore out = parts.front();
  for (size_t k = 1; k < parts.size(); ++k) {
    DrawStore& part = parts[k];
    if (part.names != out.names) throw InvariantError("merging draws with different series");
    out.chain.insert(out.chain.end(), part.chain.begin(), part.chain.end());
    out.iter.insert(out.iter.end(), part.iter.begin(), part.iter.end());
    out.values.data().insert(out.values.data().end(), part.values.data().begin(),
                             part.values.data().end());
    if (!out.loglik.empty() != !part.loglik.empty()) {
      throw InvariantError("merging draws with mismatched log-likelihood storage");
    }
    if (!part.loglik.empty()) {
      out.loglik.data().insert(out.loglik.data().end(), part.loglik.data().begin(),
                               part.loglik.data().end());
    }
    if (!part.label_counts.empty()) {
      for (size_t idx = 0; idx < part.label_counts.data().size(); ++idx) {
        out.label_counts.data()[idx] += part.label_counts.data()[idx];
      }
    }
  }
  // re-shape the concatenated buffers
  const int cols = static_cast<int>(out.names.size());
  const int rows = static_cast<int>(out.chain.size());
  Grid2<double> values(rows, cols);
  values.data() = std::move(out.values.data());
  out.values = std::move(values);
  if (!out.loglik.empty()) {
    const int m = static_cast<int>(out.loglik.data().size()) / rows;
    Grid2<double> ll(rows, m);
    ll.data() = std::move(out.loglik.data());
    out.loglik = std::move(ll);
  }
  return out;
}

Grid2<double> membership_matrix(const DrawStore& draws) {
  if (draws.label_counts.empty()) return {};
  Grid2<double> out(draws.label_counts.rows(), draws.label_counts.cols(), 0.0);
  for (int i = 0; i < out.rows(); ++i) {
    double total = 0.0;
    for (int g = 0; g < out.cols(); ++g) total += draws.label_counts(i, g);
    if (total <= 0.0) throw InvariantError("membership row with no recorded labels");
    for (int g = 0; g < out.cols(); ++g) out(i, g) = draws.label_counts(i, g) / total;
  }
  return out;
}

// ---- free sampler pieces -----------------------------------------------------

std::vector<uint8_t> ffbs_states(std::span<const uint8_t> history, const GroupCache& cache,
                                 int g, Rng& rng) {
  const int T = static_cast<int>(history.size());
  std::vector<double> alpha(static_cast<size_t>(T) * 3);
  double prev[3] = {1.0, 0.0, 0.0};
  for (int t = 0; t < T; ++t) {
    const double rho = (*cache.rho)(g, t);
    const double phi = cache.phi_pow(g, t);
    double cur[3];
    if (t == 0) {
      cur[kNotEntered] = prev[kNotEntered] * (1.0 - rho);
      cur[kAlive] = prev[kNotEntered] * rho;
      cur[kDeparted] = 0.0;
    } else {
      cur[kNotEntered] = prev[kNotEntered] * (1.0 - rho);
      cur[kAlive] = prev[kNotEntered] * rho + prev[kAlive] * phi;
      cur[kDeparted] = prev[kAlive] * (1.0 - phi) + prev[kDeparted];
    }
    const double p = cache.p(g, t);
    if (history[t]) {
      cur[kNotEntered] = 0.0;
      cur[kAlive] *= p;
      cur[kDeparted] = 0.0;
    } else {
      cur[kAlive] *= 1.0 - p;
    }
    const double mass = cur[0] + cur[1] + cur[2];
    if (!(mass > 0.0)) throw InvariantError("zero-probability history in trajectory draw");
    for (int s = 0; s < 3; ++s) {
      prev[s] = cur[s] / mass;
      alpha[static_cast<size_t>(t) * 3 + s] = prev[s];
    }
  }
  std::vector<uint8_t> states(T);
  {
    const double* last = &alpha[static_cast<size_t>(T - 1) * 3];
    states[T - 1] = static_cast<uint8_t>(rng.categorical(std::span<const double>(last, 3)));
  }
  for (int t = T - 2; t >= 0; --t) {
    const int s_next = states[t + 1];
    const double rho = (*cache.rho)(g, t + 1);
    const double phi = cache.phi_pow(g, t + 1);
    const auto trans = transition_matrix(rho, phi);
    double w[3];
    for (int s = 0; s < 3; ++s) {
      w[s] = alpha[static_cast<size_t>(t) * 3 + s] * trans[s][s_next];
    }
    states[t] = static_cast<uint8_t>(rng.categorical(std::span<const double>(w, 3)));
  }
  return states;
}

void decode_states(std::span<const uint8_t> states, uint8_t* z_row, uint8_t* r_row) {
  const int T = static_cast<int>(states.size());
  for (int t = 0; t < T; ++t) z_row[t] = states[t] == kAlive ? 1 : 0;
  r_row[0] = 1;
  for (int t = 1; t < T; ++t) r_row[t] = std::min<uint8_t>(r_row[t - 1], 1 - z_row[t - 1]);
}

std::vector<double> label_log_weights(std::span<const uint8_t> history, const GroupCache& cache,
                                      std::span<const double> weights) {
  const int G = cache.n_groups();
  std::vector<double> out(G, kLogZero);
  for (int g = 0; g < G; ++g) {
    if (weights[g] <= 0.0) continue;
    const double ll = forward_loglik(history, cache, g);
    if (!is_log_zero(ll)) out[g] = std::log(weights[g]) + ll;
  }
  return out;
}

int sample_label(std::span<const double> log_weights, Rng& rng) {
  const int G = static_cast<int>(log_weights.size());
  double m = kLogZero;
  for (double lw : log_weights) m = std::max(m, lw);
  if (is_log_zero(m)) throw InvariantError("history impossible under every mixture component");
  std::vector<double> w(G);
  for (int g = 0; g < G; ++g) {
    w[g] = is_log_zero(log_weights[g]) ? 0.0 : std::exp(log_weights[g] - m);
  }
  return rng.categorical(w);
}

std::pair<double, double> recruitment_posterior(double prior_alpha, double prior_beta,
                                                int n_recruit, int n_at_risk) {
  if (n_recruit < 0 || n_recruit > n_at_risk) {
    throw InvariantError("recruit tally exceeds the at-risk tally");
  }
  return {prior_alpha + n_recruit, prior_beta + (n_at_risk - n_recruit)};
}

SurvivalTallies survival_tallies(const LatentState& latent, int n_groups) {
  const int T = latent.n_occasions();
  SurvivalTallies tallies{Grid2<int>(n_groups, T, 0), Grid2<int>(n_groups, T, 0)};
  for (int i = 0; i < latent.n_rows(); ++i) {
    const int g = latent.c[i];
    for (int t = 1; t < T; ++t) {
      if (!latent.z(i, t - 1)) continue;
      if (latent.z(i, t)) {
        ++tallies.n_survive(g, t);
      } else {
        ++tallies.n_depart(g, t);
      }
    }
  }
  return tallies;
}

CaptureTallies capture_tallies(const LatentState& latent, const CaptureData& data,
                               const ModelSpec& spec, int n_groups) {
  (void)spec;
  const int T = latent.n_occasions();
  CaptureTallies tallies{Grid2<int>(n_groups, T, 0), Grid2<int>(n_groups, T, 0)};
  for (int i = 0; i < latent.n_rows(); ++i) {
    const int g = latent.c[i];
    for (int t = 0; t < T; ++t) {
      if (!latent.z(i, t) || !latent.v(i, t)) continue;  // exposure = alive and present
      if (data.y(i, t)) {
        ++tallies.n_capture(g, t);
      } else {
        ++tallies.n_miss(g, t);
      }
    }
  }
  return tallies;
}

RecruitTallies recruit_tallies(const LatentState& latent, int n_groups) {
  const int T = latent.n_occasions();
  RecruitTallies tallies{Grid2<int>(n_groups, T, 0), Grid2<int>(n_groups, T, 0)};
  for (int i = 0; i < latent.n_rows(); ++i) {
    const int g = latent.c[i];
    for (int t = 0; t < T; ++t) {
      if (!latent.r(i, t)) continue;
      ++tallies.n_at_risk(g, t);
      if (latent.z(i, t)) ++tallies.n_recruit(g, t);
    }
  }
  return tallies;
}

// ---- sampler -----------------------------------------------------------------

namespace {

// one random-walk MH move on the logit scale; returns the (possibly unchanged) value
template <typename Target>
double mh_logit_move(double current, AdaptiveStep& step, Rng& rng, Target&& log_target) {
  const double x = logit(current);
  const double prop = clamp_prob(expit(x + step.step() * rng.normal()));
  const double num = log_target(prop);
  double alpha = 0.0;
  if (!is_log_zero(num)) {
    const double lr = num - log_target(current) + std::log(prop * (1.0 - prop)) -
                      std::log(current * (1.0 - current));
    alpha = lr >= 0.0 ? 1.0 : std::exp(std::max(lr, -745.0));
  }
  const bool accept = rng.uniform() < alpha;
  step.observe(alpha);
  return accept ? prop : current;
}

// unbounded random-walk MH move (logit-scale parameters such as mu, tau)
template <typename Target>
double mh_gauss_move(double current, AdaptiveStep& step, Rng& rng, Target&& log_target) {
  const double prop = current + step.step() * rng.normal();
  const double lr = log_target(prop) - log_target(current);
  const double alpha = lr >= 0.0 ? 1.0 : std::exp(std::max(lr, -745.0));
  const bool accept = rng.uniform() < alpha;
  step.observe(alpha);
  return accept ? prop : current;
}

double log1m_pow(double phi, double lag) {
  // log(1 - phi^lag), stable when phi^lag is close to 1
  return std::log(-std::expm1(lag * std::log(phi)));
}

}  // namespace

OrderedChainSpec default_survival_chain(const ModelSpec& spec) {
  if (spec.rpt) return OrderedChainSpec::beta_tbeta_pair();
  if (spec.phi == Effect::Group) return OrderedChainSpec::uniform_chain(spec.G);
  return OrderedChainSpec::uniform_chain(1);
}

GibbsSampler::GibbsSampler(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
                           const PriorConfig& priors, const McmcConfig& config)
    : data_(data), spec_(spec), grid_(grid), priors_(priors), config_(config) {
  if (data.n_occasions() != grid.n_occasions()) {
    throw ValidationError("capture matrix and time grid disagree on the occasion count");
  }
  if (!config.occasion_year.empty() &&
      static_cast<int>(config.occasion_year.size()) != grid.n_occasions()) {
    throw ValidationError("occasion-to-year map must cover every occasion");
  }
  if (priors_.survival_chain.links.empty()) {
    priors_.survival_chain = default_survival_chain(spec_);
  }
  const int T = grid.n_occasions();
  const double init_log = std::log(config.init_step);
  auto make_steps = [&](int n) {
    std::vector<AdaptiveStep> steps(n);
    for (auto& s : steps) {
      s.log_step = init_log;
      s.target = config.target_accept;
      s.frozen = !config.adapt;
    }
    return steps;
  };
  if (spec_.phi == Effect::TimeByGroup) {
    survival_steps_ = make_steps(spec_.G * T);
  } else {
    survival_steps_ = make_steps(spec_.n_phi_components());
  }
  if (spec_.p == Effect::TimeByGroup) {
    p_steps_ = make_steps(spec_.G * T);
  } else {
    mu_steps_ = make_steps(spec_.n_mu());
    tau_steps_ = make_steps(T - 1);
  }
  delta_step_ = make_steps(1)[0];
}

void GibbsSampler::init(Rng& rng) {
  const int T = grid_.n_occasions();
  const int G = spec_.G;
  const int M = data_.n_rows();
  GroupParams& params = state_.params;

  params.rho = Grid2<double>(G, T);
  for (int g = 0; g < G; ++g) {
    for (int t = 0; t < T; ++t) {
      const auto [a, b] = entry_prior_params(t + 1, T);
      params.rho(g, t) = clamp_prob(rng.beta(a, b));
    }
  }

  if (spec_.phi == Effect::TimeByGroup) {
    params.phi.clear();
    params.phi_gt = Grid2<double>(G, T, 0.5);
    for (int g = 0; g < G; ++g) {
      for (int t = 1; t < T; ++t) params.phi_gt(g, t) = clamp_prob(rng.uniform());
    }
  } else {
    // start from a sharpened prior: same shape, same support, but with the
    // extreme draws trimmed away so early sweeps spend burn-in on mixing
    // rather than on dissolving an accidental far-tail configuration
    OrderedChainSpec start_chain = priors_.survival_chain;
    for (BetaSpec& link : start_chain.links) {
      link.alpha *= 4.0;
      link.beta *= 4.0;
    }
    params.phi = ordered_chain_sample(start_chain, rng);
    params.phi_gt = Grid2<double>();
  }

  if (spec_.p == Effect::TimeByGroup) {
    params.mu.clear();
    params.tau.clear();
    params.p_gt = Grid2<double>(G, T, 0.5);
    for (int g = 0; g < G; ++g) {
      for (int t = 0; t < T; ++t) params.p_gt(g, t) = clamp_prob(rng.uniform());
    }
  } else {
    params.mu.assign(spec_.n_mu(), 0.0);
    for (auto& m : params.mu) m = rng.normal(0.0, std::sqrt(priors_.mu_variance));
    params.tau.assign(T, 0.0);
    double sum = 0.0;
    for (int t = 0; t + 1 < T; ++t) {
      params.tau[t] = rng.normal(0.0, std::sqrt(priors_.tau_variance));
      sum += params.tau[t];
    }
    params.tau[T - 1] = -sum;
    params.p_gt = Grid2<double>();
  }

  if (spec_.rpt) {
    params.delta = priors_.has_fixed_delta() ? priors_.delta_fixed
                                             : rng.beta(priors_.delta_a, priors_.delta_b);
  } else {
    params.delta = 0.0;
  }

  std::vector<double> alpha(G, priors_.dirichlet_alpha);
  params.weights = G == 1 ? std::vector<double>{1.0} : rng.dirichlet(alpha);

  LatentState& latent = state_.latent;
  latent.z = Grid2<uint8_t>(M, T, 0);
  latent.r = Grid2<uint8_t>(M, T, 1);
  latent.v = Grid2<uint8_t>(M, T, 0);
  latent.c.assign(M, 0);
  for (int i = 0; i < M; ++i) {
    latent.c[i] = G == 1 ? 0 : rng.categorical(params.weights);
    int first = -1;
    int last = -1;
    for (int t = 0; t < T; ++t) {
      if (data_.y(i, t)) {
        if (first < 0) first = t;
        last = t;
      }
    }
    if (first < 0) {
      // pseudo-row: a coin decides between never-entered and a random stay
      if (rng.bernoulli(0.5)) {
        first = rng.uniform_int(0, T - 1);
        last = rng.uniform_int(first, T - 1);
      }
    }
    if (first >= 0) {
      for (int t = first; t <= last; ++t) latent.z(i, t) = 1;
    }
    for (int t = 0; t < T; ++t) latent.v(i, t) = latent.z(i, t);
  }
  rebuild_recruitable(latent);
  state_.iteration = 0;
  rebuild_cache();
}

void GibbsSampler::rebuild_cache() { cache_ = build_group_cache(spec_, state_.params, grid_); }

void GibbsSampler::set_params(const GroupParams& params) {
  state_.params = params;
  rebuild_cache();
}

void GibbsSampler::freeze_adaptation() {
  for (auto& s : survival_steps_) s.frozen = true;
  for (auto& s : mu_steps_) s.frozen = true;
  for (auto& s : tau_steps_) s.frozen = true;
  for (auto& s : p_steps_) s.frozen = true;
  delta_step_.frozen = true;
}

void GibbsSampler::sweep(Rng& rng) {
  // the collapsed delta move must run right before the blocks it integrates out
  // (labels, trajectories, presence), which redraw from exact conditionals
  update_delta_collapsed(rng);
  update_labels_and_trajectories(rng);
  update_presence_and_delta(rng);
  update_weights(rng);
  update_recruitment(rng);
  update_survival(rng);
  update_capture(rng);
  ++state_.iteration;
  check_invariants();
}

void GibbsSampler::update_delta_collapsed(Rng& rng) {
  if (!spec_.rpt || priors_.has_fixed_delta()) return;
  // random-walk MH on logit(delta) against the observed-data likelihood with
  // labels, trajectories, and presence integrated out; on its own the move
  // changes delta while those blocks stay put, so the sweep reruns them next
  const double current = state_.params.delta;
  const double cur_target = total_loglik() + beta_logpdf(current, priors_.delta_a, priors_.delta_b);
  const double prop =
      clamp_prob(expit(logit(current) + delta_step_.step() * rng.normal()));
  state_.params.delta = prop;
  rebuild_cache();
  const double prop_target = total_loglik() + beta_logpdf(prop, priors_.delta_a, priors_.delta_b);
  const double lr = prop_target - cur_target + std::log(prop * (1.0 - prop)) -
                    std::log(current * (1.0 - current));
  const double alpha = lr >= 0.0 ? 1.0 : std::exp(std::max(lr, -745.0));
  if (!(rng.uniform() < alpha)) {
    state_.params.delta = current;
    rebuild_cache();
  }
  delta_step_.observe(alpha);
}

void GibbsSampler::update_labels_and_trajectories(Rng& rng) {
  const int M = data_.n_rows();
  const int T = grid_.n_occasions();
  LatentState& latent = state_.latent;
  for (int i = 0; i < M; ++i) {
    const std::span<const uint8_t> history(data_.y.row(i), T);
    int g = 0;
    if (spec_.G > 1) {
      const std::vector<double> lw = label_log_weights(history, cache_, state_.params.weights);
      g = sample_label(lw, rng);
    }
    latent.c[i] = g;
    const std::vector<uint8_t> states = ffbs_states(history, cache_, g, rng);
    decode_states(states, latent.z.row(i), latent.r.row(i));
    // full presence by default; the presence block thins part-time rows
    for (int t = 0; t < T; ++t) latent.v(i, t) = latent.z(i, t);
  }
}

void GibbsSampler::update_presence_and_delta(Rng& rng) {
  if (!spec_.rpt) return;
  const int T = grid_.n_occasions();
  LatentState& latent = state_.latent;
  const double delta = state_.params.delta;
  int n_absent = 0;
  int n_present = 0;
  for (int i = 0; i < data_.n_rows(); ++i) {
    if (latent.c[i] != spec_.roles.part_time) continue;
    for (int t = 0; t < T; ++t) {
      if (!latent.z(i, t)) {
        latent.v(i, t) = 0;
        continue;
      }
      uint8_t present;
      if (data_.y(i, t)) {
        present = 1;  // a capture proves presence
      } else {
        const double p = expit(state_.params.mu[0] + state_.params.tau[t]);
        const double w1 = (1.0 - delta) * (1.0 - p);
        present = rng.bernoulli(w1 / (w1 + delta)) ? 1 : 0;
      }
      latent.v(i, t) = present;
      present ? ++n_present : ++n_absent;
    }
  }
  if (!priors_.has_fixed_delta()) {
    state_.params.delta = rng.beta(priors_.delta_a + n_absent, priors_.delta_b + n_present);
    rebuild_cache();  // the effective part-time capture rate moved
  }
}

void GibbsSampler::update_weights(Rng& rng) {
  if (spec_.G == 1) return;
  std::vector<double> alpha(spec_.G, priors_.dirichlet_alpha);
  for (int c : state_.latent.c) alpha[c] += 1.0;
  state_.params.weights = rng.dirichlet(alpha);
}

void GibbsSampler::update_recruitment(Rng& rng) {
  const int T = grid_.n_occasions();
  const RecruitTallies tallies = recruit_tallies(state_.latent, spec_.G);
  for (int g = 0; g < spec_.G; ++g) {
    for (int t = 0; t < T; ++t) {
      const auto [a0, b0] = entry_prior_params(t + 1, T);
      const auto [a, b] =
          recruitment_posterior(a0, b0, tallies.n_recruit(g, t), tallies.n_at_risk(g, t));
      state_.params.rho(g, t) = clamp_prob(rng.beta(a, b));
    }
  }
}

double GibbsSampler::survival_log_target(int component, double phi,
                                         const SurvivalTallies& tallies) const {
  const int T = grid_.n_occasions();
  const double log_phi = std::log(phi);
  double ll = 0.0;
  for (int g = 0; g < spec_.G; ++g) {
    if (spec_.phi_component(g) != component) continue;
    for (int t = 1; t < T; ++t) {
      const int s = tallies.n_survive(g, t);
      const int d = tallies.n_depart(g, t);
      if (s) ll += s * grid_.lags[t] * log_phi;
      if (d) ll += d * log1m_pow(phi, grid_.lags[t]);
    }
  }
  return ll;
}

double GibbsSampler::survival_cell_log_target(int g, int t, double phi,
                                              const SurvivalTallies& tallies) const {
  double ll = 0.0;
  const int s = tallies.n_survive(g, t);
  const int d = tallies.n_depart(g, t);
  if (s) ll += s * grid_.lags[t] * std::log(phi);
  if (d) ll += d * log1m_pow(phi, grid_.lags[t]);
  return ll;
}

void GibbsSampler::update_survival(Rng& rng) {
  const SurvivalTallies tallies = survival_tallies(state_.latent, spec_.G);
  const int T = grid_.n_occasions();
  if (spec_.phi == Effect::TimeByGroup) {
    for (int g = 0; g < spec_.G; ++g) {
      for (int t = 1; t < T; ++t) {
        auto target = [&](double phi) {
          return survival_cell_log_target(g, t, phi, tallies);  // uniform prior
        };
        double& cell = state_.params.phi_gt(g, t);
        cell = mh_logit_move(cell, survival_steps_[g * T + t], rng, target);
      }
    }
  } else {
    std::vector<double>& phi = state_.params.phi;
    for (size_t k = 0; k < phi.size(); ++k) {
      auto target = [&](double value) {
        std::vector<double> candidate = phi;
        candidate[k] = value;
        const double prior = ordered_chain_logpdf(priors_.survival_chain, candidate);
        if (is_log_zero(prior)) return kLogZero;
        return prior + survival_log_target(static_cast<int>(k), value, tallies);
      };
      // alternate a local random walk with a likelihood-shaped independence
      // proposal on the current order window: the walk refines, the jump lets a
      // component cross the interval when its conditional sits far away
      if (rng.bernoulli(0.5)) {
        double s = 0.0;
        double d = 0.0;
        for (int g = 0; g < spec_.G; ++g) {
          if (spec_.phi_component(g) != static_cast<int>(k)) continue;
          for (int t = 1; t < T; ++t) {
            s += tallies.n_survive(g, t) * grid_.lags[t];
            d += tallies.n_depart(g, t);
          }
        }
        const BetaSpec& link = priors_.survival_chain.links[k];
        const double lo = std::max(link.lower, k > 0 ? phi[k - 1] : 0.0);
        const double hi = std::min(link.upper, k + 1 < phi.size() ? phi[k + 1] : 1.0);
        const BetaSpec proposal = BetaSpec::truncated(1.0 + s, 1.0 + d, lo, hi);
        const double cand = tbeta_sample(proposal, rng);
        const double num = target(cand);
        if (!is_log_zero(num)) {
          const double lr = num - target(phi[k]) + tbeta_logpdf(phi[k], proposal) -
                            tbeta_logpdf(cand, proposal);
          if (lr >= 0.0 || rng.uniform() < std::exp(std::max(lr, -745.0))) phi[k] = cand;
        }
      } else {
        phi[k] = mh_logit_move(phi[k], survival_steps_[k], rng, target);
      }
    }
  }
  rebuild_cache();
}

double GibbsSampler::capture_log_target_mu(int idx, double mu_value,
                                           const CaptureTallies& tallies) const {
  const int T = grid_.n_occasions();
  double ll = -mu_value * mu_value / (2.0 * priors_.mu_variance);
  for (int g = 0; g < spec_.G; ++g) {
    if (spec_.p == Effect::TimePlusGroup && g != idx) continue;
    for (int t = 0; t < T; ++t) {
      const int cap = tallies.n_capture(g, t);
      const int miss = tallies.n_miss(g, t);
      if (!cap && !miss) continue;
      const double p = clamp_prob(expit(mu_value + state_.params.tau[t]));
      if (cap) ll += cap * std::log(p);
      if (miss) ll += miss * std::log1p(-p);
    }
  }
  return ll;
}

double GibbsSampler::capture_log_target_tau(int t_free, double tau_value,
                                            const CaptureTallies& tallies) const {
  const int T = grid_.n_occasions();
  // the sum-zero constraint couples the free coordinate with the last one
  double partial = 0.0;
  for (int t = 0; t + 1 < T; ++t) partial += t == t_free ? tau_value : state_.params.tau[t];
  const double tau_last = -partial;
  double ll = -(tau_value * tau_value + tau_last * tau_last) / (2.0 * priors_.tau_variance);
  for (int g = 0; g < spec_.G; ++g) {
    const double mu = state_.params.mu[spec_.p == Effect::TimePlusGroup ? g : 0];
    for (const int t : {t_free, T - 1}) {
      const int cap = tallies.n_capture(g, t);
      const int miss = tallies.n_miss(g, t);
      if (!cap && !miss) continue;
      const double p = clamp_prob(expit(mu + (t == t_free ? tau_value : tau_last)));
      if (cap) ll += cap * std::log(p);
      if (miss) ll += miss * std::log1p(-p);
    }
  }
  return ll;
}

double GibbsSampler::capture_cell_log_target(int g, int t, double p,
                                             const CaptureTallies& tallies) const {
  double ll = 0.0;
  const int cap = tallies.n_capture(g, t);
  const int miss = tallies.n_miss(g, t);
  if (cap) ll += cap * std::log(p);
  if (miss) ll += miss * std::log1p(-p);
  return ll;
}

void GibbsSampler::update_capture(Rng& rng) {
  const CaptureTallies tallies = capture_tallies(state_.latent, data_, spec_, spec_.G);
  const int T = grid_.n_occasions();
  if (spec_.p == Effect::TimeByGroup) {
    for (int g = 0; g < spec_.G; ++g) {
      for (int t = 0; t < T; ++t) {
        auto target = [&](double p) { return capture_cell_log_target(g, t, p, tallies); };
        double& cell = state_.params.p_gt(g, t);
        cell = mh_logit_move(cell, p_steps_[g * T + t], rng, target);
      }
    }
  } else {
    for (size_t m = 0; m < state_.params.mu.size(); ++m) {
      auto target = [&](double value) {
        return capture_log_target_mu(static_cast<int>(m), value, tallies);
      };
      state_.params.mu[m] = mh_gauss_move(state_.params.mu[m], mu_steps_[m], rng, target);
    }
    for (int j = 0; j + 1 < T; ++j) {
      auto target = [&](double value) { return capture_log_target_tau(j, value, tallies); };
      const double updated = mh_gauss_move(state_.params.tau[j], tau_steps_[j], rng, target);
      if (updated != state_.params.tau[j]) {
        state_.params.tau[j] = updated;
        double partial = 0.0;
        for (int t = 0; t + 1 < T; ++t) partial += state_.params.tau[t];
        state_.params.tau[T - 1] = -partial;
      }
    }
  }
  rebuild_cache();
}

void GibbsSampler::check_invariants() const {
  const LatentState& latent = state_.latent;
  if (!latent_invariants_hold(latent)) {
    throw InvariantError("latent state violates the recruitability/no-re-entry recurrence at "
                         "iteration " +
                         std::to_string(state_.iteration));
  }
  for (int i = 0; i < data_.n_rows(); ++i) {
    if (latent.c[i] < 0 || latent.c[i] >= spec_.G) {
      throw InvariantError("label out of range at row " + std::to_string(i + 1));
    }
    for (int t = 0; t < grid_.n_occasions(); ++t) {
      if (data_.y(i, t) && (!latent.z(i, t) || !latent.v(i, t))) {
        throw InvariantError("capture without presence at row " + std::to_string(i + 1) +
                             ", occasion " + std::to_string(t + 1));
      }
    }
  }
  const GroupParams& params = state_.params;
  double wsum = 0.0;
  for (double w : params.weights) wsum += w;
  if (std::fabs(wsum - 1.0) > 1e-9) throw InvariantError("mixture weights left the simplex");
  if (!params.tau.empty()) {
    double tsum = 0.0;
    for (double t : params.tau) tsum += t;
    if (std::fabs(tsum) > 1e-9) throw InvariantError("occasion effects no longer sum to zero");
  }
  for (size_t k = 1; k < params.phi.size(); ++k) {
    if (!(params.phi[k] > params.phi[k - 1])) {
      throw InvariantError("survival components lost their ordering");
    }
  }
}

std::vector<double> GibbsSampler::row_logliks() const {
  const int M = data_.n_rows();
  std::vector<double> out(M);
  for (int i = 0; i < M; ++i) {
    const std::span<const uint8_t> history(data_.y.row(i), grid_.n_occasions());
    out[i] = mixture_loglik(history, state_.params.weights, cache_);
  }
  return out;
}

double GibbsSampler::total_loglik() const {
  double total = 0.0;
  for (double ll : row_logliks()) total += ll;
  return total;
}

// ---- chain drivers -----------------------------------------------------------

namespace {

std::vector<std::string> series_names(const ModelSpec& spec, const TimeGrid& grid,
                                      const McmcConfig& config) {
  const int G = spec.G;
  const int T = grid.n_occasions();
  std::vector<std::string> names;
  auto idx2 = [](const std::string& base, int a, int b) {
    return base + "[" + std::to_string(a) + "][" + std::to_string(b) + "]";
  };
  auto idx1 = [](const std::string& base, int a) {
    return base + "[" + std::to_string(a) + "]";
  };
  if (G > 1) {
    for (int g = 1; g <= G; ++g) names.push_back(idx1("w", g));
  }
  for (int g = 1; g <= G; ++g) {
    for (int t = 1; t <= T; ++t) names.push_back(idx2("rho", g, t));
  }
  if (spec.phi == Effect::TimeByGroup) {
    for (int g = 1; g <= G; ++g) {
      for (int t = 2; t <= T; ++t) names.push_back(idx2("phi", g, t));
    }
  } else {
    for (int k = 1; k <= spec.n_phi_components(); ++k) names.push_back(idx1("phi", k));
  }
  if (spec.p == Effect::TimeByGroup) {
    for (int g = 1; g <= G; ++g) {
      for (int t = 1; t <= T; ++t) names.push_back(idx2("p", g, t));
    }
  } else {
    if (spec.n_mu() == 1) {
      names.push_back("mu");
    } else {
      for (int g = 1; g <= spec.n_mu(); ++g) names.push_back(idx1("mu", g));
    }
    for (int t = 1; t <= T; ++t) names.push_back(idx1("tau", t));
  }
  if (spec.rpt) names.push_back("delta");
  names.push_back("N_super");
  for (int t = 1; t <= T; ++t) names.push_back(idx1("N", t));
  for (int g = 1; g <= G; ++g) names.push_back(idx1("N_group", g));
  for (int g = 1; g <= G; ++g) names.push_back(idx1("psi", g));
  if (G > 1) {
    for (int g = 1; g <= G; ++g) names.push_back(idx1("count", g));
  }
  names.push_back("loglik");
  if (!config.occasion_year.empty()) {
    std::vector<int> years;
    for (int y : config.occasion_year) {
      if (std::find(years.begin(), years.end(), y) == years.end()) years.push_back(y);
    }
    for (int y : years) {
      for (int g = 1; g <= G; ++g) names.push_back(idx2("ycount", y, g));
      names.push_back("ycount[" + std::to_string(y) + "][all]");
    }
  }
  return names;
}

}  // namespace

DrawStore run_chain(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
                    const PriorConfig& priors, const McmcConfig& config, int chain_index) {
  if (config.burn_in >= config.n_iters) {
    throw ValidationError("burn-in must be smaller than the iteration count");
  }
  if (config.thin < 1) throw ValidationError("thinning must be at least 1");
  Rng rng(mix_seed(config.seed, static_cast<uint64_t>(chain_index)));
  GibbsSampler sampler(data, spec, grid, priors, config);
  sampler.init(rng);

  const int T = grid.n_occasions();
  const int G = spec.G;
  const int M = data.n_rows();
  DrawStore store;
  store.names = series_names(spec, grid, config);
  const int n_retained = (config.n_iters - config.burn_in) / config.thin;
  store.chain.reserve(n_retained);
  store.iter.reserve(n_retained);
  store.values = Grid2<double>(n_retained, static_cast<int>(store.names.size()));
  if (config.store_loglik) store.loglik = Grid2<double>(n_retained, M);
  if (G > 1) store.label_counts = Grid2<double>(data.n_observed, G, 0.0);

  int row = 0;
  for (int iter = 1; iter <= config.n_iters; ++iter) {
    sampler.sweep(rng);
    if (iter == config.burn_in) sampler.freeze_adaptation();
    if (iter <= config.burn_in || (iter - config.burn_in) % config.thin != 0) continue;
    if (row >= n_retained) break;

    const GroupParams& params = sampler.state().params;
    const LatentState& latent = sampler.state().latent;
    store.chain.push_back(chain_index);
    store.iter.push_back(iter);
    double* out = store.values.row(row);
    int col = 0;
    if (G > 1) {
      for (int g = 0; g < G; ++g) out[col++] = params.weights[g];
    }
    for (int g = 0; g < G; ++g) {
      for (int t = 0; t < T; ++t) out[col++] = params.rho(g, t);
    }
    if (spec.phi == Effect::TimeByGroup) {
      for (int g = 0; g < G; ++g) {
        for (int t = 1; t < T; ++t) out[col++] = params.phi_gt(g, t);
      }
    } else {
      for (double v : params.phi) out[col++] = v;
    }
    if (spec.p == Effect::TimeByGroup) {
      for (int g = 0; g < G; ++g) {
        for (int t = 0; t < T; ++t) out[col++] = params.p_gt(g, t);
      }
    } else {
      for (double v : params.mu) out[col++] = v;
      for (int t = 0; t < T; ++t) out[col++] = params.tau[t];
    }
    if (spec.rpt) out[col++] = params.delta;

    const AbundanceDraw counts = derived_counts(latent, G);
    out[col++] = counts.n_super;
    for (int t = 0; t < T; ++t) out[col++] = counts.n_t[t];
    for (int g = 0; g < G; ++g) out[col++] = counts.n_group[g];
    for (int g = 0; g < G; ++g) {
      out[col++] = inclusion_prob(std::span<const double>(params.rho.row(g), T));
    }
    if (G > 1) {
      std::vector<int> label_count(G, 0);
      for (int c : latent.c) ++label_count[c];
      for (int g = 0; g < G; ++g) out[col++] = label_count[g];
    }

    const std::vector<double> row_ll = sampler.row_logliks();
    double total_ll = 0.0;
    for (double v : row_ll) total_ll += v;
    out[col++] = total_ll;
    if (config.store_loglik) {
      for (int i = 0; i < M; ++i) store.loglik(row, i) = row_ll[i];
    }

    if (!config.occasion_year.empty()) {
      const Grid2<int> ycounts = yearly_group_counts(latent, config.occasion_year, G);
      for (int y = 0; y < ycounts.rows(); ++y) {
        for (int g = 0; g <= G; ++g) out[col++] = ycounts(y, g);
      }
    }
    if (col != static_cast<int>(store.names.size())) {
      throw InvariantError("draw recording misaligned with the series layout");
    }
    if (G > 1) {
      for (int i = 0; i < data.n_observed; ++i) store.label_counts(i, latent.c[i]) += 1.0;
    }
    ++row;
  }
  return store;
}

DrawStore run_fit(const CaptureData& data, const ModelSpec& spec, const TimeGrid& grid,
                  const PriorConfig& priors, const McmcConfig& config) {
  std::vector<DrawStore> parts;
  parts.reserve(config.n_chains);
  for (int c = 1; c <= config.n_chains; ++c) {
    parts.push_back(run_chain(data, spec, grid, priors, config, c));
  }
  return DrawStore::merge(std::move(parts));
}

}  // namespace jsmix
