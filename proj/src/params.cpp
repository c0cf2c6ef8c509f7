#include "jsmix/params.hpp"

#include <algorithm>

namespace jsmix {

double capture_prob(double mu, double tau_t, double delta, bool part_time) {
  const double base = expit(mu + tau_t);
  return part_time ? (1.0 - delta) * base : base;
}

double capture_prob_of(const ModelSpec& spec, const GroupParams& params, int g, int t) {
  if (spec.p == Effect::TimeByGroup) return params.p_gt(g, t);
  const double mu = params.mu[spec.p == Effect::TimePlusGroup ? g : 0];
  const bool thinned = spec.rpt && g == spec.roles.part_time;
  return capture_prob(mu, params.tau[t], params.delta, thinned);
}

double survival_base_of(const ModelSpec& spec, const GroupParams& params, int g, int t) {
  if (spec.phi == Effect::TimeByGroup) return params.phi_gt(g, t);
  return params.phi[spec.phi_component(g)];
}

void rebuild_recruitable(LatentState& latent) {
  const int m = latent.n_rows();
  const int T = latent.n_occasions();
  if (latent.r.rows() != m || latent.r.cols() != T) latent.r = Grid2<uint8_t>(m, T, 0);
  for (int i = 0; i < m; ++i) {
    latent.r(i, 0) = 1;
    for (int t = 1; t < T; ++t) {
      latent.r(i, t) = std::min<uint8_t>(latent.r(i, t - 1), 1 - latent.z(i, t - 1));
    }
  }
}

bool latent_invariants_hold(const LatentState& latent) {
  const int m = latent.n_rows();
  const int T = latent.n_occasions();
  for (int i = 0; i < m; ++i) {
    if (latent.r(i, 0) != 1) return false;
    bool departed = false;
    for (int t = 0; t < T; ++t) {
      if (t > 0) {
        const uint8_t want = std::min<uint8_t>(latent.r(i, t - 1), 1 - latent.z(i, t - 1));
        if (latent.r(i, t) != want) return false;
        if (!latent.z(i, t - 1) && !latent.r(i, t) && latent.z(i, t)) return false;  // re-entry
      }
      if (departed && latent.z(i, t)) return false;
      if (t > 0 && latent.z(i, t - 1) && !latent.z(i, t)) departed = true;
      if (!latent.z(i, t) && latent.v(i, t)) return false;  // present requires alive
    }
  }
  return true;
}

AbundanceDraw derived_counts(const LatentState& latent, int n_groups) {
  const int m = latent.n_rows();
  const int T = latent.n_occasions();
  AbundanceDraw draw;
  draw.n_t.assign(T, 0);
  draw.n_group.assign(n_groups, 0);
  for (int i = 0; i < m; ++i) {
    bool ever = false;
    for (int t = 0; t < T; ++t) {
      if (latent.z(i, t)) {
        ++draw.n_t[t];
        ever = true;
      }
    }
    if (ever) {
      ++draw.n_super;
      ++draw.n_group[latent.c[i]];
    }
  }
  return draw;
}

Grid2<int> yearly_group_counts(const LatentState& latent, const std::vector<int>& occasion_year,
                               int n_groups) {
  const int m = latent.n_rows();
  const int T = latent.n_occasions();
  if (static_cast<int>(occasion_year.size()) != T) {
    throw ValidationError("occasion-to-year map must cover every occasion");
  }
  // compact the year labels, preserve first-appearance order
  std::vector<int> years;
  std::vector<int> year_of(T);
  for (int t = 0; t < T; ++t) {
    auto it = std::find(years.begin(), years.end(), occasion_year[t]);
    if (it == years.end()) {
      year_of[t] = static_cast<int>(years.size());
      years.push_back(occasion_year[t]);
    } else {
      year_of[t] = static_cast<int>(it - years.begin());
    }
  }
  Grid2<int> counts(static_cast<int>(years.size()), n_groups + 1, 0);
  std::vector<uint8_t> seen(years.size());
  for (int i = 0; i < m; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int t = 0; t < T; ++t) {
      if (latent.z(i, t)) seen[year_of[t]] = 1;
    }
    for (size_t yi = 0; yi < years.size(); ++yi) {
      if (seen[yi]) {
        ++counts(static_cast<int>(yi), latent.c[i]);
        ++counts(static_cast<int>(yi), n_groups);
      }
    }
  }
  return counts;
}

}  // namespace jsmix
