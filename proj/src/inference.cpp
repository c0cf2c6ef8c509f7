#include "jsmix/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace jsmix {

Waic compute_waic(const Grid2<double>& loglik) {
  const int n_draws = loglik.rows();
  const int n_units = loglik.cols();
  if (n_draws < 2) throw ValidationError("WAIC needs at least 2 draws");
  Waic out;
  for (int i = 0; i < n_units; ++i) {
    double max_ll = kLogZero;
    for (int s = 0; s < n_draws; ++s) max_ll = std::max(max_ll, loglik(s, i));
    double sum_exp = 0.0;
    double mean = 0.0;
    for (int s = 0; s < n_draws; ++s) {
      sum_exp += std::exp(loglik(s, i) - max_ll);
      mean += loglik(s, i);
    }
    mean /= n_draws;
    double var = 0.0;
    for (int s = 0; s < n_draws; ++s) {
      const double d = loglik(s, i) - mean;
      var += d * d;
    }
    var /= n_draws - 1;
    out.lppd += max_ll + std::log(sum_exp / n_draws);
    out.p_waic += var;
  }
  out.waic = -2.0 * (out.lppd - out.p_waic);
  return out;
}

double rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw ValidationError("no chains given");
  // split each chain in half (dropping a middle element when odd)
  std::vector<std::vector<double>> halves;
  size_t min_len = std::numeric_limits<size_t>::max();
  for (const auto& c : chains) min_len = std::min(min_len, c.size() / 2);
  if (min_len < 2) throw ValidationError("chains too short for a split diagnostic");
  for (const auto& c : chains) {
    halves.emplace_back(c.begin(), c.begin() + min_len);
    halves.emplace_back(c.end() - min_len, c.end());
  }
  const double n = static_cast<double>(min_len);
  const double m = static_cast<double>(halves.size());
  std::vector<double> means(halves.size());
  std::vector<double> vars(halves.size());
  for (size_t j = 0; j < halves.size(); ++j) {
    double mu = 0.0;
    for (double v : halves[j]) mu += v;
    mu /= n;
    double s2 = 0.0;
    for (double v : halves[j]) s2 += (v - mu) * (v - mu);
    s2 /= n - 1.0;
    means[j] = mu;
    vars[j] = s2;
  }
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  double w = 0.0;
  for (double s2 : vars) w += s2;
  w /= m;
  if (w <= 0.0) {
    // constant chains: 1 by convention; diverging constant chains cannot mix
    return b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  const double var_hat = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_hat / w);
}

namespace {

// Silverman plug-in bandwidth; zero when the sample carries no spread
double kde_bandwidth(std::span<const double> sample) {
  const size_t n = sample.size();
  double mean = 0.0;
  for (double v : sample) mean += v;
  mean /= n;
  double sd = 0.0;
  for (double v : sample) sd += (v - mean) * (v - mean);
  sd = n > 1 ? std::sqrt(sd / (n - 1)) : 0.0;
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

}  // namespace

double overlap_index(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("overlap needs non-empty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  if (pooled.front() == pooled.back()) return 1.0;  // every value identical in both samples

  // each density gets its own bandwidth: a pooled one would oversmooth the
  // tighter sample whenever the two sit on different scales
  double bw_a = kde_bandwidth(a);
  double bw_b = kde_bandwidth(b);
  if (!(bw_a > 0.0) && !(bw_b > 0.0)) return 0.0;  // two spikes at distinct points
  if (!(bw_a > 0.0)) bw_a = bw_b;
  if (!(bw_b > 0.0)) bw_b = bw_a;

  constexpr int kGridSize = 2048;
  const double pad = 3.0 * std::max(bw_a, bw_b);
  const double lo = pooled.front() - pad;
  const double hi = pooled.back() + pad;
  const double dx = (hi - lo) / (kGridSize - 1);
  auto kde = [](std::span<const double> sample, double x, double bw) {
    double acc = 0.0;
    for (double v : sample) {
      const double u = (x - v) / bw;
      acc += std::exp(-0.5 * u * u);
    }
    return acc / (bw * std::sqrt(2.0 * 3.14159265358979323846) * sample.size());
  };
  double ov = 0.0;
  for (int k = 0; k < kGridSize; ++k) {
    const double x = lo + k * dx;
    ov += std::min(kde(a, x, bw_a), kde(b, x, bw_b)) * dx;
  }
  return std::min(ov, 1.0);
}

namespace {

// rank-sum AUC of class `pos` against class `neg` using the given score
// column, midranks for ties
double pairwise_auc(const Grid2<double>& membership, std::span<const int> labels, int pos,
                    int neg, int score_col) {
  std::vector<std::pair<double, int>> scored;  // (score, is_pos)
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == pos || labels[i] == neg) {
      scored.emplace_back(membership(static_cast<int>(i), score_col), labels[i] == pos ? 1 : 0);
    }
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  const size_t n = scored.size();
  double rank_sum_pos = 0.0;
  size_t n_pos = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scored[j].first == scored[i].first) ++j;
    const double midrank = 0.5 * (i + 1 + j);  // average of ranks i+1..j
    for (size_t k = i; k < j; ++k) {
      if (scored[k].second) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const size_t n_neg = n - n_pos;
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (static_cast<double>(n_pos) * n_neg);
}

}  // namespace

double mauc(const Grid2<double>& membership, std::span<const int> labels) {
  const int G = membership.cols();
  if (static_cast<int>(labels.size()) != membership.rows()) {
    throw ValidationError("label count does not match the membership rows");
  }
  std::vector<int> class_count(G, 0);
  for (int lab : labels) {
    if (lab < 0 || lab >= G) throw ValidationError("label outside 0..G-1");
    ++class_count[lab];
  }
  double total = 0.0;
  int n_pairs = 0;
  for (int i = 0; i < G; ++i) {
    for (int j = i + 1; j < G; ++j) {
      if (class_count[i] == 0 || class_count[j] == 0) continue;  // pair skipped
      const double a_ij = pairwise_auc(membership, labels, i, j, i);
      const double a_ji = pairwise_auc(membership, labels, j, i, j);
      total += 0.5 * (a_ij + a_ji);
      ++n_pairs;
    }
  }
  if (n_pairs == 0) throw ValidationError("no class pair present in the truth labels");
  return total / n_pairs;
}

std::vector<int> map_classify(const Grid2<double>& membership) {
  std::vector<int> labels(membership.rows());
  for (int i = 0; i < membership.rows(); ++i) {
    int best = 0;
    for (int g = 1; g < membership.cols(); ++g) {
      if (membership(i, g) > membership(i, best)) best = g;  // ties keep the lowest index
    }
    labels[i] = best;
  }
  return labels;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ValidationError("quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * q;
  const size_t k = static_cast<size_t>(h);
  if (k + 1 >= values.size()) return values.back();
  return values[k] + (h - k) * (values[k + 1] - values[k]);
}

FitSummary summarize_fit(const DrawStore& draws, int n_observed, int n_rows) {
  if (draws.n_draws() == 0) throw ValidationError("no draws to summarise");
  FitSummary summary;
  summary.n_observed = n_observed;
  summary.n_rows = n_rows;
  const std::vector<int> ids = draws.chain_ids();
  for (int j = 0; j < draws.n_series(); ++j) {
    ParamSummary ps;
    ps.name = draws.names[j];
    std::vector<double> all(draws.n_draws());
    for (int i = 0; i < draws.n_draws(); ++i) all[i] = draws.values(i, j);
    double mean = 0.0;
    for (double v : all) mean += v;
    ps.mean = mean / all.size();
    ps.median = quantile(all, 0.5);
    ps.lower = quantile(all, 0.025);
    ps.upper = quantile(all, 0.975);
    std::vector<std::vector<double>> per_chain(ids.size());
    for (int i = 0; i < draws.n_draws(); ++i) {
      const size_t k = std::find(ids.begin(), ids.end(), draws.chain[i]) - ids.begin();
      per_chain[k].push_back(draws.values(i, j));
    }
    ps.rhat = rhat(per_chain);
    summary.params.push_back(std::move(ps));
  }
  if (!draws.loglik.empty()) summary.waic = compute_waic(draws.loglik);
  summary.membership = membership_matrix(draws);
  return summary;
}

std::vector<ParamSummary> abundance_summary(const DrawStore& draws,
                                            const std::vector<int>& occasion_year) {
  if (occasion_year.empty()) throw ValidationError("empty occasion-to-year map");
  std::vector<int> years;
  for (int y : occasion_year) {
    if (std::find(years.begin(), years.end(), y) == years.end()) years.push_back(y);
  }
  bool any = false;
  for (const std::string& name : draws.names) {
    if (name.rfind("ycount[", 0) == 0) {
      any = true;
      break;
    }
  }
  if (!any) {
    throw ValidationError("stored draws carry no yearly counts; rerun the fit with a calendar");
  }
  std::vector<ParamSummary> out;
  for (int y : years) {
    const std::string prefix = "ycount[" + std::to_string(y) + "][";
    for (int j = 0; j < draws.n_series(); ++j) {
      if (draws.names[j].rfind(prefix, 0) != 0) continue;
      ParamSummary ps;
      ps.name = draws.names[j];
      std::vector<double> all(draws.n_draws());
      for (int i = 0; i < draws.n_draws(); ++i) all[i] = draws.values(i, j);
      double mean = 0.0;
      for (double v : all) mean += v;
      ps.mean = mean / all.size();
      ps.median = quantile(all, 0.5);
      ps.lower = quantile(all, 0.025);
      ps.upper = quantile(all, 0.975);
      out.push_back(std::move(ps));
    }
    if (out.empty() || out.back().name.rfind(prefix, 0) != 0) {
      throw ValidationError("year " + std::to_string(y) + " missing from the stored draws");
    }
  }
  return out;
}

MetricsTable experiment_metrics(const std::vector<ReplicaResult>& replicas) {
  if (replicas.empty()) throw ValidationError("no replica results");
  // best-WAIC flags within each (scenario, replica)
  std::map<std::pair<int, int>, double> best_waic;
  for (const auto& r : replicas) {
    const auto key = std::make_pair(r.scenario, r.replica);
    auto it = best_waic.find(key);
    if (it == best_waic.end() || r.waic < it->second) best_waic[key] = r.waic;
  }
  std::map<std::pair<int, std::string>, std::vector<const ReplicaResult*>> groups;
  for (const auto& r : replicas) groups[{r.scenario, r.model}].push_back(&r);

  MetricsTable table;
  for (const auto& [key, members] : groups) {
    MetricsRow row;
    row.scenario = key.first;
    row.model = key.second;
    row.n_replicas = static_cast<int>(members.size());
    double mae = 0.0;
    double ciw = 0.0;
    int covered = 0;
    int best = 0;
    std::vector<double> waics;
    std::vector<double> ovs;
    std::vector<double> maucs;
    std::vector<double> accs;
    for (const auto* r : members) {
      mae += std::fabs(r->nsuper_median - r->truth_nsuper) / r->expected_nsuper;
      ciw += (r->nsuper_upper - r->nsuper_lower) / r->expected_nsuper;
      if (r->nsuper_lower <= r->truth_nsuper && r->truth_nsuper <= r->nsuper_upper) ++covered;
      waics.push_back(r->waic);
      if (r->waic <= best_waic.at({r->scenario, r->replica})) ++best;
      if (r->ov_phi >= 0.0) ovs.push_back(r->ov_phi);
      if (r->mauc >= 0.0) maucs.push_back(r->mauc);
      if (r->map_accuracy >= 0.0) accs.push_back(r->map_accuracy);
    }
    row.mae_rel = mae / members.size();
    row.ciw_rel = ciw / members.size();
    row.coverage = static_cast<double>(covered) / members.size();
    row.median_waic = quantile(waics, 0.5);
    row.best_waic_share = static_cast<double>(best) / members.size();
    if (!ovs.empty()) row.median_ov = quantile(ovs, 0.5);
    if (!maucs.empty()) row.median_mauc = quantile(maucs, 0.5);
    if (!accs.empty()) row.median_map_accuracy = quantile(accs, 0.5);
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace jsmix
