#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "jsmix/inference.hpp"
#include "jsmix/rng.hpp"

#include "testutil.hpp"

using namespace jsmix;

namespace {

// direct pair-counting AUC with half-credit ties, independent of the
// rank-sum formula used by the library
double auc_pairs(const Grid2<double>& membership, const std::vector<int>& labels, int pos,
                 int neg, int col) {
  double wins = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != pos) continue;
    for (size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != neg) continue;
      const double si = membership(static_cast<int>(i), col);
      const double sj = membership(static_cast<int>(j), col);
      wins += si > sj ? 1.0 : si == sj ? 0.5 : 0.0;
      ++pairs;
    }
  }
  return wins / pairs;
}

double mauc_oracle(const Grid2<double>& membership, const std::vector<int>& labels) {
  const int G = membership.cols();
  std::vector<int> count(G, 0);
  for (int lab : labels) ++count[lab];
  double total = 0.0;
  int pairs = 0;
  for (int i = 0; i < G; ++i) {
    for (int j = i + 1; j < G; ++j) {
      if (count[i] == 0 || count[j] == 0) continue;
      total += 0.5 * (auc_pairs(membership, labels, i, j, i) +
                      auc_pairs(membership, labels, j, i, j));
      ++pairs;
    }
  }
  return total / pairs;
}

}  // namespace

TEST_CASE("waic decomposes into lppd and the variance penalty") {
  Grid2<double> ll(2, 2);
  ll(0, 0) = std::log(0.25);
  ll(1, 0) = std::log(0.5);
  ll(0, 1) = std::log(0.4);
  ll(1, 1) = std::log(0.2);
  const Waic w = compute_waic(ll);
  // lppd = log((0.25+0.5)/2) + log((0.4+0.2)/2)
  const double lppd = std::log(0.375) + std::log(0.3);
  // two-point variance with the n-1 denominator is (a-b)^2 / 2 per unit
  const double p = std::pow(std::log(2.0), 2.0) / 2.0 * 2.0;
  CHECK(w.lppd == doctest::Approx(lppd).epsilon(1e-12));
  CHECK(w.p_waic == doctest::Approx(p).epsilon(1e-12));
  CHECK(w.waic == doctest::Approx(-2.0 * (lppd - p)).epsilon(1e-12));

  // identical draws carry no penalty
  Grid2<double> flat(3, 4, std::log(0.1));
  const Waic w0 = compute_waic(flat);
  CHECK(w0.p_waic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w0.lppd == doctest::Approx(4.0 * std::log(0.1)).epsilon(1e-12));
  CHECK(w0.waic == doctest::Approx(-8.0 * std::log(0.1)).epsilon(1e-12));

  Grid2<double> one_draw(1, 3, -1.0);
  CHECK_THROWS_AS((void)compute_waic(one_draw), ValidationError);
}

TEST_CASE("split-chain diagnostic matches a hand computation") {
  // halves: {1,2} {3,4} {3,4} {5,6}: W = 0.5, B = 16/3
  const std::vector<std::vector<double>> chains = {{1, 2, 3, 4}, {3, 4, 5, 6}};
  const double w = 0.5;
  const double b = 2.0 / 3.0 * (4.0 + 0.0 + 0.0 + 4.0);
  const double var_hat = 0.5 * w + b / 2.0;
  CHECK(rhat(chains) == doctest::Approx(std::sqrt(var_hat / w)).epsilon(1e-12));

  // constant chains at the same value sit exactly at 1
  CHECK(rhat({{2.0, 2.0, 2.0, 2.0}, {2.0, 2.0, 2.0, 2.0}}) == 1.0);
  // constant chains at different values can never mix
  CHECK(std::isinf(rhat({{1.0, 1.0, 1.0, 1.0}, {2.0, 2.0, 2.0, 2.0}})));

  // long iid chains from the same law stay near 1
  Rng rng(2718);
  std::vector<std::vector<double>> iid(4);
  for (auto& c : iid) {
    for (int k = 0; k < 4000; ++k) c.push_back(rng.normal());
  }
  CHECK(rhat(iid) < 1.01);
  CHECK(rhat(iid) >= 1.0 - 1e-9);

  // odd lengths drop the middle element: {1,2,3} splits to {1},{3}, too short
  CHECK_THROWS_AS((void)rhat({{1.0, 2.0, 3.0}}), ValidationError);
  CHECK_THROWS_AS((void)rhat({}), ValidationError);
}

TEST_CASE("overlap index recovers the analytic normal overlap") {
  Rng rng(31415);
  const int n = 20000;
  std::vector<double> a(n), b(n);
  for (int k = 0; k < n; ++k) {
    a[k] = rng.normal();
    b[k] = rng.normal(1.0, 1.0);
  }
  // two unit normals a distance 1 apart overlap by 2*Phi(-1/2)
  const double target = 2.0 * oracle::normal_cdf(-0.5);
  const double ov = overlap_index(a, b);
  CHECK(std::fabs(ov - target) < 0.015);
  CHECK(overlap_index(b, a) == doctest::Approx(ov).epsilon(1e-12));

  // affine maps leave the index unchanged
  std::vector<double> a2(n), b2(n);
  for (int k = 0; k < n; ++k) {
    a2[k] = 2.0 * a[k] + 3.0;
    b2[k] = 2.0 * b[k] + 3.0;
  }
  CHECK(overlap_index(a2, b2) == doctest::Approx(ov).epsilon(1e-6));

  // unequal scales: the tight density must not be smeared by the wide one
  std::vector<double> wide(n), tight(n);
  for (int k = 0; k < n; ++k) {
    wide[k] = rng.normal(0.0, 1.0);
    tight[k] = rng.normal(2.0, 0.15);
  }
  const double scale_target = oracle::simpson(
      [](double x) {
        const double f = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.141592653589793);
        const double u = (x - 2.0) / 0.15;
        const double g = std::exp(-0.5 * u * u) / (0.15 * std::sqrt(2.0 * 3.141592653589793));
        return std::min(f, g);
      },
      -6.0, 6.0, 4000);
  CHECK(std::fabs(overlap_index(wide, tight) - scale_target) < 0.01);

  // identical samples overlap fully; distant ones don't overlap at all
  CHECK(overlap_index(a, a) > 0.99);
  CHECK(overlap_index(std::vector<double>(200, 4.2), std::vector<double>(100, 4.2)) == 1.0);
  std::vector<double> far(n);
  for (int k = 0; k < n; ++k) far[k] = a[k] + 50.0;
  CHECK(overlap_index(a, far) < 0.001);
  CHECK(overlap_index(std::vector<double>(50, 1.0), std::vector<double>(50, 2.0)) == 0.0);

  // degenerate spread still yields something sane
  const double deg = overlap_index(std::vector<double>{0, 0, 0, 0, 5},
                                   std::vector<double>{0, 0, 0, 0, 4});
  CHECK(deg >= 0.0);
  CHECK(deg <= 1.0);

  CHECK_THROWS_AS((void)overlap_index({}, a), ValidationError);
}

TEST_CASE("multi-class auc agrees with direct pair counting") {
  Rng rng(5551);
  const int n = 60;
  Grid2<double> membership(n, 3);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 3;
    double total = 0.0;
    for (int g = 0; g < 3; ++g) {
      membership(i, g) = rng.uniform() + (labels[i] == g ? 0.4 : 0.0);
      total += membership(i, g);
    }
    for (int g = 0; g < 3; ++g) membership(i, g) /= total;
  }
  CHECK(mauc(membership, labels) == doctest::Approx(mauc_oracle(membership, labels)).epsilon(1e-12));
  CHECK(mauc(membership, labels) > 0.5);

  // force ties to exercise the midrank path
  Grid2<double> tied(6, 2);
  std::vector<int> tied_labels = {0, 0, 0, 1, 1, 1};
  const double vals[6] = {0.3, 0.7, 0.7, 0.7, 0.2, 0.9};
  for (int i = 0; i < 6; ++i) {
    tied(i, 0) = vals[i];
    tied(i, 1) = 1.0 - vals[i];
  }
  CHECK(mauc(tied, tied_labels) ==
        doctest::Approx(mauc_oracle(tied, tied_labels)).epsilon(1e-12));

  // indistinguishable scores sit exactly at one half
  Grid2<double> half(10, 2, 0.5);
  std::vector<int> half_labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(mauc(half, half_labels) == doctest::Approx(0.5).epsilon(1e-12));

  // perfect separation scores 1
  Grid2<double> perfect(4, 2);
  std::vector<int> perfect_labels = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) {
    perfect(i, 0) = i < 2 ? 0.9 : 0.1;
    perfect(i, 1) = 1.0 - perfect(i, 0);
  }
  CHECK(mauc(perfect, perfect_labels) == doctest::Approx(1.0).epsilon(1e-12));

  // an absent class drops its pairs instead of polluting the average
  Grid2<double> wide(6, 3);
  std::vector<int> two_present = {0, 0, 0, 1, 1, 1};
  for (int i = 0; i < 6; ++i) {
    wide(i, 0) = vals[i];
    wide(i, 1) = 1.0 - vals[i];
    wide(i, 2) = 0.0;
  }
  CHECK(mauc(wide, two_present) ==
        doctest::Approx(mauc_oracle(tied, tied_labels)).epsilon(1e-12));

  CHECK_THROWS_AS((void)mauc(tied, std::vector<int>{0, 1}), ValidationError);
  CHECK_THROWS_AS((void)mauc(tied, std::vector<int>{0, 0, 0, 0, 0, 2}), ValidationError);
  CHECK_THROWS_AS((void)mauc(tied, std::vector<int>{0, 0, 0, 0, 0, 0}), ValidationError);
}

TEST_CASE("map classification breaks ties toward the first group") {
  Grid2<double> membership(4, 3);
  const double rows[4][3] = {
      {0.4, 0.4, 0.2}, {0.1, 0.2, 0.7}, {0.3, 0.3, 0.4}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  for (int i = 0; i < 4; ++i) {
    for (int g = 0; g < 3; ++g) membership(i, g) = rows[i][g];
  }
  CHECK(map_classify(membership) == std::vector<int>{0, 2, 2, 0});
}

TEST_CASE("quantiles interpolate linearly between order statistics") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile({3, 1, 4, 1, 5}, 0.3) == doctest::Approx(1.4).epsilon(1e-12));
  CHECK(quantile({7.5}, 0.99) == 7.5);
  CHECK(quantile({5, 1, 9}, 0.5) == 5.0);
  CHECK_THROWS_AS((void)quantile({}, 0.5), ValidationError);
  CHECK_THROWS_AS((void)quantile({1.0}, 1.5), ValidationError);
  CHECK_THROWS_AS((void)quantile({1.0}, -0.1), ValidationError);
}

TEST_CASE("fit summary aggregates series, waic, and membership") {
  DrawStore draws;
  draws.names = {"a", "b"};
  draws.chain = {1, 1, 1, 1, 2, 2, 2, 2};
  draws.iter = {1, 2, 3, 4, 1, 2, 3, 4};
  draws.values = Grid2<double>(8, 2);
  for (int k = 0; k < 8; ++k) {
    draws.values(k, 0) = k + 1.0;
    draws.values(k, 1) = 5.0;
  }
  draws.loglik = Grid2<double>(8, 2);
  for (int k = 0; k < 8; ++k) {
    draws.loglik(k, 0) = std::log(0.1 + 0.02 * k);
    draws.loglik(k, 1) = std::log(0.3);
  }
  draws.label_counts = Grid2<double>(2, 2);
  draws.label_counts(0, 0) = 6;
  draws.label_counts(0, 1) = 2;
  draws.label_counts(1, 0) = 0;
  draws.label_counts(1, 1) = 8;

  const FitSummary summary = summarize_fit(draws, 2, 40);
  CHECK(summary.n_observed == 2);
  CHECK(summary.n_rows == 40);
  REQUIRE(summary.params.size() == 2);
  CHECK(summary.params[0].name == "a");
  CHECK(summary.params[0].mean == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(summary.params[0].median == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(summary.params[0].lower == doctest::Approx(1.175).epsilon(1e-12));
  CHECK(summary.params[0].upper == doctest::Approx(7.825).epsilon(1e-12));
  CHECK(summary.params[0].rhat ==
        doctest::Approx(rhat({{1, 2, 3, 4}, {5, 6, 7, 8}})).epsilon(1e-12));
  CHECK(summary.params[1].rhat == 1.0);

  // waic over the stored pointwise matrix, recomputed here by the definition
  double lppd = 0.0, p_waic = 0.0;
  for (int i = 0; i < 2; ++i) {
    double mean_p = 0.0, mean_ll = 0.0;
    for (int k = 0; k < 8; ++k) {
      mean_p += std::exp(draws.loglik(k, i));
      mean_ll += draws.loglik(k, i);
    }
    lppd += std::log(mean_p / 8.0);
    mean_ll /= 8.0;
    double var = 0.0;
    for (int k = 0; k < 8; ++k) var += std::pow(draws.loglik(k, i) - mean_ll, 2.0);
    p_waic += var / 7.0;
  }
  CHECK(summary.waic.lppd == doctest::Approx(lppd).epsilon(1e-12));
  CHECK(summary.waic.p_waic == doctest::Approx(p_waic).epsilon(1e-12));
  CHECK(summary.waic.waic == doctest::Approx(-2.0 * (lppd - p_waic)).epsilon(1e-12));

  REQUIRE(summary.membership.rows() == 2);
  CHECK(summary.membership(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(summary.membership(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(summary.membership(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  DrawStore empty;
  CHECK_THROWS_AS((void)summarize_fit(empty, 0, 0), ValidationError);
}

TEST_CASE("abundance summary filters the yearly count series") {
  DrawStore draws;
  draws.names = {"N_super", "ycount[2011][1]", "ycount[2011][all]", "ycount[2012][1]",
                 "ycount[2012][all]"};
  draws.chain = {1, 1, 1, 1};
  draws.iter = {1, 2, 3, 4};
  draws.values = Grid2<double>(4, 5);
  for (int k = 0; k < 4; ++k) {
    draws.values(k, 0) = 100 + k;
    draws.values(k, 1) = 10 + k;
    draws.values(k, 2) = 20 + k;
    draws.values(k, 3) = 30 + k;
    draws.values(k, 4) = 40 + k;
  }

  const std::vector<ParamSummary> rows = abundance_summary(draws, {2011, 2011, 2012});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "ycount[2011][1]");
  CHECK(rows[0].mean == doctest::Approx(11.5).epsilon(1e-12));
  CHECK(rows[1].name == "ycount[2011][all]");
  CHECK(rows[3].name == "ycount[2012][all]");
  CHECK(rows[3].median == doctest::Approx(41.5).epsilon(1e-12));

  CHECK_THROWS_AS((void)abundance_summary(draws, {}), ValidationError);
  CHECK_THROWS_AS((void)abundance_summary(draws, {2011, 2013}), ValidationError);

  DrawStore bare;
  bare.names = {"N_super"};
  bare.chain = {1};
  bare.iter = {1};
  bare.values = Grid2<double>(1, 1, 5.0);
  CHECK_THROWS_WITH_AS((void)abundance_summary(bare, {2011}),
                       "stored draws carry no yearly counts; rerun the fit with a calendar",
                       ValidationError);
}

TEST_CASE("experiment metrics aggregate replicas per scenario and model") {
  auto replica = [](std::string model, int scenario, int rep, double truth, double expected,
                    double median, double lo, double hi, double waic) {
    ReplicaResult r;
    r.model = std::move(model);
    r.scenario = scenario;
    r.replica = rep;
    r.truth_nsuper = truth;
    r.expected_nsuper = expected;
    r.nsuper_median = median;
    r.nsuper_lower = lo;
    r.nsuper_upper = hi;
    r.waic = waic;
    return r;
  };

  ReplicaResult a1 = replica("rpt", 10, 1, 170, 170, 180, 150, 200, 100);
  a1.mauc = 0.8;
  a1.ov_phi = 0.05;
  a1.map_accuracy = 0.7;
  ReplicaResult a2 = replica("rpt", 10, 2, 175, 170, 185, 180, 190, 90);
  a2.mauc = 0.9;
  ReplicaResult b1 = replica("m1", 10, 1, 170, 170, 150, 120, 165, 110);
  ReplicaResult b2 = replica("m1", 10, 2, 175, 170, 176, 170, 185, 85);
  ReplicaResult c1 = replica("rpt", 20, 1, 209, 209, 209, 200, 220, 400);

  const MetricsTable table = experiment_metrics({a1, a2, b1, b2, c1});
  REQUIRE(table.size() == 3);
  // grouped rows come out ordered by scenario, then by model name
  CHECK(table[0].model == "m1");
  CHECK(table[0].scenario == 10);
  CHECK(table[1].model == "rpt");
  CHECK(table[1].scenario == 10);
  CHECK(table[2].model == "rpt");
  CHECK(table[2].scenario == 20);

  const MetricsRow& rpt10 = table[1];
  CHECK(rpt10.n_replicas == 2);
  CHECK(rpt10.mae_rel == doctest::Approx(10.0 / 170.0).epsilon(1e-12));
  CHECK(rpt10.coverage == doctest::Approx(0.5).epsilon(1e-12));  // only replica 1 covers
  CHECK(rpt10.ciw_rel == doctest::Approx((50.0 / 170.0 + 10.0 / 170.0) / 2.0).epsilon(1e-12));
  CHECK(rpt10.median_waic == doctest::Approx(95.0).epsilon(1e-12));
  // rpt wins replica 1 (100 < 110), m1 wins replica 2 (85 < 90)
  CHECK(rpt10.best_waic_share == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rpt10.median_mauc == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(rpt10.median_ov == doctest::Approx(0.05).epsilon(1e-12));  // single valid entry
  CHECK(rpt10.median_map_accuracy == doctest::Approx(0.7).epsilon(1e-12));

  const MetricsRow& m110 = table[0];
  CHECK(m110.best_waic_share == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m110.coverage == doctest::Approx(0.5).epsilon(1e-12));  // replica 2 covers
  CHECK(m110.median_mauc == -1.0);
  CHECK(m110.median_ov == -1.0);
  CHECK(m110.median_map_accuracy == -1.0);

  const MetricsRow& rpt20 = table[2];
  CHECK(rpt20.n_replicas == 1);
  CHECK(rpt20.best_waic_share == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rpt20.mae_rel == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rpt20.coverage == doctest::Approx(1.0).epsilon(1e-12));

  // an exact waic tie makes both models best in that replica
  ReplicaResult t1 = replica("rpt", 30, 1, 100, 100, 100, 90, 110, 55);
  ReplicaResult t2 = replica("m1", 30, 1, 100, 100, 100, 90, 110, 55);
  const MetricsTable tie = experiment_metrics({t1, t2});
  CHECK(tie[0].best_waic_share == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tie[1].best_waic_share == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)experiment_metrics({}), ValidationError);
}
