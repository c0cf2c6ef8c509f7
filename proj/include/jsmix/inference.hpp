#pragma once

#include <string>
#include <vector>

#include "jsmix/common.hpp"
#include "jsmix/mcmc.hpp"

namespace jsmix {

// ---- information criterion ---------------------------------------------------

struct Waic {
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
};

// pointwise log-likelihood matrix: draws x units
Waic compute_waic(const Grid2<double>& loglik);

// ---- convergence -------------------------------------------------------------

// Split-chain Gelman-Rubin factor; constant chains return exactly 1.
double rhat(const std::vector<std::vector<double>>& chains);

// ---- posterior comparison / classification -----------------------------------

// Integral of the pointwise minimum of two kernel density estimates
// (Gaussian kernel, Silverman bandwidth on the pooled sample, 512-point grid).
double overlap_index(std::span<const double> a, std::span<const double> b);

// Hand-Till multi-class AUC from a membership matrix and true labels
// (0-based). Pairs with an absent class are skipped.
double mauc(const Grid2<double>& membership, std::span<const int> labels);

// argmax per row, ties to the lowest index
std::vector<int> map_classify(const Grid2<double>& membership);

// ---- posterior summaries -----------------------------------------------------

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;   // 2.5%
  double upper = 0.0;   // 97.5%
  double rhat = 1.0;
};

struct FitSummary {
  std::vector<ParamSummary> params;  // every stored series, including derived counts
  Waic waic;
  Grid2<double> membership;          // D x G (0x0 when G = 1)
  int n_observed = 0;
  int n_rows = 0;  // augmented size M
};

// quantile with linear interpolation (R type-7)
double quantile(std::vector<double> values, double q);

FitSummary summarize_fit(const DrawStore& draws, int n_observed, int n_rows);

// Summaries restricted to yearly count series; validates the stored draws
// actually carry the mapping.
std::vector<ParamSummary> abundance_summary(const DrawStore& draws,
                                            const std::vector<int>& occasion_year);

// ---- simulation-study metrics -------------------------------------------------

struct ReplicaResult {
  std::string model;
  int scenario = 0;          // scenario id (number of occasions)
  int replica = 0;
  double truth_nsuper = 0.0;
  double expected_nsuper = 0.0;  // scenario-level E[N_super], denominator of _rel metrics
  double nsuper_median = 0.0;
  double nsuper_lower = 0.0;
  double nsuper_upper = 0.0;
  double waic = 0.0;
  double ov_phi = -1.0;        // overlap of the two extreme survival posteriors; <0 = n/a
  double mauc = -1.0;          // <0 = n/a (truth labels unavailable)
  double map_accuracy = -1.0;  // <0 = n/a
  double max_rhat = 0.0;
};

struct MetricsRow {
  std::string model;
  int scenario = 0;
  int n_replicas = 0;
  double mae_rel = 0.0;
  double coverage = 0.0;
  double ciw_rel = 0.0;
  double median_waic = 0.0;
  double best_waic_share = 0.0;
  double median_ov = -1.0;
  double median_mauc = -1.0;
  double median_map_accuracy = -1.0;
};

using MetricsTable = std::vector<MetricsRow>;

// Groups replicas by (scenario, model); %best-WAIC is judged within each
// (scenario, replica) across the models present there.
MetricsTable experiment_metrics(const std::vector<ReplicaResult>& replicas);

}  // namespace jsmix
