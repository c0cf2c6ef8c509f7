#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jsmix/capture_data.hpp"
#include "jsmix/distributions.hpp"
#include "jsmix/inference.hpp"
#include "jsmix/mcmc.hpp"
#include "jsmix/simulator.hpp"
#include "jsmix/time_grid.hpp"

namespace jsmix {

// Resolved run configuration: a declarative JSON file plus command-line
// overrides; every run writes the resolved form back into its manifest.
struct RunConfig {
  std::string data_path;
  std::string occasions_path;
  std::string model = "rpt";
  std::string unit = "month";
  std::string out_dir = "out";
  int augment = 500;  // all-zero rows appended (M - D)
  int jobs = 1;
  McmcConfig mcmc;
  PriorConfig priors;
  std::vector<int> calendar;  // reporting year per occasion; empty = no yearly series

  // experiment block
  std::vector<int> scenarios = {10};
  std::vector<std::string> models = {"rpt"};
  int replicas = 1;
  ScenarioConfig scenario_base;
};

RunConfig load_config(const std::string& path);  // throws ValidationError with diagnostics
std::string config_to_json(const RunConfig& config);
uint64_t config_hash(const RunConfig& config);   // FNV-1a over the resolved JSON

// ---- data ingestion ----------------------------------------------------------

// header `id,t1..tT`, binary cells; duplicate ids and all-zero rows rejected
CaptureData read_capture_csv(const std::string& path);

struct OccasionsFile {
  std::vector<double> day_offsets;
  std::vector<int> years;  // empty when the file has no year column
};

// header `t,day_offset[,year]`, t = 1..T in order, offsets strictly increasing
OccasionsFile read_occasions_csv(const std::string& path);

// ---- serialisation -----------------------------------------------------------

// shortest round-trip decimal form of a double (%.17g trimmed)
std::string fmt_double(double value);

void write_capture_csv(const std::string& path, const CaptureData& data);
void write_occasions_csv(const std::string& path, const TimeGrid& grid,
                         const std::vector<int>& years);

// long format: chain,iter,parameter,value
void write_draws_csv(const std::string& path, const DrawStore& draws);
DrawStore read_draws_csv(const std::string& path);

void write_summary_json(const std::string& path, const FitSummary& summary);
FitSummary read_summary_json(const std::string& path);

void write_membership_csv(const std::string& path, const Grid2<double>& membership,
                          const std::vector<std::string>& ids);
Grid2<double> read_membership_csv(const std::string& path, std::vector<std::string>* ids);

void write_metrics_csv(const std::string& path, const MetricsTable& table);

// manifest ties outputs to the exact resolved config + seed
void write_manifest(const std::string& path, const RunConfig& config);
RunConfig read_manifest(const std::string& path);

// everything a fit emits: manifest.json, draws.csv, summary.json,
// membership.csv (G > 1), loglik.csv kept out (too big) - WAIC lands in summary
void write_fit_outputs(const std::string& dir, const RunConfig& config, const DrawStore& draws,
                       const FitSummary& summary, const std::vector<std::string>& observed_ids);

// simulate outputs: capture csv, occasions csv, truth json
void write_truth_json(const std::string& path, const SimResult& sim);

}  // namespace jsmix
