#include "jsmix/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace jsmix {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr const char* kArtifactVersion = "0.1.0";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  return out;
}

double parse_double(const std::string& text, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + text + "' in " + where);
  }
}

long parse_long(const std::string& text, const std::string& where) {
  try {
    size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cannot parse integer '" + text + "' in " + where);
  }
}

}  // namespace

std::string fmt_double(double value) {
  char buf[40];
  // shortest representation that still round-trips exactly
  std::string best;
  for (int prec = 1; prec <= 17 && best.empty(); ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == value) best = buf;
  }
  if (best.empty()) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    best = buf;
  }
  // prefer the plain integer form over scientific when it is no longer
  if (std::rint(value) == value && std::fabs(value) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%.0f", value);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == value && std::strlen(buf) <= best.size()) best = buf;
  }
  return best;
}

// ---- config -----------------------------------------------------------------

namespace {

void read_mcmc_block(const json& j, McmcConfig& mcmc) {
  if (j.contains("chains")) mcmc.n_chains = j.at("chains").get<int>();
  if (j.contains("iters")) mcmc.n_iters = j.at("iters").get<int>();
  if (j.contains("burnin")) mcmc.burn_in = j.at("burnin").get<int>();
  if (j.contains("thin")) mcmc.thin = j.at("thin").get<int>();
  if (j.contains("seed")) mcmc.seed = j.at("seed").get<uint64_t>();
  if (j.contains("adapt")) mcmc.adapt = j.at("adapt").get<bool>();
  if (j.contains("target_accept")) mcmc.target_accept = j.at("target_accept").get<double>();
  if (j.contains("init_step")) mcmc.init_step = j.at("init_step").get<double>();
  if (j.contains("store_loglik")) mcmc.store_loglik = j.at("store_loglik").get<bool>();
}

void read_prior_block(const json& j, PriorConfig& priors) {
  if (j.contains("mu_variance")) priors.mu_variance = j.at("mu_variance").get<double>();
  if (j.contains("tau_variance")) priors.tau_variance = j.at("tau_variance").get<double>();
  if (j.contains("delta_a")) priors.delta_a = j.at("delta_a").get<double>();
  if (j.contains("delta_b")) priors.delta_b = j.at("delta_b").get<double>();
  if (j.contains("dirichlet_alpha")) {
    priors.dirichlet_alpha = j.at("dirichlet_alpha").get<double>();
  }
  if (j.contains("delta_fixed")) priors.delta_fixed = j.at("delta_fixed").get<double>();
}

void read_scenario_block(const json& j, ScenarioConfig& sc) {
  if (j.contains("n_available")) sc.n_available = j.at("n_available").get<int>();
  if (j.contains("phi_transient")) sc.phi_transient = j.at("phi_transient").get<double>();
  if (j.contains("phi_resident")) sc.phi_resident = j.at("phi_resident").get<double>();
  if (j.contains("mu")) sc.mu = j.at("mu").get<double>();
  if (j.contains("delta")) sc.delta = j.at("delta").get<double>();
  if (j.contains("tau_sd")) sc.tau_sd = j.at("tau_sd").get<double>();
  if (j.contains("occasions_per_year")) {
    sc.occasions_per_year = j.at("occasions_per_year").get<int>();
  }
  if (j.contains("rho_r_first")) sc.rho_r_first = j.at("rho_r_first").get<double>();
  if (j.contains("rho_r_year_start")) sc.rho_r_year_start = j.at("rho_r_year_start").get<double>();
  if (j.contains("rho_r_later")) sc.rho_r_later = j.at("rho_r_later").get<double>();
  if (j.contains("rho_p_first")) sc.rho_p_first = j.at("rho_p_first").get<double>();
  if (j.contains("rho_p_year_start")) sc.rho_p_year_start = j.at("rho_p_year_start").get<double>();
  if (j.contains("rho_p_later")) sc.rho_p_later = j.at("rho_p_later").get<double>();
  if (j.contains("rho_t_const")) sc.rho_t_const = j.at("rho_t_const").get<double>();
  if (j.contains("weights")) sc.weights = j.at("weights").get<std::vector<double>>();
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  try {
    if (j.contains("data")) cfg.data_path = j.at("data").get<std::string>();
    if (j.contains("occasions")) cfg.occasions_path = j.at("occasions").get<std::string>();
    if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
    if (j.contains("unit")) cfg.unit = j.at("unit").get<std::string>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("augment")) cfg.augment = j.at("augment").get<int>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (j.contains("calendar")) cfg.calendar = j.at("calendar").get<std::vector<int>>();
    if (j.contains("mcmc")) read_mcmc_block(j.at("mcmc"), cfg.mcmc);
    if (j.contains("priors")) read_prior_block(j.at("priors"), cfg.priors);
    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      if (e.contains("scenarios")) cfg.scenarios = e.at("scenarios").get<std::vector<int>>();
      if (e.contains("models")) cfg.models = e.at("models").get<std::vector<std::string>>();
      if (e.contains("replicas")) cfg.replicas = e.at("replicas").get<int>();
      read_scenario_block(e, cfg.scenario_base);
    }
  } catch (const json::exception& err) {
    throw ValidationError(std::string("malformed config: ") + err.what());
  }
  if (cfg.augment < 0) throw ValidationError("augment must be non-negative");
  if (cfg.jobs < 1) throw ValidationError("jobs must be at least 1");
  return cfg;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + err.what());
  }
  return config_from_json(j);
}

std::string config_to_json(const RunConfig& config) {
  ordered_json j;
  j["data"] = config.data_path;
  j["occasions"] = config.occasions_path;
  j["model"] = config.model;
  j["unit"] = config.unit;
  j["out"] = config.out_dir;
  j["augment"] = config.augment;
  j["jobs"] = config.jobs;
  j["calendar"] = config.calendar;
  j["mcmc"] = {{"chains", config.mcmc.n_chains},      {"iters", config.mcmc.n_iters},
               {"burnin", config.mcmc.burn_in},       {"thin", config.mcmc.thin},
               {"seed", config.mcmc.seed},            {"adapt", config.mcmc.adapt},
               {"target_accept", config.mcmc.target_accept},
               {"init_step", config.mcmc.init_step},  {"store_loglik", config.mcmc.store_loglik}};
  j["priors"] = {{"mu_variance", config.priors.mu_variance},
                 {"tau_variance", config.priors.tau_variance},
                 {"delta_a", config.priors.delta_a},
                 {"delta_b", config.priors.delta_b},
                 {"dirichlet_alpha", config.priors.dirichlet_alpha},
                 {"delta_fixed", config.priors.delta_fixed}};
  j["experiment"] = {{"scenarios", config.scenarios},
                     {"models", config.models},
                     {"replicas", config.replicas},
                     {"n_available", config.scenario_base.n_available},
                     {"phi_transient", config.scenario_base.phi_transient},
                     {"phi_resident", config.scenario_base.phi_resident},
                     {"mu", config.scenario_base.mu},
                     {"delta", config.scenario_base.delta},
                     {"tau_sd", config.scenario_base.tau_sd},
                     {"occasions_per_year", config.scenario_base.occasions_per_year},
                     {"rho_r_first", config.scenario_base.rho_r_first},
                     {"rho_r_year_start", config.scenario_base.rho_r_year_start},
                     {"rho_r_later", config.scenario_base.rho_r_later},
                     {"rho_p_first", config.scenario_base.rho_p_first},
                     {"rho_p_year_start", config.scenario_base.rho_p_year_start},
                     {"rho_p_later", config.scenario_base.rho_p_later},
                     {"rho_t_const", config.scenario_base.rho_t_const},
                     {"weights", config.scenario_base.weights}};
  return j.dump(2);
}

uint64_t config_hash(const RunConfig& config) {
  const std::string text = config_to_json(config);
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---- capture / occasions csv --------------------------------------------------

CaptureData read_capture_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id") {
    throw ValidationError("'" + path + "': header must be id,t1..tT");
  }
  const int T = static_cast<int>(header.size()) - 1;
  std::vector<std::string> ids;
  std::vector<uint8_t> cells;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != T + 1) {
      throw ValidationError("'" + path + "' row " + std::to_string(row) + ": expected " +
                            std::to_string(T + 1) + " fields, got " +
                            std::to_string(fields.size()));
    }
    for (const std::string& prev : ids) {
      if (prev == fields[0]) {
        throw ValidationError("'" + path + "': duplicate id '" + fields[0] + "'");
      }
    }
    ids.push_back(fields[0]);
    for (int t = 0; t < T; ++t) {
      const std::string& cell = fields[t + 1];
      if (cell == "0") {
        cells.push_back(0);
      } else if (cell == "1") {
        cells.push_back(1);
      } else {
        throw ValidationError("'" + path + "' row " + std::to_string(row) + " (id " + fields[0] +
                              "), occasion " + std::to_string(t + 1) + ": non-binary cell '" +
                              cell + "'");
      }
    }
  }
  if (row == 0) throw ValidationError("'" + path + "' has a header but no data rows");
  Grid2<uint8_t> observed(row, T);
  observed.data() = std::move(cells);
  return make_capture_data(std::move(observed), std::move(ids));
}

OccasionsFile read_occasions_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  const bool has_year = header.size() == 3 && header[2] == "year";
  if (!(header.size() == 2 || has_year) || header[0] != "t" || header[1] != "day_offset") {
    throw ValidationError("'" + path + "': header must be t,day_offset[,year]");
  }
  OccasionsFile out;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("'" + path + "' row " + std::to_string(row) + ": wrong field count");
    }
    const long t = parse_long(fields[0], path + " row " + std::to_string(row));
    if (t != row) {
      throw ValidationError("'" + path + "': occasion index " + fields[0] + " at row " +
                            std::to_string(row) + " (duplicate or out of order)");
    }
    out.day_offsets.push_back(parse_double(fields[1], path + " row " + std::to_string(row)));
    if (has_year) {
      out.years.push_back(
          static_cast<int>(parse_long(fields[2], path + " row " + std::to_string(row))));
    }
  }
  if (row < 2) throw ValidationError("'" + path + "' needs at least 2 occasions");
  return out;
}

void write_capture_csv(const std::string& path, const CaptureData& data) {
  std::ofstream out = open_output(path);
  out << "id";
  for (int t = 1; t <= data.n_occasions(); ++t) out << ",t" << t;
  out << "\n";
  for (int i = 0; i < data.n_observed; ++i) {
    out << data.ids[i];
    for (int t = 0; t < data.n_occasions(); ++t) out << ',' << int(data.y(i, t));
    out << "\n";
  }
}

void write_occasions_csv(const std::string& path, const TimeGrid& grid,
                         const std::vector<int>& years) {
  if (!years.empty() && static_cast<int>(years.size()) != grid.n_occasions()) {
    throw ValidationError("year column must cover every occasion");
  }
  std::ofstream out = open_output(path);
  out << (years.empty() ? "t,day_offset" : "t,day_offset,year") << "\n";
  for (int t = 0; t < grid.n_occasions(); ++t) {
    out << t + 1 << ',' << fmt_double(grid.occasion_days[t]);
    if (!years.empty()) out << ',' << years[t];
    out << "\n";
  }
}

// ---- draws --------------------------------------------------------------------

void write_draws_csv(const std::string& path, const DrawStore& draws) {
  std::ofstream out = open_output(path);
  out << "chain,iter,parameter,value\n";
  for (int i = 0; i < draws.n_draws(); ++i) {
    for (int j = 0; j < draws.n_series(); ++j) {
      out << draws.chain[i] << ',' << draws.iter[i] << ',' << draws.names[j] << ','
          << fmt_double(draws.values(i, j)) << "\n";
    }
  }
}

DrawStore read_draws_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) !=
                                     std::vector<std::string>{"chain", "iter", "parameter",
                                                              "value"}) {
    throw ValidationError("'" + path + "': header must be chain,iter,parameter,value");
  }
  DrawStore draws;
  std::vector<double> flat;
  int prev_chain = -1;
  int prev_iter = -1;
  bool first_block_done = false;
  size_t within = 0;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 4) {
      throw ValidationError("'" + path + "' row " + std::to_string(row) + ": wrong field count");
    }
    const std::string where = path + " row " + std::to_string(row);
    const int chain = static_cast<int>(parse_long(fields[0], where));
    const int iter = static_cast<int>(parse_long(fields[1], where));
    const double value = parse_double(fields[3], where);
    if (chain != prev_chain || iter != prev_iter) {
      if (first_block_done && within != draws.names.size()) {
        throw ValidationError("'" + path + "': incomplete draw block before row " +
                              std::to_string(row));
      }
      if (!draws.chain.empty()) first_block_done = true;
      draws.chain.push_back(chain);
      draws.iter.push_back(iter);
      prev_chain = chain;
      prev_iter = iter;
      within = 0;
    }
    if (!first_block_done) {
      draws.names.push_back(fields[2]);
    } else if (within >= draws.names.size() || fields[2] != draws.names[within]) {
      throw ValidationError("'" + path + "' row " + std::to_string(row) +
                            ": unexpected parameter '" + fields[2] + "'");
    }
    flat.push_back(value);
    ++within;
  }
  if (draws.chain.empty()) throw ValidationError("'" + path + "' holds no draws");
  if (within != draws.names.size()) {
    throw ValidationError("'" + path + "': final draw block is incomplete");
  }
  Grid2<double> values(static_cast<int>(draws.chain.size()),
                       static_cast<int>(draws.names.size()));
  values.data() = std::move(flat);
  draws.values = std::move(values);
  return draws;
}

// ---- summaries ------------------------------------------------------------------

namespace {

double json_safe(double v) { return std::isfinite(v) ? v : 1e300; }

}  // namespace

void write_summary_json(const std::string& path, const FitSummary& summary) {
  ordered_json j;
  j["n_observed"] = summary.n_observed;
  j["n_rows"] = summary.n_rows;
  j["waic"] = {{"waic", json_safe(summary.waic.waic)},
               {"lppd", json_safe(summary.waic.lppd)},
               {"p_waic", json_safe(summary.waic.p_waic)}};
  ordered_json params = ordered_json::array();
  for (const ParamSummary& p : summary.params) {
    params.push_back({{"name", p.name},
                      {"mean", json_safe(p.mean)},
                      {"median", json_safe(p.median)},
                      {"lower", json_safe(p.lower)},
                      {"upper", json_safe(p.upper)},
                      {"rhat", json_safe(p.rhat)}});
  }
  j["params"] = std::move(params);
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
}

FitSummary read_summary_json(const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ValidationError("'" + path + "' is not valid JSON: " + err.what());
  }
  FitSummary summary;
  try {
    summary.n_observed = j.at("n_observed").get<int>();
    summary.n_rows = j.at("n_rows").get<int>();
    summary.waic.waic = j.at("waic").at("waic").get<double>();
    summary.waic.lppd = j.at("waic").at("lppd").get<double>();
    summary.waic.p_waic = j.at("waic").at("p_waic").get<double>();
    for (const json& p : j.at("params")) {
      ParamSummary ps;
      ps.name = p.at("name").get<std::string>();
      ps.mean = p.at("mean").get<double>();
      ps.median = p.at("median").get<double>();
      ps.lower = p.at("lower").get<double>();
      ps.upper = p.at("upper").get<double>();
      ps.rhat = p.at("rhat").get<double>();
      summary.params.push_back(std::move(ps));
    }
  } catch (const json::exception& err) {
    throw ValidationError("'" + path + "' summary malformed: " + err.what());
  }
  return summary;
}

void write_membership_csv(const std::string& path, const Grid2<double>& membership,
                          const std::vector<std::string>& ids) {
  if (static_cast<int>(ids.size()) != membership.rows()) {
    throw ValidationError("membership rows do not match the id list");
  }
  std::ofstream out = open_output(path);
  out << "id";
  for (int g = 1; g <= membership.cols(); ++g) out << ",p_group" << g;
  out << "\n";
  for (int i = 0; i < membership.rows(); ++i) {
    out << ids[i];
    for (int g = 0; g < membership.cols(); ++g) out << ',' << fmt_double(membership(i, g));
    out << "\n";
  }
}

Grid2<double> read_membership_csv(const std::string& path, std::vector<std::string>* ids) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id") {
    throw ValidationError("'" + path + "': header must be id,p_group1..G");
  }
  const int G = static_cast<int>(header.size()) - 1;
  std::vector<double> flat;
  std::vector<std::string> names;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != G + 1) {
      throw ValidationError("'" + path + "' row " + std::to_string(row) + ": wrong field count");
    }
    names.push_back(fields[0]);
    for (int g = 0; g < G; ++g) {
      flat.push_back(parse_double(fields[g + 1], path + " row " + std::to_string(row)));
    }
  }
  if (row == 0) throw ValidationError("'" + path + "' has no rows");
  Grid2<double> out(row, G);
  out.data() = std::move(flat);
  if (ids) *ids = std::move(names);
  return out;
}

void write_metrics_csv(const std::string& path, const MetricsTable& table) {
  std::ofstream out = open_output(path);
  out << "model,scenario,n_replicas,mae_rel,coverage,ciw_rel,median_waic,best_waic_share,"
         "median_ov,median_mauc,median_map_accuracy\n";
  auto opt = [](double v) { return v < 0.0 ? std::string() : fmt_double(v); };
  for (const MetricsRow& row : table) {
    out << row.model << ',' << row.scenario << ',' << row.n_replicas << ','
        << fmt_double(row.mae_rel) << ',' << fmt_double(row.coverage) << ','
        << fmt_double(row.ciw_rel) << ',' << fmt_double(row.median_waic) << ','
        << fmt_double(row.best_waic_share) << ',' << opt(row.median_ov) << ','
        << opt(row.median_mauc) << ',' << opt(row.median_map_accuracy) << "\n";
  }
}

// ---- manifest -------------------------------------------------------------------

void write_manifest(const std::string& path, const RunConfig& config) {
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, config_hash(config));
  j["config_hash"] = hex;
  j["config"] = json::parse(config_to_json(config));
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
}

RunConfig read_manifest(const std::string& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ValidationError("'" + path + "' is not valid JSON: " + err.what());
  }
  if (!j.contains("config")) throw ValidationError("'" + path + "' has no config block");
  return config_from_json(j.at("config"));
}

void write_fit_outputs(const std::string& dir, const RunConfig& config, const DrawStore& draws,
                       const FitSummary& summary, const std::vector<std::string>& observed_ids) {
  std::filesystem::create_directories(dir);
  write_manifest(dir + "/manifest.json", config);
  write_draws_csv(dir + "/draws.csv", draws);
  write_summary_json(dir + "/summary.json", summary);
  if (!summary.membership.empty()) {
    write_membership_csv(dir + "/membership.csv", summary.membership, observed_ids);
  }
}

void write_truth_json(const std::string& path, const SimResult& sim) {
  ordered_json j;
  j["n_super"] = sim.truth.n_super;
  j["n_available"] = static_cast<int>(sim.truth.group.size());
  j["n_observed"] = sim.data.n_observed;
  j["n_t"] = sim.truth.n_t;
  ordered_json observed_groups = ordered_json::array();
  for (int idx : sim.truth.kept) observed_groups.push_back(sim.truth.group[idx]);
  j["observed_groups"] = std::move(observed_groups);
  const GroupParams& params = sim.truth.params;
  ordered_json rho = ordered_json::array();
  for (int g = 0; g < params.rho.rows(); ++g) {
    rho.push_back(std::vector<double>(params.rho.row(g),
                                      params.rho.row(g) + params.rho.cols()));
  }
  j["params"] = {{"rho", std::move(rho)}, {"phi", params.phi},    {"mu", params.mu},
                 {"tau", params.tau},     {"delta", params.delta}, {"weights", params.weights}};
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
}

}  // namespace jsmix
