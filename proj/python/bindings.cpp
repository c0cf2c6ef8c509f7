// python surface over the core engine: simulate, fit, and the posterior metrics
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jsmix/inference.hpp"
#include "jsmix/io.hpp"
#include "jsmix/mcmc.hpp"
#include "jsmix/simulator.hpp"

namespace py = pybind11;

namespace {

template <typename T>
jsmix::Grid2<T> grid_from_rows(const std::vector<std::vector<T>>& rows) {
  if (rows.empty()) return {};
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(rows.front().size());
  jsmix::Grid2<T> grid(n, m);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != m) {
      throw jsmix::ValidationError("ragged matrix: row " + std::to_string(i + 1) + " has " +
                                   std::to_string(rows[i].size()) + " columns, expected " +
                                   std::to_string(m));
    }
    for (int j = 0; j < m; ++j) grid(i, j) = rows[i][j];
  }
  return grid;
}

template <typename T>
std::vector<std::vector<T>> rows_from_grid(const jsmix::Grid2<T>& grid) {
  std::vector<std::vector<T>> rows(grid.rows());
  for (int i = 0; i < grid.rows(); ++i) {
    rows[i].assign(grid.row(i), grid.row(i) + grid.cols());
  }
  return rows;
}

jsmix::CaptureData capture_from_python(const std::vector<std::vector<int>>& capture,
                                       std::vector<std::string> ids) {
  jsmix::Grid2<uint8_t> y(static_cast<int>(capture.size()),
                          capture.empty() ? 0 : static_cast<int>(capture.front().size()));
  for (size_t i = 0; i < capture.size(); ++i) {
    if (static_cast<int>(capture[i].size()) != y.cols()) {
      throw jsmix::ValidationError("ragged capture matrix at row " + std::to_string(i + 1));
    }
    for (int t = 0; t < y.cols(); ++t) {
      const int v = capture[i][t];
      if (v != 0 && v != 1) {
        throw jsmix::ValidationError("capture cells must be 0/1; row " + std::to_string(i + 1) +
                                     " occasion " + std::to_string(t + 1) + " holds " +
                                     std::to_string(v));
      }
      y(i, t) = static_cast<uint8_t>(v);
    }
  }
  return jsmix::make_capture_data(std::move(y), std::move(ids));
}

py::dict waic_dict(const jsmix::Waic& w) {
  py::dict d;
  d["waic"] = w.waic;
  d["lppd"] = w.lppd;
  d["p_waic"] = w.p_waic;
  return d;
}

py::dict simulate_py(int n_occasions, uint64_t seed, int n_available) {
  jsmix::ScenarioConfig config;
  config.n_occasions = n_occasions;
  config.seed = seed;
  config.n_available = n_available;
  const jsmix::SimResult sim = jsmix::simulate_scenario(config);
  py::dict out;
  out["capture"] = rows_from_grid(sim.data.y);
  out["ids"] = sim.data.ids;
  out["day_offsets"] = sim.truth.grid.occasion_days;
  out["n_super"] = sim.truth.n_super;
  out["n_alive"] = sim.truth.n_t;
  std::vector<int> groups;
  groups.reserve(sim.truth.kept.size());
  for (int idx : sim.truth.kept) groups.push_back(sim.truth.group[idx]);
  out["groups"] = groups;
  out["expected_nsuper"] = jsmix::scenario_expected_nsuper(config);
  return out;
}

py::dict fit_py(const std::vector<std::vector<int>>& capture,
                const std::vector<double>& day_offsets, const std::string& model,
                const std::string& unit, int chains, int iters, int burnin, int thin,
                uint64_t seed, int augment) {
  const jsmix::CaptureData observed = capture_from_python(capture, {});
  const jsmix::TimeGrid grid =
      jsmix::build_time_grid(day_offsets, jsmix::parse_time_unit(unit));
  if (observed.n_occasions() != grid.n_occasions()) {
    throw jsmix::ValidationError("capture matrix and day offsets disagree on T");
  }
  const jsmix::ModelSpec spec = jsmix::ModelSpec::parse(model);
  const jsmix::CaptureData data = jsmix::augment(observed, augment);
  jsmix::McmcConfig config;
  config.n_chains = chains;
  config.n_iters = iters;
  config.burn_in = burnin;
  config.thin = thin;
  config.seed = seed;
  const jsmix::PriorConfig priors;
  const jsmix::DrawStore draws = jsmix::run_fit(data, spec, grid, priors, config);
  const jsmix::FitSummary summary =
      jsmix::summarize_fit(draws, data.n_observed, data.n_rows());

  py::dict out;
  out["names"] = draws.names;
  out["chain"] = draws.chain;
  out["iter"] = draws.iter;
  out["values"] = rows_from_grid(draws.values);
  py::dict params;
  for (const auto& p : summary.params) {
    py::dict row;
    row["mean"] = p.mean;
    row["median"] = p.median;
    row["lower"] = p.lower;
    row["upper"] = p.upper;
    row["rhat"] = p.rhat;
    params[p.name.c_str()] = row;
  }
  out["summary"] = params;
  out["waic"] = waic_dict(summary.waic);
  out["membership"] = rows_from_grid(summary.membership);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "finite-mixture open-population capture-recapture engine";
  m.attr("__version__") = "0.1.0";

  py::register_exception<jsmix::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<jsmix::InvariantError>(m, "InvariantError", PyExc_RuntimeError);

  m.def("simulate", &simulate_py, py::arg("n_occasions") = 10, py::arg("seed") = 1,
        py::arg("n_available") = 500,
        "generate a synthetic three-group study; returns capture histories and truth");

  m.def("fit", &fit_py, py::arg("capture"), py::arg("day_offsets"), py::arg("model") = "rpt",
        py::arg("unit") = "month", py::arg("chains") = 2, py::arg("iters") = 2000,
        py::arg("burnin") = 500, py::arg("thin") = 1, py::arg("seed") = 1,
        py::arg("augment") = 500, "fit a model and return draws plus posterior summaries");

  m.def(
      "expected_nsuper",
      [](int n_occasions, int n_available) {
        jsmix::ScenarioConfig config;
        config.n_occasions = n_occasions;
        config.n_available = n_available;
        return jsmix::scenario_expected_nsuper(config);
      },
      py::arg("n_occasions") = 10, py::arg("n_available") = 500,
      "analytic E[N_super] for the synthetic scenario");

  m.def(
      "waic",
      [](const std::vector<std::vector<double>>& loglik) {
        return waic_dict(jsmix::compute_waic(grid_from_rows(loglik)));
      },
      py::arg("loglik"), "WAIC from a draws x units pointwise log-likelihood matrix");

  m.def(
      "rhat",
      [](const std::vector<std::vector<double>>& chains) { return jsmix::rhat(chains); },
      py::arg("chains"), "split-chain Gelman-Rubin factor");

  m.def(
      "overlap",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return jsmix::overlap_index(a, b);
      },
      py::arg("a"), py::arg("b"), "integral of the pointwise minimum of two Gaussian KDEs");

  m.def(
      "mauc",
      [](const std::vector<std::vector<double>>& membership, const std::vector<int>& labels) {
        return jsmix::mauc(grid_from_rows(membership), labels);
      },
      py::arg("membership"), py::arg("labels"),
      "Hand-Till multi-class AUC from membership probabilities and 0-based labels");

  m.def(
      "map_classify",
      [](const std::vector<std::vector<double>>& membership) {
        return jsmix::map_classify(grid_from_rows(membership));
      },
      py::arg("membership"), "argmax allocation per row, ties to the lowest index");

  m.def(
      "models",
      [] {
        std::vector<std::string> names = {"rpt"};
        for (int k = 1; k <= 10; ++k) names.push_back("m" + std::to_string(k));
        return names;
      },
      "model labels understood by fit()");
}
