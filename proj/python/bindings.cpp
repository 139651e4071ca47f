#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "starlat/compute.hpp"
#include "starlat/harness.hpp"
#include "starlat/optimizer.hpp"
#include "starlat/oracle.hpp"

namespace py = pybind11;
using namespace starlat;

namespace {

py::dict report_dict(const SolveReport& rep) {
  py::dict d;
  d["mode"] = to_string(rep.mode);
  d["scheme"] = to_string(rep.scheme);
  d["status"] = to_string(rep.status);
  d["t"] = rep.t;
  d["trace"] = rep.trace;
  d["num_iters"] = rep.num_iters;
  d["message"] = rep.message;
  d["p"] = rep.state.p;
  d["b"] = rep.state.b;
  d["f_local"] = rep.state.f_local;
  d["f_edge"] = rep.state.f_edge;
  d["gamma_r"] = rep.star.gamma_r;
  d["gamma_t"] = rep.star.gamma_t;
  d["theta_r"] = rep.star.theta_r;
  d["theta_t"] = rep.star.theta_t;
  return d;
}

HarnessConfig config_from(const std::string& text) { return parse_config(nlohmann::json::parse(text)); }

std::pair<ScenarioParams, ChannelRealization> instance(const std::string& config, std::uint64_t seed) {
  const HarnessConfig cfg = config_from(config);
  const ScenarioParams params = place_users(cfg.scenario, seed);
  return {params, gen_channels(params, seed)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Latency optimizer core";

  py::register_exception<Error>(m, "StarlatError", PyExc_RuntimeError);

  m.def("optimal_local_cpu", &optimal_local_cpu, py::arg("e_max"), py::arg("e_comm"), py::arg("workload"),
        py::arg("kappa"), py::arg("f_max"));

  m.def(
      "solve_edge_allocation",
      [](const Vec& prefix, const Vec& load, double capacity) {
        const EdgeAllocation e = solve_edge_allocation(prefix, load, capacity);
        py::dict d;
        d["f_edge"] = e.f_edge;
        d["t"] = e.t;
        d["a1"] = e.duals.a1;
        d["a2"] = e.duals.a2;
        return d;
      },
      py::arg("prefix"), py::arg("load"), py::arg("capacity"));

  m.def(
      "solve",
      [](const std::string& config, const std::string& scheme, std::uint64_t seed) {
        const HarnessConfig cfg = config_from(config);
        py::gil_scoped_release release;
        const SolveReport rep = [&] {
          const ScenarioParams params = place_users(cfg.scenario, seed);
          const ChannelRealization ch = gen_channels(params, seed);
          const SchemeSpec s = parse_scheme(scheme);
          if (s.scheme != Scheme::kProposed) return run_baseline(params, ch, cfg.solver, s.scheme);
          return s.mode == AccessMode::kSdma ? run_sdma(params, ch, cfg.solver) : run_fdma(params, ch, cfg.solver);
        }();
        py::gil_scoped_acquire acquire;
        return report_dict(rep);
      },
      py::arg("config"), py::arg("scheme") = "proposed-sdma", py::arg("seed") = 0,
      "Run one scheme on the scenario of a JSON config string.");

  m.def(
      "brute_force",
      [](const std::string& config, const std::string& mode, std::uint64_t seed) {
        const HarnessConfig cfg = config_from(config);
        const auto [params, ch] = instance(config, seed);
        if (mode != "sdma" && mode != "fdma") throw Error(ErrorCode::kConfig, "mode must be 'sdma' or 'fdma'");
        const OracleResult r =
            brute_force(params, ch, mode == "sdma" ? AccessMode::kSdma : AccessMode::kFdma, cfg.grid);
        py::dict d;
        d["t"] = r.t;
        d["evaluations"] = r.evaluations;
        d["p"] = r.state.p;
        d["gamma_t"] = r.star.gamma_t;
        return d;
      },
      py::arg("config"), py::arg("mode") = "sdma", py::arg("seed") = 0);

  m.def(
      "run_sweep",
      [](const std::string& config, const std::string& out_dir, int workers, std::uint64_t seed_offset) {
        const HarnessConfig cfg = config_from(config);
        RunOptions opts;
        opts.out_dir = out_dir;
        opts.workers = workers > 0 ? workers : default_workers();
        opts.seed_offset = seed_offset;
        std::string summary;
        {
          py::gil_scoped_release release;
          summary = run_sweep(cfg, opts).summary.dump();
        }
        return summary;
      },
      py::arg("config"), py::arg("out_dir"), py::arg("workers") = 0, py::arg("seed_offset") = 0,
      "Run a sweep and return summary.json as a string.");
}
