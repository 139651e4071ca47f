#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "starlat/optimizer.hpp"
#include "starlat/oracle.hpp"
#include "starlat/scenario.hpp"

namespace starlat {

// A scheme as named in configs and output files.
struct SchemeSpec {
  std::string name;  // proposed-sdma, proposed-fdma, reflect-only, transmit-only, random-phase
  AccessMode mode = AccessMode::kSdma;
  Scheme scheme = Scheme::kProposed;
};

SchemeSpec parse_scheme(const std::string& name);

struct SweepSpec {
  std::string param;  // B, p_max, d, F, N or K (SI units; K is the total user count)
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> schemes;
  bool traces = true;
  // Wall-clock seconds in trace records. Off keeps traces byte-stable and
  // reports per-block Newton steps instead.
  bool trace_timings = false;

  void validate() const;
};

struct HarnessConfig {
  ScenarioParams scenario;
  OptimizerConfig solver;
  SweepSpec sweep;
  bool has_sweep = false;
  GridSpec grid;
};

// Strict parsing: unknown keys and wrong types throw Error(kConfig).
HarnessConfig parse_config(const nlohmann::json& doc);
HarnessConfig load_config(const std::filesystem::path& path);

// Scenario with one swept parameter replaced.
ScenarioParams apply_sweep(const ScenarioParams& base, const std::string& param, double value);

struct CellResult {
  std::string scheme;
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  double t = 0.0;
  int iters = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  double wall_ms = 0.0;
  Vec t_local, t_comm, t_edge, t_total;
  std::string message;
  std::string cell;  // trace file stem
};

struct RunOptions {
  std::filesystem::path out_dir;
  int workers = 1;
  std::uint64_t seed_offset = 0;
};

// STARLAT_WORKERS if set to a positive integer, else 1.
int default_workers();

// One optimizer run for a (scheme, value, seed) cell.
SolveReport solve_cell(const HarnessConfig& cfg, const SchemeSpec& scheme, double value, std::uint64_t seed,
                       ScenarioParams* params_out = nullptr, ChannelRealization* ch_out = nullptr);

// One JSON line per outer iteration.
std::string trace_jsonl(const SolveReport& rep, bool wall_clock);

nlohmann::json summarize(const SweepSpec& sweep, const std::vector<CellResult>& cells);

struct SweepResult {
  std::vector<CellResult> cells;
  nlohmann::json summary;
};

// Runs every (value, seed, scheme) cell and writes results.csv, summary.json
// and traces/<cell>.jsonl under opts.out_dir.
SweepResult run_sweep(const HarnessConfig& cfg, const RunOptions& opts);

// Oracle versus optimizer on the configured (tiny) scenario for each seed.
nlohmann::json oracle_check(const HarnessConfig& cfg);

// {"error": {"code", "message", "user", "block"}}
nlohmann::json error_json(const Error& e);

}  // namespace starlat
