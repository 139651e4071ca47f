#pragma once

#include "starlat/common.hpp"
#include "starlat/perf_model.hpp"
#include "starlat/scenario.hpp"

namespace starlat {

struct GridSpec {
  int phase_points = 64;      // over [0, 2pi)
  int amplitude_points = 11;  // gamma_t over [0, 1]
  int power_points = 21;      // over [0, p_max]
  int bandwidth_points = 21;  // b_1 over [0, 1] (FDMA, K = 2)
  double max_evaluations = 1e8;

  void validate() const;
};

struct OracleResult {
  StarConfig star;
  AllocationState state;
  double t = 0.0;  // +inf when no grid point is feasible
  double evaluations = 0.0;
};

// Exhaustive reference for tiny instances. Amplitudes, phases, powers and
// bandwidth fractions are gridded; local CPU and edge allocation are solved in
// closed form at every point. Per amplitude vector only the phase choices with
// Pareto-maximal gains are kept, since a larger gain never hurts. Throws
// kBudgetExceeded when the grid exceeds max_evaluations.
OracleResult brute_force(const ScenarioParams& params, const ChannelRealization& ch, AccessMode mode,
                         const GridSpec& grid = {});

}  // namespace starlat
