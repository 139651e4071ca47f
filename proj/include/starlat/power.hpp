#pragma once

#include "starlat/common.hpp"
#include "starlat/perf_model.hpp"
#include "starlat/scenario.hpp"

namespace starlat {

// Everything the power (SDMA) or power/bandwidth (FDMA) block sees with the
// STAR coefficients and CPU frequencies held fixed.
struct PowerSubproblemInput {
  Vec gains;     // composite channel gains g_k
  Vec y;         // auxiliary variables (SDMA only)
  Vec prefix;    // A_k = T_l + T_s (s), or T_l alone when edge_load is set
  Vec headroom;  // H_k = E_max - E_l (J)
  Vec payload;   // beta d_k^2 (bits)
  Vec p_max;
  double bandwidth = 0.0;
  double noise_power = 0.0;

  // Non-empty: the edge split is re-optimized inside the block. Each user
  // gets an edge-time variable tau_k with sum_k load_k / tau_k <= capacity,
  // and the block latency is the resulting water level.
  Vec edge_load;
  double edge_capacity = 0.0;

  // Incoming allocation, used as the fallback and for the latency upper bound.
  Vec p_in;
  Vec b_in;  // FDMA only

  double tol = 1e-4;  // relative optimality tolerance on t
};

PowerSubproblemInput make_power_input(const ScenarioParams& params, const Vec& gains,
                                      const AllocationState& state, bool edge_aware = false);

// max_k (A_k + L_k / r_k) with fixed prefixes, or the edge water level in
// edge-aware mode; +inf if some rate is non-positive.
double block_latency(const PowerSubproblemInput& in, const Vec& rates);

struct PowerSolution {
  Vec p;
  Vec b;           // FDMA only
  double t = 0.0;  // block objective (surrogate latency for SDMA)
  bool kept_incoming = false;
  int work = 0;  // Newton steps or bisection evaluations
};

// max_k A_k + L_k / R~_k(p) under the surrogate rates.
double surrogate_latency(const PowerSubproblemInput& in, const Vec& p);
// max_k A_k + L_k / R^F_k(p, b).
double fdma_latency(const PowerSubproblemInput& in, const Vec& p, const Vec& b);

// Minimizes the epigraph t over p in [0, p_max] subject to the surrogate
// latency and energy-rate constraints. Never returns a t above the incoming
// allocation's. Throws kInfeasible (with the user) when no power vector
// satisfies the energy constraints.
PowerSolution solve_power_sdma(const PowerSubproblemInput& in);

// Joint power and bandwidth-fraction block for FDMA. The returned fractions
// always sum to one.
PowerSolution solve_power_bandwidth_fdma(const PowerSubproblemInput& in);

// Smallest bandwidth fraction that lets user k reach latency t together with
// the best feasible power at that fraction; +inf when b = 1 is not enough.
// `p_out` receives that power. Fixed-prefix mode only.
double fdma_min_bandwidth(const PowerSubproblemInput& in, int k, double t, double* p_out = nullptr);

}  // namespace starlat
