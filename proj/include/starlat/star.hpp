#pragma once

#include <vector>

#include "starlat/common.hpp"
#include "starlat/perf_model.hpp"
#include "starlat/scenario.hpp"

namespace starlat {

// Lifted form of the STAR coefficients: V_i = v_i v_i^H with v_i = [sqrt(gamma) e^{j theta}; 1].
struct LiftedCoeff {
  CMat v_r, v_t;

  static LiftedCoeff from_config(const StarConfig& star);

  const CMat& get(Side s) const { return s == Side::kReflection ? v_r : v_t; }
  CMat& get(Side s) { return s == Side::kReflection ? v_r : v_t; }
  Vec gamma(Side s) const;  // diagonal without the corner
};

// Per-user gains Tr(V_{i(k)} H_k).
Vec lifted_gains(const LiftedCoeff& v, const ChannelRealization& ch);

// Tr(V) - lambda_max(V) >= 0, zero exactly on rank-one PSD matrices.
double rank_residual(const CMat& v);

struct Linearization {
  CVec u;                   // unit top eigenvector
  double lambda_max = 0.0;  // at the expansion point
  CMat v_prev;
  bool degenerate = false;  // top two eigenvalues within 1e-12

  // lambda_max(V_prev) + u^H (V - V_prev) u
  double operator()(const CMat& v) const;
};

Linearization linearize_lambda_max(const CMat& v_prev);

// Which lifted blocks the STAR block may change.
enum class StarFreedom {
  kBoth,            // coupled amplitudes, gamma_r + gamma_t = 1
  kReflectionOnly,  // V_t frozen, diag(V_r) pinned
  kTransmissionOnly,
};

// The coefficient subproblem with power, bandwidth and CPU blocks held fixed.
struct StarSubproblem {
  AccessMode mode = AccessMode::kSdma;
  const ChannelRealization* ch = nullptr;
  Vec p, y, b;
  Vec prefix;    // A_k = T_l + T_s, or T_l alone when edge_load is set
  Vec headroom;  // E_max - E_l
  Vec payload;   // beta d_k^2
  double bandwidth = 0.0;
  double noise_power = 0.0;
  // Non-empty: the edge split is re-optimized inside the block and the block
  // latency is the edge water level.
  Vec edge_load;
  double edge_capacity = 0.0;
  // False drops the latency and energy constraints (vacuous thresholds); the
  // iterate then minimizes the rank penalty alone.
  bool rate_constraints = true;
  StarFreedom freedom = StarFreedom::kBoth;
  double gap_tol = 1e-7;  // relative barrier gap
};

StarSubproblem make_star_subproblem(const ScenarioParams& params, const ChannelRealization& ch,
                                    const AllocationState& state, StarFreedom freedom = StarFreedom::kBoth,
                                    bool edge_aware = false);

// Block latency max_k A_k + L_k / R_k(g) for the given gains (or the edge
// water level in edge-aware mode), using the surrogate (SDMA) or FDMA rate.
// +inf if some rate is non-positive.
double star_latency(const StarSubproblem& sp, const Vec& gains);
// Largest relative violation of the energy-rate constraints for the given gains.
double star_energy_violation(const StarSubproblem& sp, const Vec& gains);

// t(V) + nu * sum_i (Tr V_i - lambda_max(V_i)) over the free blocks.
double penalized_objective(const StarSubproblem& sp, const LiftedCoeff& v, double nu);

struct IterateResult {
  LiftedCoeff v;
  double t = 0.0;  // block latency at v
  int newton_steps = 0;
};

// One penalized convex iterate: minimizes t + nu * sum_i <I - u_i u_i^H, V_i>
// with u_i from linearizing at v_prev. Throws kInfeasible when the rate
// constraints cannot hold for any coefficient pair.
IterateResult solve_penalized_iterate(const StarSubproblem& sp, const LiftedCoeff& v_prev, double nu);

struct PenaltyConfig {
  double nu0 = 1e-5;
  double growth = 10.0;
  double cap_factor = 1e6;
  double rel_tol = 1e-4;
  int max_iters = 30;
  double rank_tol = 1e-4;  // Tr - lambda_max <= rank_tol * Tr
};

struct PenaltyTraceEntry {
  int j = 0;
  double nu = 0.0;
  double objective = 0.0;
  double t = 0.0;
  double residual_r = 0.0;
  double residual_t = 0.0;
  bool degenerate = false;
};

struct PenaltyState {
  int j = 0;  // total penalized iterates solved
  double nu = 0.0;
  double residual_r = 0.0;
  double residual_t = 0.0;
  std::vector<PenaltyTraceEntry> trace;
  int newton_steps = 0;
  int escalations = 0;
};

class PenaltyStallError : public Error {
 public:
  PenaltyStallError(const std::string& what, PenaltyState state)
      : Error(ErrorCode::kPenaltyStall, what, -1, "star"), state_(std::move(state)) {}
  const PenaltyState& state() const { return state_; }

 private:
  PenaltyState state_;
};

struct Algorithm1Result {
  LiftedCoeff v;
  PenaltyState state;
};

// Penalty method: repeated linearize/solve until the relative objective change
// drops below rel_tol or max_iters, escalating nu while the rank residual of a
// free block exceeds rank_tol * Tr.
Algorithm1Result run_algorithm1(const StarSubproblem& sp, const LiftedCoeff& init, const PenaltyConfig& cfg = {});

// Reads amplitudes and phases off the top eigenvectors and projects the
// amplitudes onto gamma_r + gamma_t = 1. Throws kRankTooHigh when a residual
// exceeds rank_tol * Tr.
StarConfig extract_rank_one(const LiftedCoeff& v, double rank_tol = 1e-4);

}  // namespace starlat
