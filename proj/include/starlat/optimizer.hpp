#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "starlat/common.hpp"
#include "starlat/perf_model.hpp"
#include "starlat/scenario.hpp"
#include "starlat/star.hpp"

namespace starlat {

enum class SolveStatus { kConverged, kMaxIters, kInfeasible };
const char* to_string(SolveStatus status);

enum class Scheme { kProposed, kReflectOnly, kTransmitOnly, kRandomPhase };
const char* to_string(Scheme scheme);

struct OptimizerConfig {
  double rel_tol = 1e-4;
  int max_iters = 50;
  PenaltyConfig penalty;
  std::uint64_t phase_seed = 0;  // mixed with the channel seed for RandomPhase
  // Power and STAR blocks re-optimize the edge split internally. Off gives
  // the plain block order with the edge frequencies held fixed.
  bool edge_aware = true;
};

// Deterministic effort counters (wall time is kept separately).
struct WorkCounters {
  long power = 0;         // Newton steps / bisection evaluations in the power block
  long star_newton = 0;   // Newton steps inside the penalty method
  long star_iterates = 0;  // penalized iterates solved
  long escalations = 0;
  long penalty_stalls = 0;
  long star_rejected = 0;  // STAR candidates that lost to the incoming coefficients
};

struct BlockTimings {
  double power = 0.0, star = 0.0, cpu = 0.0, edge = 0.0, aux = 0.0;  // seconds
};

struct IterationRecord {
  int n = 0;
  double t = 0.0;  // true max latency after the iteration
  double t_power = 0.0;  // after the power block (true rates)
  double t_star = 0.0;   // after the STAR block, CPU and edge re-solved
  double residual_r = 0.0;
  double residual_t = 0.0;
  double nu = 0.0;
  int star_iterates = 0;
  bool star_accepted = false;
  long work = 0;  // cumulative power + STAR effort
  long power_work = 0;  // this iteration only
  long star_work = 0;
  BlockTimings timings;  // this iteration only
};

struct SolveReport {
  AccessMode mode = AccessMode::kSdma;
  Scheme scheme = Scheme::kProposed;
  AllocationState state;
  StarConfig star;
  double t = 0.0;                  // final true max latency
  std::vector<double> trace;       // t^(0), t^(1), ...
  std::vector<IterationRecord> iterations;
  int num_iters = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  std::string message;
  int infeasible_user = -1;
  std::string infeasible_block;
  WorkCounters work;
  BlockTimings timings;
};

// Alternating optimization: power, STAR coefficients, local CPU, edge CPU,
// auxiliary update, until the relative change of t drops below rel_tol.
SolveReport run_sdma(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg = {});
// Same loop with FDMA rates and the joint power/bandwidth block; no auxiliary.
SolveReport run_fdma(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg = {});
// Benchmarks under SDMA. ReflectOnly/TransmitOnly optimize phases of one side
// only; RandomPhase fixes the whole coefficient set.
SolveReport run_baseline(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg,
                         Scheme scheme);

// Coefficients a scheme starts from (RandomPhase draws its phases here).
StarConfig initial_star(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg,
                        Scheme scheme);

}  // namespace starlat
