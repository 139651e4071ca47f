#pragma once

#include <array>
#include <vector>

#include "detail/barrier.hpp"
#include "starlat/common.hpp"

namespace starlat::detail {

// One linear equality over diagonal entries of the active blocks:
// sum over terms of V_block(n, n) = rhs.
struct DiagEquality {
  struct Term {
    int block;
    int index;
  };
  std::vector<Term> terms;
  double rhs = 0.0;
};

// min  sum_b <C_b, V_b> + c_sc^T x_sc
// s.t. V_b Hermitian PD (active blocks), diagonal equalities,
//      psi_i(q) > 0 with q = (q_1..q_K, x_sc), q_k = h_k^H V_{block(k)} h_k.
// Frozen blocks keep their matrix; their users' q_k stay constant.
struct LiftedProblem {
  int dim = 0;  // matrix side M
  std::array<bool, 2> active{true, true};
  std::array<CMat, 2> frozen;  // used when a block is inactive
  std::vector<CVec> h;         // per-user vectors (already scaled)
  std::vector<int> block_of;   // per-user block
  std::vector<DiagEquality> eq;
  std::array<CMat, 2> cost;  // C_b for active blocks (empty means zero)
  Vec scalar_cost;           // size = number of scalars
  const ConcaveSystem* cons = nullptr;  // over q; may be null when there are no users constraints

  int num_users() const { return static_cast<int>(h.size()); }
  int num_scalars() const { return static_cast<int>(scalar_cost.size()); }
};

struct LiftedPoint {
  std::array<CMat, 2> v;
  Vec scalars;
};

struct LiftedResult {
  LiftedPoint x;
  bool converged = false;
  int newton_steps = 0;
};

Vec lifted_gains(const LiftedProblem& prob, const std::array<CMat, 2>& v);

// Path following from a strictly feasible start.
LiftedResult lifted_minimize(const LiftedProblem& prob, const LiftedPoint& x0, const BarrierOptions& opt);

struct LiftedPhaseOne {
  bool feasible = false;
  LiftedPoint x;
  Vec slack;
  int newton_steps = 0;
};

// Maximizes a common slack on the relaxable constraints of prob.cons, keeping
// V PD and the equalities. The problem's own costs are ignored.
LiftedPhaseOne lifted_find_interior(const LiftedProblem& prob, const LiftedPoint& x0, double margin,
                                    const BarrierOptions& opt);

}  // namespace starlat::detail
