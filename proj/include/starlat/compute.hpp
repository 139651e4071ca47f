#pragma once

#include "starlat/common.hpp"

namespace starlat {

// Local CPU frequency that exhausts the remaining energy budget, capped at
// f_max. Throws kInfeasibleEnergy when e_comm already exceeds e_max.
double optimal_local_cpu(double e_max, double e_comm, double workload, double kappa, double f_max);

// Multipliers of the edge-allocation problem: one per latency constraint
// (a1, sums to one) and one for the capacity constraint (a2).
struct DualCertificate {
  Vec a1;
  double a2 = 0.0;
};

struct EdgeAllocation {
  Vec f_edge;
  double t = 0.0;  // common latency (water level)
  DualCertificate duals;
};

// Minimizes max_k (prefix_k + load_k / f_k) subject to sum f_k <= capacity.
// prefix_k = T_l + T_c (s); load_k = beta d_k^2 c_k (cycles).
EdgeAllocation solve_edge_allocation(const Vec& prefix, const Vec& load, double capacity);

// Relative residuals of the KKT system; ok() when all are within tol.
struct KktReport {
  double stationarity = 0.0;       // -a1 l / f^2 + a2 = 0
  double normalization = 0.0;      // sum a1 = 1
  double latency_slackness = 0.0;  // a1_k (prefix + l/f - t) = 0
  double capacity_slackness = 0.0;  // a2 (sum f - F) = 0
  double nonnegativity = 0.0;
  double tol = 1e-6;

  bool ok() const;
};

KktReport verify_kkt(const Vec& f_edge, double t, const DualCertificate& duals, const Vec& prefix,
                     const Vec& load, double capacity, double tol = 1e-6);

}  // namespace starlat
