#pragma once

#include <algorithm>
#include <utility>

#include "starlat/common.hpp"
#include "starlat/compute.hpp"

namespace starlat::detail {

// Concave edge-capacity row over edge times tau: 1 - sum_k load_k / (cap tau_k).
// Writes the gradient into jac(row, offset + k). Returns false outside tau > 0.
inline bool edge_split_eval(const Vec& load, double cap, const Vec& tau, double& f, Mat& jac, Eigen::Index row,
                            Eigen::Index offset) {
  f = 1.0;
  for (Eigen::Index k = 0; k < tau.size(); ++k) {
    if (!(tau[k] > 0.0)) return false;
    const double u = load[k] / (cap * tau[k]);
    f -= u;
    jac(row, offset + k) = u / tau[k];
  }
  return true;
}

// Adds w * hess of the row to the diagonal block of h starting at `offset`.
inline void edge_split_hessian(const Vec& load, double cap, const Vec& tau, double w, Mat& h, Eigen::Index offset) {
  for (Eigen::Index k = 0; k < tau.size(); ++k) {
    h(offset + k, offset + k) -= w * 2.0 * load[k] / (cap * tau[k] * tau[k] * tau[k]);
  }
}

// Strictly interior (t, tau) around the water-level split for prefixes c.
inline std::pair<double, Vec> edge_split_start(const Vec& c, const Vec& load, double cap) {
  const EdgeAllocation e = solve_edge_allocation(c, load, cap);
  const Vec tau = 1.01 * load.cwiseQuotient(e.f_edge);
  return {e.t + 0.02 * tau.maxCoeff(), tau};
}

}  // namespace starlat::detail
