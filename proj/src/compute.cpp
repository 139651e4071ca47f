#include "starlat/compute.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace starlat {

double optimal_local_cpu(double e_max, double e_comm, double workload, double kappa, double f_max) {
  if (!(workload > 0.0) || !(kappa > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "workload and kappa must be positive");
  }
  const double headroom = e_max - e_comm;
  if (headroom < 0.0 || std::isnan(headroom)) {
    throw Error(ErrorCode::kInfeasibleEnergy, "communication energy exceeds the energy budget");
  }
  return std::min(std::sqrt(headroom / (kappa * workload)), f_max);
}

namespace {

double water_sum(const Vec& prefix, const Vec& load, double t) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < prefix.size(); ++k) s += load[k] / (t - prefix[k]);
  return s;
}

}  // namespace

EdgeAllocation solve_edge_allocation(const Vec& prefix, const Vec& load, double capacity) {
  const Eigen::Index K = prefix.size();
  if (K == 0 || load.size() != K || !(capacity > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "edge allocation needs matching non-empty inputs");
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!std::isfinite(prefix[k]) || !(load[k] > 0.0)) {
      throw Error(ErrorCode::kInvalidParams, "edge allocation needs finite prefixes and positive loads",
                  static_cast<int>(k));
    }
  }
  const double a_max = prefix.maxCoeff();
  double d_hi = load.sum() / capacity;
  while (water_sum(prefix, load, a_max + d_hi) >= capacity) d_hi *= 2.0;
  double d_lo = load.minCoeff() / capacity * 1e-6;
  while (water_sum(prefix, load, a_max + d_lo) <= capacity) d_lo *= 0.5;
  double lo = a_max + d_lo;
  double hi = a_max + d_hi;

  // Bisect until the bracket stops shrinking in floating point.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (water_sum(prefix, load, mid) > capacity ? lo : hi) = mid;
  }
  const double t = hi;

  EdgeAllocation out;
  out.t = t;
  out.f_edge.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) out.f_edge[k] = load[k] / (t - prefix[k]);
  out.f_edge *= capacity / out.f_edge.sum();

  // Stationarity gives a1_k proportional to f_k^2 / l_k; normalize to sum one.
  Vec w(K);
  for (Eigen::Index k = 0; k < K; ++k) w[k] = out.f_edge[k] * out.f_edge[k] / load[k];
  const double total = w.sum();
  out.duals.a1 = w / total;
  out.duals.a2 = 1.0 / total;
  return out;
}

bool KktReport::ok() const {
  return stationarity <= tol && normalization <= tol && latency_slackness <= tol &&
         capacity_slackness <= tol && nonnegativity <= tol;
}

KktReport verify_kkt(const Vec& f_edge, double t, const DualCertificate& duals, const Vec& prefix,
                     const Vec& load, double capacity, double tol) {
  KktReport r;
  r.tol = tol;
  const Eigen::Index K = f_edge.size();
  double neg = std::max(0.0, -duals.a2);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double f = f_edge[k];
    const double a1 = duals.a1[k];
    neg = std::max({neg, -a1, -f / capacity});
    if (f > 0.0 && duals.a2 != 0.0) {
      r.stationarity = std::max(r.stationarity, std::abs(-a1 * load[k] / (f * f) + duals.a2) / std::abs(duals.a2));
    } else {
      r.stationarity = std::max(r.stationarity, 1.0);
    }
    const double latency = f > 0.0 ? prefix[k] + load[k] / f : std::numeric_limits<double>::infinity();
    r.latency_slackness = std::max(r.latency_slackness, std::abs(a1 * (latency - t)) / t);
  }
  r.normalization = std::abs(1.0 - duals.a1.sum());
  r.capacity_slackness = std::abs(f_edge.sum() - capacity) / capacity;
  r.nonnegativity = neg;
  return r;
}

}  // namespace starlat
