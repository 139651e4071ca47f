#include "starlat/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "detail/barrier.hpp"
#include "detail/edge_split.hpp"
#include "starlat/compute.hpp"

namespace starlat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_input(const PowerSubproblemInput& in, bool fdma) {
  const Eigen::Index K = in.gains.size();
  bool ok = K > 0 && in.prefix.size() == K && in.headroom.size() == K && in.payload.size() == K &&
            in.p_max.size() == K && in.p_in.size() == K && in.bandwidth > 0.0 && in.noise_power > 0.0;
  if (fdma) {
    ok = ok && in.b_in.size() == K;
  } else {
    ok = ok && in.y.size() == K;
  }
  if (in.edge_load.size() != 0) {
    ok = ok && in.edge_load.size() == K && in.edge_capacity > 0.0 && (in.edge_load.array() > 0.0).all();
  }
  if (!ok) throw Error(ErrorCode::kInvalidParams, "power subproblem input sizes are inconsistent");
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(in.headroom[k] > 0.0)) {
      throw Error(ErrorCode::kInfeasible, "no energy left for transmission", static_cast<int>(k), "power");
    }
  }
}

}  // namespace

PowerSubproblemInput make_power_input(const ScenarioParams& params, const Vec& gains,
                                      const AllocationState& state, bool edge_aware) {
  const int K = params.num_users();
  PowerSubproblemInput in;
  in.gains = gains;
  in.y = state.y;
  in.prefix.resize(K);
  in.headroom.resize(K);
  in.payload.resize(K);
  in.p_max.resize(K);
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    const double fl = state.f_local[k];
    in.prefix[k] = u.workload / fl + (edge_aware ? 0.0 : params.edge_load(k) / state.f_edge[k]);
    in.headroom[k] = u.e_max - params.kappa * fl * fl * u.workload;
    in.payload[k] = params.payload_bits(k);
    in.p_max[k] = u.p_max;
  }
  in.bandwidth = params.bandwidth;
  in.noise_power = params.noise_power();
  if (edge_aware) {
    in.edge_load.resize(K);
    for (int k = 0; k < K; ++k) in.edge_load[k] = params.edge_load(k);
    in.edge_capacity = params.bs_cpu;
  }
  in.p_in = state.p;
  in.b_in = state.b;
  return in;
}

double block_latency(const PowerSubproblemInput& in, const Vec& rates) {
  const Eigen::Index K = rates.size();
  Vec c(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(rates[k] > 0.0)) return kInf;
    c[k] = in.prefix[k] + in.payload[k] / rates[k];
  }
  if (in.edge_load.size() == 0) return c.maxCoeff();
  return solve_edge_allocation(c, in.edge_load, in.edge_capacity).t;
}

double surrogate_latency(const PowerSubproblemInput& in, const Vec& p) {
  return block_latency(in, surrogate_rate(p, in.gains, in.y, in.bandwidth, in.noise_power));
}

double fdma_latency(const PowerSubproblemInput& in, const Vec& p, const Vec& b) {
  return block_latency(in, fdma_rate(p, b, in.gains, in.bandwidth, in.noise_power));
}

namespace {

// Variables (p_1..p_K, t), plus tau_1..tau_K in edge-aware mode. Constraint
// layout, K users:
//   [0, K)    R~_k / L_k - 1 / (t - A_k - tau_k)   latency (tau_k = 0 when fixed)
//   [K, 2K)   R~_k / L_k - p_k / H_k               energy
//   [2K, 3K)  p_k / p_max,k
//   [3K, 4K)  1 - p_k / p_max,k
//   4K        edge capacity (edge-aware only)
//   last      (t_cap - t) / t_cap
class SdmaPowerSystem final : public detail::ConcaveSystem {
 public:
  SdmaPowerSystem(const PowerSubproblemInput& in, double t_cap)
      : in_(in), K_(static_cast<int>(in.gains.size())), joint_(in.edge_load.size() != 0), t_cap_(t_cap),
        c_(in.bandwidth / std::numbers::ln2) {}

  int dim() const override { return K_ + 1 + (joint_ ? K_ : 0); }
  int num_constraints() const override { return 4 * K_ + 1 + (joint_ ? 1 : 0); }
  bool relaxable(int i) const override { return i < num_constraints() - 1; }

  bool eval(const Vec& x, Vec& f, Mat& jac) const override {
    const double t = x[K_];
    const Vec p = x.head(K_);
    const int m = num_constraints();
    f.resize(m);
    jac.setZero(m, dim());
    Vec gap(K_);
    for (int k = 0; k < K_; ++k) {
      gap[k] = t - in_.prefix[k] - (joint_ ? x[K_ + 1 + k] : 0.0);
      if (!(gap[k] > 0.0)) return false;
    }
    if (joint_ && !detail::edge_split_eval(in_.edge_load, in_.edge_capacity, x.tail(K_), f[4 * K_], jac, 4 * K_,
                                           K_ + 1)) {
      return false;
    }
    const Vec rx = p.cwiseProduct(in_.gains);
    const double S = rx.sum() + in_.noise_power;
    if (!(S > 0.0)) return false;
    const double logS = std::log(S);
    for (int k = 0; k < K_; ++k) {
      const double yk = in_.y[k];
      const double L = in_.payload[k];
      const double rate = c_ * (logS - yk * (S - rx[k]) + std::log(yk) + 1.0);
      f[k] = rate / L - 1.0 / gap[k];
      f[K_ + k] = rate / L - p[k] / in_.headroom[k];
      for (int j = 0; j < K_; ++j) {
        double d = c_ * in_.gains[j] * (1.0 / S - yk) / L;
        if (j == k) d += c_ * yk * in_.gains[k] / L;
        jac(k, j) = d;
        jac(K_ + k, j) = d;
      }
      jac(k, K_) = 1.0 / (gap[k] * gap[k]);
      if (joint_) jac(k, K_ + 1 + k) = -jac(k, K_);
      jac(K_ + k, k) -= 1.0 / in_.headroom[k];
      f[2 * K_ + k] = p[k] / in_.p_max[k];
      jac(2 * K_ + k, k) = 1.0 / in_.p_max[k];
      f[3 * K_ + k] = 1.0 - p[k] / in_.p_max[k];
      jac(3 * K_ + k, k) = -1.0 / in_.p_max[k];
    }
    f[m - 1] = (t_cap_ - t) / t_cap_;
    jac(m - 1, K_) = -1.0 / t_cap_;
    return true;
  }

  void add_hessian(const Vec& x, const Vec& w, Mat& h) const override {
    const double t = x[K_];
    const double S = x.head(K_).dot(in_.gains) + in_.noise_power;
    double scale = 0.0;
    for (int k = 0; k < K_; ++k) {
      scale += (w[k] + w[K_ + k]) / in_.payload[k];
      const double gap = t - in_.prefix[k] - (joint_ ? x[K_ + 1 + k] : 0.0);
      const double d = w[k] * (-2.0 / (gap * gap * gap));
      h(K_, K_) += d;
      if (joint_) {
        const int j = K_ + 1 + k;
        h(j, j) += d;
        h(K_, j) -= d;
        h(j, K_) -= d;
      }
    }
    h.topLeftCorner(K_, K_).noalias() -= (c_ * scale / (S * S)) * in_.gains * in_.gains.transpose();
    if (joint_) detail::edge_split_hessian(in_.edge_load, in_.edge_capacity, x.tail(K_), w[4 * K_], h, K_ + 1);
  }

 private:
  const PowerSubproblemInput& in_;
  int K_;
  bool joint_;
  double t_cap_;
  double c_;
};

// Edge-aware start: water-level split at the given rates, or an equal split
// when some rate is not positive yet.
std::pair<double, Vec> edge_split_start(const PowerSubproblemInput& in, const Vec& rates) {
  const Eigen::Index K = rates.size();
  if ((rates.array() > 0.0).all()) {
    const Vec c = in.prefix + in.payload.cwiseQuotient(rates);
    return detail::edge_split_start(c, in.edge_load, in.edge_capacity);
  }
  const Vec tau = (1.01 * K / in.edge_capacity) * in.edge_load;
  return {(in.prefix + tau).maxCoeff() + 1.0, tau};
}

bool sdma_energy_ok(const PowerSubproblemInput& in, const Vec& p) {
  const Vec r = surrogate_rate(p, in.gains, in.y, in.bandwidth, in.noise_power);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (r[k] * in.headroom[k] < in.payload[k] * p[k] * (1 - 1e-9)) return false;
  }
  return true;
}

}  // namespace

PowerSolution solve_power_sdma(const PowerSubproblemInput& in) {
  check_input(in, false);
  const int K = static_cast<int>(in.gains.size());
  const double t_in = surrogate_latency(in, in.p_in);
  const double a_max = in.prefix.maxCoeff();
  const double t_ref = std::isfinite(t_in) ? t_in : a_max + 10.0;
  const bool joint = in.edge_load.size() != 0;

  Vec x0(joint ? 2 * K + 1 : K + 1);
  for (int k = 0; k < K; ++k) x0[k] = std::clamp(in.p_in[k], 0.05 * in.p_max[k], 0.95 * in.p_max[k]);
  double t_cap = 2.0 * std::max(t_ref, a_max + 1e-9);
  if (joint) {
    const auto [z, tau] = edge_split_start(in, surrogate_rate(x0.head(K), in.gains, in.y, in.bandwidth, in.noise_power));
    x0[K] = z;
    x0.tail(K) = tau;
    t_cap = 2.0 * std::max(t_ref, z);
  } else {
    x0[K] = 0.75 * t_cap;
  }

  SdmaPowerSystem sys(in, t_cap);
  detail::BarrierOptions opt;

  PowerSolution out;
  const detail::PhaseOneResult start = detail::find_interior(sys, x0, 1e-6, opt);
  out.work += start.newton_steps;
  if (!start.feasible) {
    // Name the user whose energy-rate constraint is hardest to meet.
    int worst = 0;
    for (int k = 1; k < K; ++k) {
      if (start.slack[K + k] < start.slack[K + worst]) worst = k;
    }
    if (std::isfinite(t_in)) {
      // The incoming point may sit on the boundary with an empty interior
      // nearby; keep it when it is itself feasible.
      if (sdma_energy_ok(in, in.p_in)) {
        out.p = in.p_in;
        out.t = t_in;
        out.kept_incoming = true;
        return out;
      }
    }
    throw Error(ErrorCode::kInfeasible, "energy-rate constraint cannot be met at any power", worst, "power");
  }

  Vec c = Vec::Zero(sys.dim());
  c[K] = 1.0;
  opt.tau0 = sys.num_constraints() / (0.1 * start.x[K]);
  opt.gap_tol = 1e-3 * in.tol * std::min(t_ref, start.x[K]);
  const detail::BarrierResult res = detail::minimize_linear(sys, c, start.x, opt);
  out.work += res.newton_steps;

  const Vec p = res.x.head(K).cwiseMax(0.0).cwiseMin(in.p_max);
  const double t = surrogate_latency(in, p);
  if (!(t <= t_in) && sdma_energy_ok(in, in.p_in)) {
    out.p = in.p_in;
    out.t = t_in;
    out.kept_incoming = true;
    return out;
  }
  out.p = p;
  out.t = t;
  return out;
}

namespace {

double fdma_single_rate(const PowerSubproblemInput& in, int k, double b, double p) {
  if (b <= 0.0 || p <= 0.0) return 0.0;
  const double nb = b * in.noise_power;
  return b * in.bandwidth * std::log1p(p * in.gains[k] / nb) / std::numbers::ln2;
}

// Largest power in [0, p_max] meeting R(b, p) >= e p; zero when only p = 0 does.
double best_power(const PowerSubproblemInput& in, int k, double b, int* work) {
  const double e = in.payload[k] / in.headroom[k];
  const double pm = in.p_max[k];
  // dR/dp at p = 0 does not depend on b.
  const double slope0 = in.gains[k] * in.bandwidth / (in.noise_power * std::numbers::ln2);
  if (!(slope0 > e)) return 0.0;
  if (fdma_single_rate(in, k, b, pm) >= e * pm) return pm;
  double lo = 0.0, hi = pm;
  while (hi - lo > 1e-15 * pm) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    ++*work;
    (fdma_single_rate(in, k, b, mid) >= e * mid ? lo : hi) = mid;
  }
  return lo;
}

double min_bandwidth(const PowerSubproblemInput& in, int k, double t, double* p_out, int* work) {
  const double gap = t - in.prefix[k];
  if (!(gap > 0.0)) return kInf;
  const double need = in.payload[k] / gap;
  auto rate_at = [&](double b) { return fdma_single_rate(in, k, b, best_power(in, k, b, work)); };
  if (rate_at(1.0) < need) return kInf;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (rate_at(mid) >= need ? hi : lo) = mid;
  }
  if (p_out) *p_out = best_power(in, k, hi, work);
  return hi;
}

}  // namespace

double fdma_min_bandwidth(const PowerSubproblemInput& in, int k, double t, double* p_out) {
  check_input(in, true);
  if (in.edge_load.size() != 0) throw Error(ErrorCode::kInvalidParams, "fdma_min_bandwidth needs fixed prefixes");
  int work = 0;
  return min_bandwidth(in, k, t, p_out, &work);
}

namespace {

// Edge-aware FDMA block. Variables (p_1..p_K, b_1..b_K, t, tau_1..tau_K) with
// the jointly concave rate R_k = c b_k log(1 + a_k p_k / b_k). Layout:
//   [0, K)    R_k / L_k - 1 / (t - A_k - tau_k)
//   [K, 2K)   R_k / L_k - p_k / H_k
//   [2K, 3K)  p_k / p_max,k
//   [3K, 4K)  1 - p_k / p_max,k
//   [4K, 5K)  K b_k
//   5K        1 - sum b
//   5K + 1    edge capacity
//   5K + 2    (t_cap - t) / t_cap
class FdmaJointSystem final : public detail::ConcaveSystem {
 public:
  FdmaJointSystem(const PowerSubproblemInput& in, double t_cap)
      : in_(in), K_(static_cast<int>(in.gains.size())), t_cap_(t_cap), c_(in.bandwidth / std::numbers::ln2) {}

  int dim() const override { return 3 * K_ + 1; }
  int num_constraints() const override { return 5 * K_ + 3; }
  bool relaxable(int i) const override { return i < 5 * K_ + 2; }

  bool eval(const Vec& x, Vec& f, Mat& jac) const override {
    const int T = 2 * K_;
    const double t = x[T];
    f.resize(num_constraints());
    jac.setZero(num_constraints(), dim());
    if (!detail::edge_split_eval(in_.edge_load, in_.edge_capacity, x.tail(K_), f[5 * K_ + 1], jac,
                                 5 * K_ + 1, 2 * K_ + 1)) {
      return false;
    }
    double bsum = 0.0;
    for (int k = 0; k < K_; ++k) {
      const double p = x[k], b = x[K_ + k];
      const double gap = t - in_.prefix[k] - x[T + 1 + k];
      if (!(b > 0.0) || !(gap > 0.0)) return false;
      const double a = in_.gains[k] / in_.noise_power;
      const double den = 1.0 + a * p / b;
      if (!(den > 0.0)) return false;
      const double L = in_.payload[k];
      const double rate = c_ * b * std::log(den);
      const double rp = c_ * a / den / L;
      const double rb = c_ * (std::log(den) - (a * p / b) / den) / L;
      f[k] = rate / L - 1.0 / gap;
      jac(k, k) = rp;
      jac(k, K_ + k) = rb;
      jac(k, T) = 1.0 / (gap * gap);
      jac(k, T + 1 + k) = -1.0 / (gap * gap);
      f[K_ + k] = rate / L - p / in_.headroom[k];
      jac(K_ + k, k) = rp - 1.0 / in_.headroom[k];
      jac(K_ + k, K_ + k) = rb;
      f[2 * K_ + k] = p / in_.p_max[k];
      jac(2 * K_ + k, k) = 1.0 / in_.p_max[k];
      f[3 * K_ + k] = 1.0 - p / in_.p_max[k];
      jac(3 * K_ + k, k) = -1.0 / in_.p_max[k];
      f[4 * K_ + k] = K_ * b;
      jac(4 * K_ + k, K_ + k) = K_;
      jac(5 * K_, K_ + k) = -1.0;
      bsum += b;
    }
    f[5 * K_] = 1.0 - bsum;
    f[5 * K_ + 2] = (t_cap_ - t) / t_cap_;
    jac(5 * K_ + 2, T) = -1.0 / t_cap_;
    return true;
  }

  void add_hessian(const Vec& x, const Vec& w, Mat& h) const override {
    const int T = 2 * K_;
    const double t = x[T];
    for (int k = 0; k < K_; ++k) {
      const double p = x[k], b = x[K_ + k];
      const double a = in_.gains[k] / in_.noise_power;
      const double r = p / b;
      const double den = 1.0 + a * r;
      const double s = (w[k] + w[K_ + k]) / in_.payload[k] * c_ * (-a * a / (den * den)) / b;
      h(k, k) += s;
      h(k, K_ + k) -= s * r;
      h(K_ + k, k) -= s * r;
      h(K_ + k, K_ + k) += s * r * r;
      const double gap = t - in_.prefix[k] - x[T + 1 + k];
      const double d = w[k] * (-2.0 / (gap * gap * gap));
      const int j = T + 1 + k;
      h(T, T) += d;
      h(j, j) += d;
      h(T, j) -= d;
      h(j, T) -= d;
    }
    detail::edge_split_hessian(in_.edge_load, in_.edge_capacity, x.tail(K_), w[5 * K_ + 1], h, T + 1);
  }

 private:
  const PowerSubproblemInput& in_;
  int K_;
  double t_cap_;
  double c_;
};

PowerSolution solve_fdma_joint(const PowerSubproblemInput& in, double t_in, bool in_ok) {
  const int K = static_cast<int>(in.gains.size());
  const double t_ref = std::isfinite(t_in) ? t_in : in.prefix.maxCoeff() + 10.0;
  Vec x0(3 * K + 1);
  const Vec b_in = in.b_in.sum() > 0.0 ? Vec(in.b_in / in.b_in.sum()) : Vec::Constant(K, 1.0 / K);
  for (int k = 0; k < K; ++k) {
    x0[k] = std::clamp(in.p_in[k], 0.05 * in.p_max[k], 0.95 * in.p_max[k]);
    x0[K + k] = (1.0 - 1e-3) * (0.9 * b_in[k] + 0.1 / K);
  }
  const auto [z, tau] =
      edge_split_start(in, fdma_rate(x0.head(K), x0.segment(K, K), in.gains, in.bandwidth, in.noise_power));
  x0[2 * K] = z;
  x0.tail(K) = tau;

  FdmaJointSystem sys(in, 2.0 * std::max(t_ref, z));
  detail::BarrierOptions opt;
  PowerSolution out;
  const detail::PhaseOneResult start = detail::find_interior(sys, x0, 1e-6, opt);
  out.work += start.newton_steps;
  if (!start.feasible) {
    if (in_ok) {
      out.p = in.p_in;
      out.b = in.b_in;
      out.t = t_in;
      out.kept_incoming = true;
      return out;
    }
    int worst = 0;
    for (int k = 1; k < K; ++k) {
      if (start.slack[K + k] < start.slack[K + worst]) worst = k;
    }
    throw Error(ErrorCode::kInfeasible, "energy-rate constraint cannot be met at any power and bandwidth", worst,
                "power");
  }

  Vec c = Vec::Zero(3 * K + 1);
  c[2 * K] = 1.0;
  opt.tau0 = sys.num_constraints() / (0.1 * start.x[2 * K]);
  opt.gap_tol = 1e-3 * in.tol * std::min(t_ref, start.x[2 * K]);
  const detail::BarrierResult res = detail::minimize_linear(sys, c, start.x, opt);
  out.work += res.newton_steps;

  const Vec p = res.x.head(K).cwiseMax(0.0).cwiseMin(in.p_max);
  Vec b = res.x.segment(K, K).cwiseMax(0.0);
  // Rates only grow with b, so the leftover band is handed out in proportion.
  b /= b.sum();
  const double t = fdma_latency(in, p, b);
  if (in_ok && !(t <= t_in)) {
    out.p = in.p_in;
    out.b = in.b_in;
    out.t = t_in;
    out.kept_incoming = true;
    return out;
  }
  out.p = p;
  out.b = b;
  out.t = t;
  return out;
}

}  // namespace

PowerSolution solve_power_bandwidth_fdma(const PowerSubproblemInput& in) {
  check_input(in, true);
  const int K = static_cast<int>(in.gains.size());
  PowerSolution out;
  int work = 0;

  auto demand = [&](double t) {
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      total += min_bandwidth(in, k, t, nullptr, &work);
      if (!std::isfinite(total)) break;
    }
    return total;
  };

  const double t_in = fdma_latency(in, in.p_in, in.b_in);
  const double a_max = in.prefix.maxCoeff();
  bool in_ok = std::isfinite(t_in) && in.b_in.sum() <= 1.0 + 1e-12;
  if (in_ok) {
    const Vec r = fdma_rate(in.p_in, in.b_in, in.gains, in.bandwidth, in.noise_power);
    for (int k = 0; k < K; ++k) in_ok = in_ok && r[k] * in.headroom[k] >= in.payload[k] * in.p_in[k] * (1 - 1e-9);
  }

  if (in.edge_load.size() != 0) return solve_fdma_joint(in, t_in, in_ok);

  double hi = std::isfinite(t_in) ? t_in : a_max + 1.0;
  while (demand(hi) > 1.0 && hi < a_max + 1e6) hi = a_max + 2.0 * (hi - a_max);
  if (demand(hi) > 1.0) {
    int worst = 0;
    double worst_b = -1.0;
    for (int k = 0; k < K; ++k) {
      const double b = min_bandwidth(in, k, hi, nullptr, &work);
      if (b > worst_b) {
        worst_b = b;
        worst = k;
      }
    }
    throw Error(ErrorCode::kInfeasible, "bandwidth demand exceeds the band at every latency", worst, "power");
  }

  double lo = a_max;
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (demand(mid) <= 1.0 ? hi : lo) = mid;
  }

  Vec b(K);
  for (int k = 0; k < K; ++k) b[k] = min_bandwidth(in, k, hi, nullptr, &work);
  // Hand out the leftover band in proportion; rates only grow with b.
  b *= 1.0 / b.sum();
  Vec p(K);
  for (int k = 0; k < K; ++k) p[k] = best_power(in, k, b[k], &work);

  const double t = fdma_latency(in, p, b);
  out.work = work;
  if (in_ok && !(t <= t_in)) {
    out.p = in.p_in;
    out.b = in.b_in;
    out.t = t_in;
    out.kept_incoming = true;
    return out;
  }
  out.p = p;
  out.b = b;
  out.t = t;
  return out;
}

}  // namespace starlat
