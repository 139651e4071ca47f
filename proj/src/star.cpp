#include "starlat/star.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <tuple>

#include "detail/edge_split.hpp"
#include "detail/lifted_ipm.hpp"

namespace starlat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int block_index(Side s) { return s == Side::kReflection ? 0 : 1; }

bool is_free(StarFreedom f, int block) {
  switch (f) {
    case StarFreedom::kBoth: return true;
    case StarFreedom::kReflectionOnly: return block == 0;
    case StarFreedom::kTransmissionOnly: return block == 1;
  }
  return true;
}

Vec sp_rates(const StarSubproblem& sp, const Vec& g) {
  if (sp.mode == AccessMode::kFdma) return fdma_rate(sp.p, sp.b, g, sp.bandwidth, sp.noise_power);
  return surrogate_rate(sp.p, g, sp.y, sp.bandwidth, sp.noise_power);
}

}  // namespace

LiftedCoeff LiftedCoeff::from_config(const StarConfig& star) {
  return {star.lifted_matrix(Side::kReflection), star.lifted_matrix(Side::kTransmission)};
}

Vec LiftedCoeff::gamma(Side s) const {
  const CMat& v = get(s);
  return v.diagonal().head(v.rows() - 1).real();
}

Vec lifted_gains(const LiftedCoeff& v, const ChannelRealization& ch) {
  Vec g(ch.num_users);
  for (int k = 0; k < ch.num_users; ++k) {
    const CVec col = ch.cascade[k].conjugate();
    g[k] = col.dot(v.get(ch.side[k]) * col).real();
  }
  return g;
}

double rank_residual(const CMat& v) {
  Eigen::SelfAdjointEigenSolver<CMat> es(v, Eigen::EigenvaluesOnly);
  return v.trace().real() - es.eigenvalues()[v.rows() - 1];
}

double Linearization::operator()(const CMat& v) const {
  return lambda_max + u.dot((v - v_prev) * u).real();
}

Linearization linearize_lambda_max(const CMat& v_prev) {
  Eigen::SelfAdjointEigenSolver<CMat> es(v_prev);
  const Eigen::Index M = v_prev.rows();
  Linearization lin;
  lin.v_prev = v_prev;
  lin.lambda_max = es.eigenvalues()[M - 1];
  lin.degenerate = M > 1 && lin.lambda_max - es.eigenvalues()[M - 2] <= 1e-12;
  lin.u = es.eigenvectors().col(M - 1);
  // Fix the free phase: first largest-magnitude entry real positive.
  Eigen::Index at = 0;
  for (Eigen::Index n = 1; n < M; ++n) {
    if (std::abs(lin.u[n]) > std::abs(lin.u[at]) * (1.0 + 1e-12)) at = n;
  }
  if (std::abs(lin.u[at]) > 0.0) lin.u *= std::conj(lin.u[at]) / std::abs(lin.u[at]);
  return lin;
}

StarSubproblem make_star_subproblem(const ScenarioParams& params, const ChannelRealization& ch,
                                    const AllocationState& state, StarFreedom freedom, bool edge_aware) {
  const int K = params.num_users();
  StarSubproblem sp;
  sp.mode = state.mode;
  sp.ch = &ch;
  sp.p = state.p;
  sp.y = state.y;
  sp.b = state.b;
  sp.prefix.resize(K);
  sp.headroom.resize(K);
  sp.payload.resize(K);
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    const double fl = state.f_local[k];
    sp.prefix[k] = u.workload / fl + (edge_aware ? 0.0 : params.edge_load(k) / state.f_edge[k]);
    sp.headroom[k] = u.e_max - params.kappa * fl * fl * u.workload;
    sp.payload[k] = params.payload_bits(k);
  }
  sp.bandwidth = params.bandwidth;
  sp.noise_power = params.noise_power();
  sp.freedom = freedom;
  if (edge_aware) {
    sp.edge_load.resize(K);
    for (int k = 0; k < K; ++k) sp.edge_load[k] = params.edge_load(k);
    sp.edge_capacity = params.bs_cpu;
  }
  return sp;
}

double star_latency(const StarSubproblem& sp, const Vec& gains) {
  const Vec r = sp_rates(sp, gains);
  Vec c(gains.size());
  for (Eigen::Index k = 0; k < gains.size(); ++k) {
    if (!(r[k] > 0.0)) return kInf;
    c[k] = sp.prefix[k] + sp.payload[k] / r[k];
  }
  if (sp.edge_load.size() == 0) return c.maxCoeff();
  return solve_edge_allocation(c, sp.edge_load, sp.edge_capacity).t;
}

double star_energy_violation(const StarSubproblem& sp, const Vec& gains) {
  const Vec r = sp_rates(sp, gains);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < gains.size(); ++k) {
    const double need = sp.payload[k] * sp.p[k] / sp.headroom[k];
    if (need > 0.0) worst = std::max(worst, (need - r[k]) / need);
  }
  return worst;
}

double penalized_objective(const StarSubproblem& sp, const LiftedCoeff& v, double nu) {
  double f = sp.rate_constraints ? star_latency(sp, lifted_gains(v, *sp.ch)) : 0.0;
  for (int b = 0; b < 2; ++b) {
    if (is_free(sp.freedom, b)) f += nu * rank_residual(b == 0 ? v.v_r : v.v_t);
  }
  return f;
}

namespace {

// Rate constraints over q = (scaled gains, t):
//   [0, K)   R_k / L_k - 1 / (t - A_k)
//   [K, 2K)  R_k / L_k - p_k / H_k
//   2K       (t_cap - t) / t_cap
class StarConstraints final : public detail::ConcaveSystem {
 public:
  StarConstraints(const StarSubproblem& sp, double sigma, double t_cap)
      : sp_(sp), K_(static_cast<int>(sp.p.size())), joint_(sp.edge_load.size() != 0), sigma_(sigma),
        t_cap_(t_cap), c_(sp.bandwidth / std::numbers::ln2) {}

  int dim() const override { return K_ + 1 + (joint_ ? K_ : 0); }
  int num_constraints() const override { return 2 * K_ + 1 + (joint_ ? 1 : 0); }
  bool relaxable(int i) const override { return i < num_constraints() - 1; }

  bool eval(const Vec& q, Vec& f, Mat& jac) const override {
    const double t = q[K_];
    const int m = num_constraints();
    f.resize(m);
    jac.setZero(m, dim());
    gap_.resize(K_);
    for (int k = 0; k < K_; ++k) {
      gap_[k] = t - sp_.prefix[k] - (joint_ ? q[K_ + 1 + k] : 0.0);
      if (!(gap_[k] > 0.0)) return false;
    }
    if (joint_ && !detail::edge_split_eval(sp_.edge_load, sp_.edge_capacity, q.tail(K_), f[2 * K_], jac, 2 * K_,
                                           K_ + 1)) {
      return false;
    }
    const Vec g = sigma_ * q.head(K_);
    if (sp_.mode == AccessMode::kSdma) {
      const double S = sp_.p.dot(g) + sp_.noise_power;
      if (!(S > 0.0)) return false;
      const double logS = std::log(S);
      for (int k = 0; k < K_; ++k) {
        const double yk = sp_.y[k];
        const double L = sp_.payload[k];
        const double rate = c_ * (logS - yk * (S - sp_.p[k] * g[k]) + std::log(yk) + 1.0);
        fill(k, rate / L, f, jac);
        for (int j = 0; j < K_; ++j) {
          double d = sigma_ * c_ * sp_.p[j] * (1.0 / S - yk) / L;
          if (j == k) d += sigma_ * c_ * yk * sp_.p[k] / L;
          jac(k, j) = d;
          jac(K_ + k, j) = d;
        }
      }
    } else {
      for (int k = 0; k < K_; ++k) {
        const double L = sp_.payload[k];
        const double bk = sp_.b[k];
        const double qk = sp_.p[k] / (bk * sp_.noise_power);
        const double arg = qk * g[k];
        if (!(arg > -1.0)) return false;
        const double rate = c_ * bk * std::log1p(arg);
        fill(k, rate / L, f, jac);
        const double d = sigma_ * c_ * bk * qk / (1.0 + arg) / L;
        jac(k, k) = d;
        jac(K_ + k, k) = d;
      }
    }
    f[m - 1] = (t_cap_ - t) / t_cap_;
    jac(m - 1, K_) = -1.0 / t_cap_;
    return true;
  }

  void add_hessian(const Vec& q, const Vec& w, Mat& h) const override {
    const double t = q[K_];
    const Vec g = sigma_ * q.head(K_);
    for (int k = 0; k < K_; ++k) {
      const double gap = t - sp_.prefix[k] - (joint_ ? q[K_ + 1 + k] : 0.0);
      const double d = w[k] * (-2.0 / (gap * gap * gap));
      h(K_, K_) += d;
      if (joint_) {
        const int j = K_ + 1 + k;
        h(j, j) += d;
        h(K_, j) -= d;
        h(j, K_) -= d;
      }
    }
    if (sp_.mode == AccessMode::kSdma) {
      const double S = sp_.p.dot(g) + sp_.noise_power;
      double scale = 0.0;
      for (int k = 0; k < K_; ++k) scale += (w[k] + w[K_ + k]) / sp_.payload[k];
      h.topLeftCorner(K_, K_).noalias() -= (sigma_ * sigma_ * c_ * scale / (S * S)) * sp_.p * sp_.p.transpose();
    } else {
      for (int k = 0; k < K_; ++k) {
        const double bk = sp_.b[k];
        const double qk = sp_.p[k] / (bk * sp_.noise_power);
        const double den = 1.0 + qk * g[k];
        h(k, k) -= (w[k] + w[K_ + k]) / sp_.payload[k] * sigma_ * sigma_ * c_ * bk * qk * qk / (den * den);
      }
    }
    if (joint_) detail::edge_split_hessian(sp_.edge_load, sp_.edge_capacity, q.tail(K_), w[2 * K_], h, K_ + 1);
  }

 private:
  void fill(int k, double rate_over_l, Vec& f, Mat& jac) const {
    const double gap = gap_[k];
    f[k] = rate_over_l - 1.0 / gap;
    f[K_ + k] = rate_over_l - sp_.p[k] / sp_.headroom[k];
    jac(k, K_) = 1.0 / (gap * gap);
    if (joint_) jac(k, K_ + 1 + k) = -1.0 / (gap * gap);
  }

  const StarSubproblem& sp_;
  int K_;
  bool joint_;
  double sigma_;
  double t_cap_;
  double c_;
  mutable Vec gap_;
};

void check_subproblem(const StarSubproblem& sp) {
  if (!sp.ch) throw Error(ErrorCode::kInvalidParams, "STAR subproblem needs a channel realization");
  const Eigen::Index K = sp.ch->num_users;
  bool ok = sp.p.size() == K && sp.prefix.size() == K && sp.headroom.size() == K && sp.payload.size() == K;
  ok = ok && (sp.mode == AccessMode::kFdma ? sp.b.size() == K : sp.y.size() == K);
  if (sp.edge_load.size() != 0) {
    ok = ok && sp.edge_load.size() == K && sp.edge_capacity > 0.0 && (sp.edge_load.array() > 0.0).all();
  }
  if (!ok) throw Error(ErrorCode::kInvalidParams, "STAR subproblem input sizes are inconsistent");
  if (sp.rate_constraints) {
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!(sp.headroom[k] > 0.0)) {
        throw Error(ErrorCode::kInfeasible, "no energy left for transmission", static_cast<int>(k), "star");
      }
    }
  }
}

}  // namespace

IterateResult solve_penalized_iterate(const StarSubproblem& sp, const LiftedCoeff& v_prev, double nu) {
  check_subproblem(sp);
  const ChannelRealization& ch = *sp.ch;
  const int K = ch.num_users;
  const int N = ch.num_elements;
  const int M = N + 1;

  double sigma = 0.0;
  for (int k = 0; k < K; ++k) sigma += ch.cascade[k].squaredNorm();
  sigma = K > 0 && sigma > 0.0 ? sigma / K : 1.0;

  detail::LiftedProblem prob;
  prob.dim = M;
  prob.h.resize(K);
  prob.block_of.resize(K);
  for (int k = 0; k < K; ++k) {
    prob.h[k] = ch.cascade[k].conjugate() / std::sqrt(sigma);
    prob.block_of[k] = block_index(ch.side[k]);
  }
  const std::array<const CMat*, 2> prev{&v_prev.v_r, &v_prev.v_t};
  std::array<Linearization, 2> lin;
  for (int b = 0; b < 2; ++b) {
    prob.active[b] = is_free(sp.freedom, b);
    if (!prob.active[b]) {
      prob.frozen[b] = *prev[b];
      continue;
    }
    lin[b] = linearize_lambda_max(*prev[b]);
    prob.cost[b] = nu * (CMat::Identity(M, M) - lin[b].u * lin[b].u.adjoint());
  }

  // Equalities and the diagonal used to pull the start into the interior.
  std::array<Vec, 2> centre{Vec::Zero(M), Vec::Zero(M)};
  if (sp.freedom == StarFreedom::kBoth) {
    for (int n = 0; n < N; ++n) prob.eq.push_back({{{0, n}, {1, n}}, 1.0});
    prob.eq.push_back({{{0, N}}, 1.0});
    prob.eq.push_back({{{1, N}}, 1.0});
    for (int b = 0; b < 2; ++b) {
      centre[b].setConstant(0.5);
      centre[b][N] = 1.0;
    }
  } else {
    const int b = prob.active[0] ? 0 : 1;
    const CMat& other = prob.frozen[1 - b];
    for (int n = 0; n <= N; ++n) {
      const double rhs = n < N ? 1.0 - other(n, n).real() : 1.0;
      prob.eq.push_back({{{b, n}}, rhs});
      centre[b][n] = rhs;
    }
  }

  constexpr double kMix = 1e-2;
  detail::LiftedPoint x0;
  for (int b = 0; b < 2; ++b) {
    if (!prob.active[b]) continue;
    x0.v[b] = (1.0 - kMix) * (*prev[b]) + kMix * CMat(centre[b].cast<cplx>().asDiagonal());
    x0.v[b] = 0.5 * (x0.v[b] + x0.v[b].adjoint()).eval();
  }

  const Vec g_prev = lifted_gains(v_prev, ch);
  const double t_prev = sp.rate_constraints ? star_latency(sp, g_prev) : 0.0;

  IterateResult out;
  detail::BarrierOptions opt;
  std::unique_ptr<StarConstraints> cons;
  double scale = 0.0;
  if (sp.rate_constraints) {
    std::array<CMat, 2> v0 = x0.v;
    for (int b = 0; b < 2; ++b) {
      if (!prob.active[b]) v0[b] = prob.frozen[b];
    }
    const Vec g0 = sigma * detail::lifted_gains(prob, v0);
    const double a_max = sp.prefix.maxCoeff();
    const double t0 = star_latency(sp, g0);
    const double t_ref = std::isfinite(t_prev) ? t_prev : (std::isfinite(t0) ? t0 : a_max + 10.0);
    const bool joint = sp.edge_load.size() != 0;
    double z0 = 0.0;
    Vec tau0;
    if (joint) {
      const Vec r0 = sp_rates(sp, g0);
      if ((r0.array() > 0.0).all()) {
        std::tie(z0, tau0) =
            detail::edge_split_start(sp.prefix + sp.payload.cwiseQuotient(r0), sp.edge_load, sp.edge_capacity);
      } else {
        tau0 = (1.01 * K / sp.edge_capacity) * sp.edge_load;
        z0 = (sp.prefix + tau0).maxCoeff() + 1.0;
      }
    } else {
      z0 = std::isfinite(t0) ? t0 + 0.01 * (t0 - a_max) : 2.0 * t_ref;
      z0 = std::max(z0, a_max + 1e-6 * std::max(1.0, a_max));
    }
    const double t_cap = 2.0 * std::max(t_ref, z0);
    cons = std::make_unique<StarConstraints>(sp, sigma, t_cap);
    prob.cons = cons.get();
    prob.scalar_cost = Vec::Zero(joint ? K + 1 : 1);
    prob.scalar_cost[0] = 1.0;
    x0.scalars.resize(prob.scalar_cost.size());
    x0.scalars[0] = z0;
    if (joint) x0.scalars.tail(K) = tau0;
    scale = std::min(t_ref, z0);

    const detail::LiftedPhaseOne start = detail::lifted_find_interior(prob, x0, 1e-7, opt);
    out.newton_steps += start.newton_steps;
    if (!start.feasible) {
      if (std::isfinite(t_prev) && star_energy_violation(sp, g_prev) <= 1e-9) {
        out.v = v_prev;
        out.t = t_prev;
        return out;
      }
      int worst = 0;
      for (int k = 1; k < K; ++k) {
        if (start.slack[K + k] < start.slack[K + worst]) worst = k;
      }
      throw Error(ErrorCode::kInfeasible, "rate thresholds cannot be met by any coefficient pair", worst, "star");
    }
    x0 = start.x;
  } else {
    prob.scalar_cost = Vec::Zero(0);
    x0.scalars = Vec::Zero(0);
    scale = nu * (N + 2);
  }

  int m = prob.cons ? prob.cons->num_constraints() : 0;
  for (int b = 0; b < 2; ++b) m += prob.active[b] ? M : 0;
  opt.tau0 = m / (10.0 * scale);
  opt.gap_tol = sp.gap_tol * scale;
  opt.newton_tol = 1e-6;
  opt.max_newton = 50;
  const detail::LiftedResult res = detail::lifted_minimize(prob, x0, opt);
  out.newton_steps += res.newton_steps;
  out.v.v_r = res.x.v[0];
  out.v.v_t = res.x.v[1];
  out.t = sp.rate_constraints ? star_latency(sp, lifted_gains(out.v, ch)) : 0.0;
  return out;
}

Algorithm1Result run_algorithm1(const StarSubproblem& sp, const LiftedCoeff& init, const PenaltyConfig& cfg) {
  check_subproblem(sp);
  Algorithm1Result res;
  PenaltyState& st = res.state;
  st.nu = cfg.nu0;
  res.v = init;

  auto residuals = [&](const LiftedCoeff& v, double& rr, double& rt) {
    rr = rank_residual(v.v_r);
    rt = rank_residual(v.v_t);
  };
  auto record = [&](const LiftedCoeff& v, double f, bool degenerate) {
    PenaltyTraceEntry e;
    e.j = st.j;
    e.nu = st.nu;
    e.objective = f;
    e.t = sp.rate_constraints ? star_latency(sp, lifted_gains(v, *sp.ch)) : 0.0;
    residuals(v, e.residual_r, e.residual_t);
    e.degenerate = degenerate;
    st.trace.push_back(e);
  };
  auto rank_ok = [&](const LiftedCoeff& v) {
    for (int b = 0; b < 2; ++b) {
      if (!is_free(sp.freedom, b)) continue;
      const CMat& m = b == 0 ? v.v_r : v.v_t;
      if (rank_residual(m) > cfg.rank_tol * m.trace().real()) return false;
    }
    return true;
  };

  double f_prev = penalized_objective(sp, res.v, st.nu);
  record(res.v, f_prev, false);
  for (;;) {
    for (int it = 0; it < cfg.max_iters; ++it) {
      const IterateResult step = solve_penalized_iterate(sp, res.v, st.nu);
      st.newton_steps += step.newton_steps;
      ++st.j;
      const double f_new = penalized_objective(sp, step.v, st.nu);
      if (!(f_new <= f_prev)) break;  // no descent: keep the previous iterate
      const double change = std::abs(f_prev - f_new) / std::max(std::abs(f_prev), 1e-300);
      res.v = step.v;
      f_prev = f_new;
      const bool degenerate =
          linearize_lambda_max(res.v.v_r).degenerate || linearize_lambda_max(res.v.v_t).degenerate;
      record(res.v, f_new, degenerate);
      if (change < cfg.rel_tol) break;
    }
    residuals(res.v, st.residual_r, st.residual_t);
    if (rank_ok(res.v)) break;
    if (st.nu * cfg.growth > cfg.nu0 * cfg.cap_factor * (1.0 + 1e-9)) {
      throw PenaltyStallError("rank residual above tolerance at the penalty cap", st);
    }
    st.nu *= cfg.growth;
    ++st.escalations;
    f_prev = penalized_objective(sp, res.v, st.nu);
    record(res.v, f_prev, false);
  }
  return res;
}

StarConfig extract_rank_one(const LiftedCoeff& v, double rank_tol) {
  const Eigen::Index M = v.v_r.rows();
  if (M < 2 || v.v_t.rows() != M) throw Error(ErrorCode::kInvalidParams, "lifted blocks must be (N+1)x(N+1)");
  const int N = static_cast<int>(M - 1);
  StarConfig out = StarConfig::uniform(N);
  for (Side s : {Side::kReflection, Side::kTransmission}) {
    const CMat& m = v.get(s);
    Eigen::SelfAdjointEigenSolver<CMat> es(m);
    const double lmax = es.eigenvalues()[M - 1];
    const double tr = m.trace().real();
    if (tr - lmax > rank_tol * tr) {
      throw Error(ErrorCode::kRankTooHigh, std::string("lifted ") + to_string(s) + " matrix is not rank one",
                  -1, "star");
    }
    CVec vec = std::sqrt(std::max(lmax, 0.0)) * es.eigenvectors().col(M - 1);
    const cplx corner = vec[N];
    if (std::abs(corner) > 0.0) vec *= std::conj(corner) / std::abs(corner);
    Vec& gamma = s == Side::kReflection ? out.gamma_r : out.gamma_t;
    Vec& theta = s == Side::kReflection ? out.theta_r : out.theta_t;
    for (int n = 0; n < N; ++n) {
      gamma[n] = std::norm(vec[n]);
      double th = std::arg(vec[n]);
      if (th < 0.0) th += kTwoPi;
      if (th >= kTwoPi) th = 0.0;
      theta[n] = th;
    }
  }
  for (int n = 0; n < N; ++n) {
    const double sum = out.gamma_r[n] + out.gamma_t[n];
    const double gr = sum > 0.0 ? out.gamma_r[n] / sum : 0.5;
    out.gamma_r[n] = gr;
    out.gamma_t[n] = 1.0 - gr;
  }
  return out;
}

}  // namespace starlat
