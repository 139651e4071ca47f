#include "detail/lifted_ipm.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>

namespace starlat::detail {

namespace {

double inner(const CMat& a, const CMat& b) { return (a.cwiseProduct(b.conjugate())).sum().real(); }

struct State {
  std::array<CMat, 2> v;
  Vec sc;
  Vec q;
  Vec psi;
  Mat jac;
  double logdet = 0.0;
  double phi = 0.0;
};

Vec gains_of(const LiftedProblem& p, const std::array<CMat, 2>& v) {
  Vec g(p.num_users());
  for (int k = 0; k < p.num_users(); ++k) {
    const int b = p.block_of[k];
    const CMat& m = p.active[b] ? v[b] : p.frozen[b];
    g[k] = p.h[k].dot(m * p.h[k]).real();
  }
  return g;
}

bool evaluate(const LiftedProblem& p, double tau, State& s) {
  s.logdet = 0.0;
  for (int b = 0; b < 2; ++b) {
    if (!p.active[b]) continue;
    Eigen::LLT<CMat> llt(s.v[b]);
    if (llt.info() != Eigen::Success) return false;
    const Vec d = llt.matrixLLT().diagonal().real();
    if ((d.array() <= 0.0).any() || !d.allFinite()) return false;
    s.logdet += 2.0 * d.array().log().sum();
  }
  const int K = p.num_users();
  s.q.resize(K + p.num_scalars());
  s.q.head(K) = gains_of(p, s.v);
  s.q.tail(p.num_scalars()) = s.sc;
  double barrier = 0.0;
  if (p.cons) {
    if (!p.cons->eval(s.q, s.psi, s.jac)) return false;
    if ((s.psi.array() <= 0.0).any() || !s.psi.allFinite()) return false;
    barrier = s.psi.array().log().sum();
  }
  double obj = p.scalar_cost.dot(s.sc);
  for (int b = 0; b < 2; ++b) {
    if (p.active[b] && p.cost[b].size() > 0) obj += inner(p.cost[b], s.v[b]);
  }
  s.phi = tau * obj - s.logdet - barrier;
  return std::isfinite(s.phi);
}

double objective(const LiftedProblem& p, const State& s) {
  double obj = p.scalar_cost.dot(s.sc);
  for (int b = 0; b < 2; ++b) {
    if (p.active[b] && p.cost[b].size() > 0) obj += inner(p.cost[b], s.v[b]);
  }
  return obj;
}

int barrier_size(const LiftedProblem& p) {
  int m = p.cons ? p.cons->num_constraints() : 0;
  for (int b = 0; b < 2; ++b) m += p.active[b] ? p.dim : 0;
  return m;
}

// Equality-constrained Newton centering at fixed tau; see the header for the
// problem shape. The matrix blocks are eliminated through
// dV = -V (grad_V + sum_k xi_k H_k + sum_j lambda_j E_j) V, leaving a dense
// system in the user gains, the scalars and the equality multipliers.
struct CenterResult {
  int steps = 0;
  bool at_floor = false;  // no step length gave sufficient decrease
};

CenterResult center(const LiftedProblem& p, double tau, State& st, const BarrierOptions& opt,
                    const std::function<bool(const State&)>& stop) {
  const int K = p.num_users();
  const int ns = p.num_scalars();
  const int nq = K + ns;
  const int m = static_cast<int>(p.eq.size());
  const int M = p.dim;
  CenterResult out;
  int& steps = out.steps;
  State trial;

  for (; steps < opt.max_newton; ++steps) {
    Vec phi = Vec::Zero(nq);
    Mat W = Mat::Zero(nq, nq);
    if (p.cons) {
      const Vec inv = st.psi.cwiseInverse();
      phi = -st.jac.transpose() * inv;
      W = st.jac.transpose() * inv.cwiseAbs2().asDiagonal() * st.jac;
      p.cons->add_hessian(st.q, -inv, W);
    }

    std::array<CMat, 2> d0, vinv;
    for (int b = 0; b < 2; ++b) {
      if (!p.active[b]) continue;
      d0[b] = st.v[b];
      if (p.cost[b].size() > 0) d0[b] -= tau * (st.v[b] * p.cost[b] * st.v[b]);
      vinv[b] = st.v[b].llt().solve(CMat::Identity(M, M));
    }

    std::vector<CVec> a(K);
    std::vector<bool> live(K, false);
    for (int k = 0; k < K; ++k) {
      const int b = p.block_of[k];
      if (p.active[b]) {
        a[k] = st.v[b] * p.h[k];
        live[k] = true;
      }
    }

    Mat G = Mat::Zero(K, K);
    for (int k = 0; k < K; ++k) {
      if (!live[k]) continue;
      for (int l = 0; l < K; ++l) {
        if (live[l] && p.block_of[l] == p.block_of[k]) G(k, l) = std::norm(p.h[k].dot(a[l]));
      }
    }
    Mat B = Mat::Zero(K, m);
    for (int j = 0; j < m; ++j) {
      for (const auto& term : p.eq[j].terms) {
        for (int k = 0; k < K; ++k) {
          if (live[k] && p.block_of[k] == term.block) B(k, j) += std::norm(a[k][term.index]);
        }
      }
    }
    Mat Q = Mat::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (const auto& tj : p.eq[j].terms) {
          for (const auto& ti : p.eq[i].terms) {
            if (tj.block == ti.block) acc += std::norm(st.v[tj.block](tj.index, ti.index));
          }
        }
        Q(j, i) = acc;
      }
    }

    // Symmetric system in (s, mu, lambda), mu = phi_u + W_u s:
    //   -W s + P mu         = (phi_u, tau c + phi_sc)
    //   P^T s + G mu + B lam = h^H D0 h
    //   B^T mu + Q lam       = diag(D0) - equality drift
    const int n = nq + K + m;
    Mat A = Mat::Zero(n, n);
    Vec rhs = Vec::Zero(n);
    A.topLeftCorner(nq, nq) = -W;
    rhs.head(K) = phi.head(K);
    if (ns > 0) rhs.segment(K, ns) = tau * p.scalar_cost + phi.tail(ns);
    A.block(nq, nq, K, K) = G;
    A.block(nq, nq + K, K, m) = B;
    A.block(nq + K, nq, m, K) = B.transpose();
    A.bottomRightCorner(m, m) = Q;
    for (int k = 0; k < K; ++k) {
      if (!live[k]) {
        for (int i : {k, nq + k}) {
          A.row(i).setZero();
          A.col(i).setZero();
          A(i, i) = 1.0;
          rhs[i] = 0.0;
        }
        continue;
      }
      A(k, nq + k) = 1.0;
      A(nq + k, k) = 1.0;
      rhs[nq + k] = p.h[k].dot(d0[p.block_of[k]] * p.h[k]).real();
    }
    for (int j = 0; j < m; ++j) {
      double acc = 0.0, cur = 0.0;
      for (const auto& t : p.eq[j].terms) {
        acc += d0[t.block](t.index, t.index).real();
        cur += st.v[t.block](t.index, t.index).real();
      }
      rhs[nq + K + j] = acc - (p.eq[j].rhs - cur);
    }
    Vec scale(n);
    for (int i = 0; i < n; ++i) {
      const double r = A.row(i).cwiseAbs().maxCoeff();
      scale[i] = r > 0.0 ? 1.0 / std::sqrt(r) : 1.0;
    }
    const Mat As = scale.asDiagonal() * A * scale.asDiagonal();
    const Vec sol = scale.cwiseProduct(As.fullPivLu().solve(scale.cwiseProduct(rhs)));
    if (!sol.allFinite()) break;
    const Vec s_q = sol.head(nq);
    const Vec mu = sol.segment(nq, K);
    const Vec lambda = sol.tail(m);

    std::array<CMat, 2> dv;
    for (int b = 0; b < 2; ++b) {
      if (p.active[b]) dv[b] = d0[b];
    }
    for (int k = 0; k < K; ++k) {
      if (live[k]) dv[p.block_of[k]] -= mu[k] * (a[k] * a[k].adjoint());
    }
    for (int j = 0; j < m; ++j) {
      for (const auto& t : p.eq[j].terms) {
        const CVec col = st.v[t.block].col(t.index);
        dv[t.block] -= lambda[j] * (col * col.adjoint());
      }
    }
    for (int b = 0; b < 2; ++b) {
      if (p.active[b]) dv[b] = 0.5 * (dv[b] + dv[b].adjoint()).eval();
    }
    const Vec dsc = s_q.tail(ns);

    // Newton decrement as the Hessian quadratic form along the step.
    Vec sq = Vec::Zero(nq);
    for (int k = 0; k < K; ++k) {
      if (live[k]) sq[k] = p.h[k].dot(dv[p.block_of[k]] * p.h[k]).real();
    }
    sq.tail(ns) = dsc;
    double dec = sq.dot(W * sq);
    for (int b = 0; b < 2; ++b) {
      if (!p.active[b]) continue;
      const CMat x = vinv[b] * dv[b];
      dec += x.cwiseProduct(x.transpose()).sum().real();
    }
    if (!(dec > 2.0 * opt.newton_tol)) break;

    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      for (int b = 0; b < 2; ++b) {
        if (p.active[b]) trial.v[b] = st.v[b] + alpha * dv[b];
      }
      trial.sc = st.sc + alpha * dsc;
      if (!evaluate(p, tau, trial)) continue;
      if (trial.phi <= st.phi - 0.25 * alpha * dec) {
        moved = true;
        break;
      }
    }
    if (!moved) {
      out.at_floor = true;
      break;
    }
    std::swap(st, trial);
    if (stop && stop(st)) {
      ++steps;
      break;
    }
  }
  return out;
}

State make_state(const LiftedProblem& p, const LiftedPoint& x) {
  State s;
  s.v = x.v;
  for (int b = 0; b < 2; ++b) {
    if (!p.active[b]) s.v[b] = p.frozen[b];
  }
  s.sc = x.scalars;
  return s;
}

LiftedPoint to_point(const LiftedProblem& p, const State& s) {
  LiftedPoint x;
  x.v = s.v;
  for (int b = 0; b < 2; ++b) {
    if (!p.active[b]) x.v[b] = p.frozen[b];
  }
  x.scalars = s.sc;
  return x;
}

}  // namespace

Vec lifted_gains(const LiftedProblem& prob, const std::array<CMat, 2>& v) { return gains_of(prob, v); }

LiftedResult lifted_minimize(const LiftedProblem& prob, const LiftedPoint& x0, const BarrierOptions& opt) {
  LiftedResult res;
  State st = make_state(prob, x0);
  double tau = opt.tau0;
  if (!evaluate(prob, tau, st)) {
    res.x = x0;
    return res;
  }
  const double m = barrier_size(prob);
  for (;;) {
    const CenterResult c = center(prob, tau, st, opt, {});
    res.newton_steps += c.steps;
    if (m / tau <= opt.gap_tol) {
      res.converged = true;
      break;
    }
    if (c.at_floor || (c.steps >= opt.max_newton && tau > opt.tau0)) break;
    if (res.newton_steps >= opt.max_total_newton) break;
    tau *= opt.tau_growth;
    st.phi = tau * objective(prob, st) - st.logdet - (prob.cons ? st.psi.array().log().sum() : 0.0);
  }
  res.x = to_point(prob, st);
  return res;
}

LiftedPhaseOne lifted_find_interior(const LiftedProblem& prob, const LiftedPoint& x0, double margin,
                                    const BarrierOptions& opt) {
  LiftedPhaseOne res;
  res.x = x0;
  if (!prob.cons) {
    res.feasible = true;
    return res;
  }
  const int K = prob.num_users();
  State st = make_state(prob, x0);
  st.q.resize(K + prob.num_scalars());
  st.q.head(K) = gains_of(prob, st.v);
  st.q.tail(prob.num_scalars()) = st.sc;
  Vec f;
  Mat jac;
  if (!prob.cons->eval(st.q, f, jac)) return res;
  res.slack = f;
  double min_rel = std::numeric_limits<double>::infinity();
  for (int i = 0; i < f.size(); ++i) {
    if (prob.cons->relaxable(i)) {
      min_rel = std::min(min_rel, f[i]);
    } else if (!(f[i] > 0.0)) {
      return res;
    }
  }
  if (min_rel > margin) {
    res.feasible = true;
    return res;
  }

  const double s0 = min_rel - 0.1 * std::max(1.0, std::abs(min_rel));
  SlackSystem aug(*prob.cons, std::max(4.0 * margin, 1.0));
  LiftedProblem p1 = prob;
  p1.cons = &aug;
  p1.cost = {};
  p1.scalar_cost = Vec::Zero(prob.num_scalars() + 1);
  p1.scalar_cost[prob.num_scalars()] = -1.0;

  State s1 = st;
  s1.sc.resize(prob.num_scalars() + 1);
  s1.sc.head(prob.num_scalars()) = st.sc;
  s1.sc[prob.num_scalars()] = s0;
  double tau = opt.tau0;
  if (!evaluate(p1, tau, s1)) return res;
  const double m = barrier_size(p1);
  const int slack_at = prob.num_scalars();
  auto done = [&](const State& s) { return s.sc[slack_at] > margin; };
  for (;;) {
    res.newton_steps += center(p1, tau, s1, opt, done).steps;
    const double s = s1.sc[slack_at];
    if (s > margin) {
      res.feasible = true;
      break;
    }
    if (s + m / tau < 0.0) break;
    if (m / tau <= opt.gap_tol || res.newton_steps >= opt.max_total_newton) {
      res.feasible = s > 0.0;
      break;
    }
    tau *= opt.tau_growth;
    s1.phi = tau * objective(p1, s1) - s1.logdet - s1.psi.array().log().sum();
  }
  State out = s1;
  out.sc = s1.sc.head(prob.num_scalars());
  res.x = to_point(prob, out);
  Vec q(K + prob.num_scalars());
  q.head(K) = gains_of(prob, res.x.v);
  q.tail(prob.num_scalars()) = res.x.scalars;
  prob.cons->eval(q, res.slack, jac);
  return res;
}

}  // namespace starlat::detail
