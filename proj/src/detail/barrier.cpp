#include "detail/barrier.hpp"

#include <cmath>
#include <limits>

namespace starlat::detail {

namespace {

struct Point {
  Vec x;
  Vec f;
  Mat jac;
  double phi = 0.0;
};

bool evaluate(const ConcaveSystem& sys, const Vec& c, double tau, const Vec& x, Point& out) {
  out.x = x;
  if (!sys.eval(x, out.f, out.jac)) return false;
  if ((out.f.array() <= 0.0).any() || !out.f.allFinite()) return false;
  out.phi = tau * c.dot(x) - out.f.array().log().sum();
  return std::isfinite(out.phi);
}

// One centering run at fixed tau. Returns the number of Newton steps taken.
int center(const ConcaveSystem& sys, const Vec& c, double tau, Point& pt, const BarrierOptions& opt,
           const std::function<bool(const Vec&)>& stop) {
  int steps = 0;
  Point trial;
  for (; steps < opt.max_newton; ++steps) {
    const Vec inv = pt.f.cwiseInverse();
    const Vec grad = tau * c - pt.jac.transpose() * inv;
    Mat h = pt.jac.transpose() * inv.cwiseAbs2().asDiagonal() * pt.jac;
    sys.add_hessian(pt.x, -inv, h);
    Eigen::LDLT<Mat> ldlt(h);
    Vec dx = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !dx.allFinite()) {
      h.diagonal().array() += 1e-12 * (h.diagonal().cwiseAbs().maxCoeff() + 1e-300);
      dx = h.ldlt().solve(-grad);
      if (!dx.allFinite()) break;
    }
    const double dec = -grad.dot(dx);
    if (!(dec > 2.0 * opt.newton_tol)) break;

    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
      if (!evaluate(sys, c, tau, pt.x + s * dx, trial)) continue;
      if (trial.phi <= pt.phi - 0.25 * s * dec) {
        moved = true;
        break;
      }
    }
    if (!moved) break;
    std::swap(pt, trial);
    if (stop && stop(pt.x)) {
      ++steps;
      break;
    }
  }
  return steps;
}

}  // namespace

BarrierResult minimize_linear(const ConcaveSystem& sys, const Vec& c, const Vec& x0,
                              const BarrierOptions& opt) {
  BarrierResult res;
  Point pt;
  double tau = opt.tau0;
  if (!evaluate(sys, c, tau, x0, pt)) {
    res.x = x0;
    return res;
  }
  const double m = sys.num_constraints();
  for (;;) {
    res.newton_steps += center(sys, c, tau, pt, opt, {});
    if (m / tau <= opt.gap_tol) {
      res.converged = true;
      break;
    }
    if (res.newton_steps >= opt.max_total_newton) break;
    tau *= opt.tau_growth;
    pt.phi = tau * c.dot(pt.x) - pt.f.array().log().sum();
  }
  res.x = pt.x;
  return res;
}

SlackSystem::SlackSystem(const ConcaveSystem& base, double s_hi) : base_(base), s_hi_(s_hi) {}

int SlackSystem::dim() const { return base_.dim() + 1; }
int SlackSystem::num_constraints() const { return base_.num_constraints() + 1; }
bool SlackSystem::relaxable(int) const { return false; }

bool SlackSystem::eval(const Vec& xs, Vec& f, Mat& jac) const {
  const int n = base_.dim();
  const int m = base_.num_constraints();
  Vec fb;
  Mat jb;
  if (!base_.eval(xs.head(n), fb, jb)) return false;
  const double s = xs[n];
  f.resize(m + 1);
  jac.setZero(m + 1, n + 1);
  for (int i = 0; i < m; ++i) {
    const bool r = base_.relaxable(i);
    f[i] = fb[i] - (r ? s : 0.0);
    jac.row(i).head(n) = jb.row(i);
    jac(i, n) = r ? -1.0 : 0.0;
  }
  f[m] = s_hi_ - s;
  jac(m, n) = -1.0;
  return true;
}

void SlackSystem::add_hessian(const Vec& xs, const Vec& w, Mat& h) const {
  const int n = base_.dim();
  Mat hb = Mat::Zero(n, n);
  base_.add_hessian(xs.head(n), w.head(base_.num_constraints()), hb);
  h.topLeftCorner(n, n) += hb;
}

PhaseOneResult find_interior(const ConcaveSystem& sys, const Vec& x0, double margin,
                             const BarrierOptions& opt) {
  PhaseOneResult res;
  const int n = sys.dim();
  const int m = sys.num_constraints();
  Vec f;
  Mat jac;
  res.x = x0;
  if (!sys.eval(x0, f, jac)) return res;
  res.slack = f;
  double min_rel = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    if (sys.relaxable(i)) {
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
  const double s_hi = std::max(4.0 * margin, 1.0);
  SlackSystem aug(sys, s_hi);
  Vec xs(n + 1);
  xs << x0, s0;
  Vec c = Vec::Zero(n + 1);
  c[n] = -1.0;

  Point pt;
  double tau = opt.tau0;
  if (!evaluate(aug, c, tau, xs, pt)) return res;
  auto done = [&](const Vec& z) { return z[n] > margin; };
  for (;;) {
    res.newton_steps += center(aug, c, tau, pt, opt, done);
    const double s = pt.x[n];
    if (s > margin) {
      res.feasible = true;
      break;
    }
    // s* <= s + (m + 1) / tau at a central point.
    if (s + (m + 1) / tau < 0.0) break;
    if ((m + 1) / tau <= opt.gap_tol || res.newton_steps >= opt.max_total_newton) {
      res.feasible = s > 0.0;
      break;
    }
    tau *= opt.tau_growth;
    pt.phi = tau * c.dot(pt.x) - pt.f.array().log().sum();
  }
  res.x = pt.x.head(n);
  sys.eval(res.x, res.slack, jac);
  return res;
}

}  // namespace starlat::detail
