#pragma once

#include <functional>

#include "starlat/common.hpp"

namespace starlat::detail {

// Smooth concave inequality system f_i(x) > 0 over a dense variable vector.
class ConcaveSystem {
 public:
  virtual ~ConcaveSystem() = default;
  virtual int dim() const = 0;
  virtual int num_constraints() const = 0;
  // Fills values and the m x n Jacobian. Returns false outside the domain.
  virtual bool eval(const Vec& x, Vec& f, Mat& jac) const = 0;
  // H += sum_i w_i * hess f_i(x)
  virtual void add_hessian(const Vec& x, const Vec& w, Mat& h) const = 0;
  // Constraints that Phase I may relax with a common slack; the rest must
  // already hold at the starting point.
  virtual bool relaxable(int i) const = 0;
};

// Appends a slack variable s: relaxable constraints become f_i(x) - s, the
// others stay as they are, and s < s_hi bounds the slack from above.
class SlackSystem final : public ConcaveSystem {
 public:
  SlackSystem(const ConcaveSystem& base, double s_hi);
  int dim() const override;
  int num_constraints() const override;
  bool eval(const Vec& xs, Vec& f, Mat& jac) const override;
  void add_hessian(const Vec& xs, const Vec& w, Mat& h) const override;
  bool relaxable(int i) const override;

 private:
  const ConcaveSystem& base_;
  double s_hi_;
};

struct BarrierOptions {
  double tau0 = 1.0;
  double tau_growth = 20.0;
  double gap_tol = 1e-9;  // stop when m / tau <= gap_tol
  double newton_tol = 1e-10;
  int max_newton = 200;
  int max_total_newton = 2000;
};

struct BarrierResult {
  Vec x;
  bool converged = false;
  int newton_steps = 0;
};

// Minimizes c^T x over the strict interior; x0 must be strictly feasible.
BarrierResult minimize_linear(const ConcaveSystem& sys, const Vec& c, const Vec& x0,
                              const BarrierOptions& opt);

struct PhaseOneResult {
  bool feasible = false;
  Vec x;            // strictly feasible point when feasible
  Vec slack;        // constraint values at the best point found
  int newton_steps = 0;
};

// Maximizes the common slack s of the relaxable constraints (f_i(x) >= s)
// starting from x0, which must satisfy the non-relaxable ones. Stops as soon
// as s exceeds `margin`, or when the duality bound proves s* < 0.
PhaseOneResult find_interior(const ConcaveSystem& sys, const Vec& x0, double margin,
                             const BarrierOptions& opt);

}  // namespace starlat::detail
