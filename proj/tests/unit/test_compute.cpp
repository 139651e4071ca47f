#include <cmath>
#include <random>

#include "doctest.h"
#include "starlat/compute.hpp"

using namespace starlat;

namespace {

// Newton iteration on the water-level equation, started right of the pole.
double water_level_newton(const Vec& a, const Vec& l, double F) {
  double t = a.maxCoeff() + l.sum() / F;
  for (int it = 0; it < 200; ++it) {
    double g = -F, dg = 0.0;
    for (int k = 0; k < a.size(); ++k) {
      g += l[k] / (t - a[k]);
      dg -= l[k] / ((t - a[k]) * (t - a[k]));
    }
    const double next = t - g / dg;
    if (next <= a.maxCoeff()) {
      t = 0.5 * (t + a.maxCoeff());
    } else {
      if (std::abs(next - t) <= 1e-15 * t) return next;
      t = next;
    }
  }
  return t;
}

double max_latency_of(const Vec& a, const Vec& l, const Vec& f) {
  double t = 0.0;
  for (int k = 0; k < a.size(); ++k) t = std::max(t, a[k] + l[k] / f[k]);
  return t;
}

}  // namespace

TEST_CASE("optimal_local_cpu examples") {
  CHECK(optimal_local_cpu(2.0, 0.5, 5e7, 1e-27, 1e9) == 1e9);
  CHECK(optimal_local_cpu(5e-3, 0.0, 5e7, 1e-27, 1e9) == doctest::Approx(3.16227766e8).epsilon(1e-8));
  try {
    optimal_local_cpu(2.0, 2.1, 5e7, 1e-27, 1e9);
    FAIL("expected InfeasibleEnergy");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleEnergy);
  }
}

TEST_CASE("closed-form CPU frequency beats a fine grid") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double e_max = 0.01 + 2.0 * u(rng);
    const double e_c = e_max * u(rng);
    const double w = 1e7 + 1e8 * u(rng);
    const double kappa = 1e-27;
    const double f_max = 5e8 + 1e9 * u(rng);
    const double f = optimal_local_cpu(e_max, e_c, w, kappa, f_max);
    const int n = 10000;
    const double step = f_max / n;
    double best = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double fj = j * step;
      if (kappa * fj * fj * w + e_c <= e_max) best = std::max(best, fj);
    }
    // Latency w/f is decreasing, so the best grid point is the largest feasible one.
    CHECK(w / f <= w / best + 1e-12);
    CHECK(f - best <= step * (1 + 1e-9));
    CHECK(kappa * f * f * w + e_c <= e_max * (1 + 1e-12));
  }
}

TEST_CASE("edge allocation examples") {
  const EdgeAllocation a = solve_edge_allocation(Vec::Constant(2, 0.05), Vec::Constant(2, 5.625e8), 2e10);
  CHECK(a.f_edge[0] == doctest::Approx(1e10).epsilon(1e-12));
  CHECK(a.f_edge[1] == doctest::Approx(1e10).epsilon(1e-12));
  CHECK(a.t == doctest::Approx(0.10625).epsilon(1e-12));

  Vec l(2);
  l << 5.625e8, 1.40625e8;
  const EdgeAllocation b = solve_edge_allocation(Vec::Constant(2, 0.05), l, 2e10);
  CHECK(b.t == doctest::Approx(0.08515625).epsilon(1e-12));
  CHECK(b.f_edge[0] == doctest::Approx(1.6e10).epsilon(1e-12));
  CHECK(b.f_edge[1] == doctest::Approx(4e9).epsilon(1e-12));
}

TEST_CASE("edge allocation matches an independent water-level solve") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const int K = 5;
    Vec a(K), l(K);
    for (int k = 0; k < K; ++k) {
      a[k] = 0.02 + 0.3 * u(rng);
      l[k] = 1e8 + 1e9 * u(rng);
    }
    const double F = 1e10 + 2e10 * u(rng);
    const EdgeAllocation sol = solve_edge_allocation(a, l, F);
    CHECK(std::abs(sol.t - water_level_newton(a, l, F)) <= 1e-6 * sol.t);

    // No random capacity-preserving move lowers the worst latency.
    const double t0 = max_latency_of(a, l, sol.f_edge);
    for (int trial = 0; trial < 20; ++trial) {
      Vec d(K);
      for (int k = 0; k < K; ++k) d[k] = u(rng) - 0.5;
      d.array() -= d.mean();
      const Vec f = sol.f_edge + 1e-3 * F * d / d.norm();
      if ((f.array() > 0).all()) CHECK(max_latency_of(a, l, f) >= t0 * (1 - 1e-12));
    }
  }
}

TEST_CASE("KKT structure on random instances") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const int K = 1 + static_cast<int>(u(rng) * 10);
    Vec a(K), l(K), d(K), c(K);
    for (int k = 0; k < K; ++k) {
      a[k] = 0.3 * u(rng);
      d[k] = 50 + 200 * u(rng);
      c[k] = 500 + 1000 * u(rng);
      l[k] = 25.0 * d[k] * d[k] * c[k];
    }
    const double F = 5e9 + 3e10 * u(rng);
    const EdgeAllocation s = solve_edge_allocation(a, l, F);
    CHECK(std::abs(s.f_edge.sum() - F) <= 1e-12 * F);
    Vec lat(K);
    for (int k = 0; k < K; ++k) lat[k] = a[k] + l[k] / s.f_edge[k];
    CHECK(lat.maxCoeff() - lat.minCoeff() <= 1e-9 * s.t);
    const KktReport rep = verify_kkt(s.f_edge, s.t, s.duals, a, l, F);
    CHECK(rep.ok());
    CHECK((s.duals.a1.array() > 0).all());
    CHECK(s.duals.a2 > 0);
    for (int k = 0; k < K; ++k) {
      const double theorem = d[k] * std::sqrt(s.duals.a1[k] * 25.0 * c[k] / s.duals.a2);
      CHECK(std::abs(theorem - s.f_edge[k]) <= 1e-9 * s.f_edge[k]);
    }
  }
}

TEST_CASE("verify_kkt flags broken certificates") {
  Vec a = Vec::Constant(2, 0.05);
  Vec l(2);
  l << 5.625e8, 1.40625e8;
  const EdgeAllocation s = solve_edge_allocation(a, l, 2e10);
  CHECK(verify_kkt(s.f_edge, s.t, s.duals, a, l, 2e10).ok());

  Vec f = s.f_edge;
  f[0] *= 1.01;
  f[1] -= 0.01 * s.f_edge[0];
  const KktReport moved = verify_kkt(f, s.t, s.duals, a, l, 2e10);
  CHECK_FALSE(moved.ok());
  CHECK(moved.latency_slackness > 1e-6);

  DualCertificate bad = s.duals;
  bad.a1 *= 0.9 / bad.a1.sum();
  const KktReport norm = verify_kkt(s.f_edge, s.t, bad, a, l, 2e10);
  CHECK_FALSE(norm.ok());
  CHECK(norm.normalization == doctest::Approx(0.1));
}

TEST_CASE("equal prefixes and equal multipliers give d sqrt(c) proportionality") {
  // d^2 c equal for both users, so the multipliers coincide.
  const double d1 = 150, c1 = 1000, d2 = 75, c2 = 4000;
  Vec l(2);
  l << 25 * d1 * d1 * c1, 25 * d2 * d2 * c2;
  const EdgeAllocation s = solve_edge_allocation(Vec::Constant(2, 0.1), l, 2e10);
  CHECK(s.duals.a1[0] == doctest::Approx(s.duals.a1[1]).epsilon(1e-12));
  CHECK(s.f_edge[0] / s.f_edge[1] == doctest::Approx(d1 * std::sqrt(c1) / (d2 * std::sqrt(c2))).epsilon(1e-12));
}
