#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "starlat/perf_model.hpp"

using namespace starlat;

namespace {

constexpr double kB = 5e7;
constexpr double kN0 = 5e7 * 1e-13;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Scalar re-derivation of the SINR rate, user k.
double ref_rate(const Vec& p, const Vec& g, int k) {
  double interf = kN0;
  for (int j = 0; j < p.size(); ++j) {
    if (j != k) interf += p[j] * g[j];
  }
  return kB * std::log2(1.0 + p[k] * g[k] / interf);
}

}  // namespace

TEST_CASE("sdma_rate examples") {
  CHECK(sdma_rate(vec({1.0}), vec({kN0}), kB, kN0)[0] == doctest::Approx(5e7));

  const Vec r = sdma_rate(vec({1, 1}), vec({1e-8, 1e-8}), kB, kN0);
  CHECK(r[0] == doctest::Approx(ref_rate(vec({1, 1}), vec({1e-8, 1e-8}), 0)).epsilon(1e-12));
  CHECK(r[0] == doctest::Approx(1.44e5).epsilon(2e-3));

  CHECK(sdma_rate(vec({0.0, 1.0}), vec({1e-7, 1e-7}), kB, kN0)[0] == 0.0);
}

TEST_CASE("fdma_rate examples") {
  CHECK(fdma_rate(vec({1.0}), vec({0.5}), vec({2.5e-6}), kB, kN0)[0] == doctest::Approx(2.5e7));
  CHECK(fdma_rate(vec({1.0}), vec({0.0}), vec({2.5e-6}), kB, kN0)[0] == 0.0);
  const double single = sdma_rate(vec({0.7}), vec({3e-7}), kB, kN0)[0];
  CHECK(fdma_rate(vec({0.7}), vec({1.0}), vec({3e-7}), kB, kN0)[0] == doctest::Approx(single).epsilon(1e-14));
}

TEST_CASE("fdma rate is jointly concave in (b, p)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double g = std::pow(10.0, -9.0 + 3.0 * u(rng));
    const double b1 = u(rng), b2 = u(rng), p1 = u(rng), p2 = u(rng);
    auto R = [&](double b, double p) { return fdma_rate(vec({p}), vec({b}), vec({g}), kB, kN0)[0]; };
    const double mid = R(0.5 * (b1 + b2), 0.5 * (p1 + p2));
    const double avg = 0.5 * (R(b1, p1) + R(b2, p2));
    CHECK(mid >= avg - 1e-9 * std::max(1.0, std::abs(avg)));
  }
}

TEST_CASE("surrogate rate is tight at the update and dominated elsewhere") {
  const Vec g1 = vec({2e-7});
  const Vec y1 = vec({1.0 / kN0});
  CHECK(surrogate_rate(vec({1.0}), g1, y1, kB, kN0)[0] ==
        doctest::Approx(sdma_rate(vec({1.0}), g1, kB, kN0)[0]).epsilon(1e-13));
  CHECK(surrogate_rate(vec({1.0}), g1, 2.0 * y1, kB, kN0)[0] < sdma_rate(vec({1.0}), g1, kB, kN0)[0]);

  CHECK(update_y(vec({1.0}), g1, kN0)[0] == doctest::Approx(2e5));
  CHECK(update_y(vec({1.0, 1.0}), vec({1e-7, 5e-6}), kN0)[0] == doctest::Approx(1e5));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const int K = 1 + static_cast<int>(u(rng) * 6);
    Vec p(K), g(K), y(K);
    for (int k = 0; k < K; ++k) {
      p[k] = u(rng);
      g[k] = std::pow(10.0, -8.0 + 2.0 * u(rng));
      y[k] = std::pow(10.0, 3.0 + 4.0 * u(rng));
    }
    const Vec truth = sdma_rate(p, g, kB, kN0);
    const Vec sur = surrogate_rate(p, g, y, kB, kN0);
    for (int k = 0; k < K; ++k) CHECK(sur[k] <= truth[k] + 1e-9 * std::max(1.0, truth[k]));
    const Vec tight = surrogate_rate(p, g, update_y(p, g, kN0), kB, kN0);
    for (int k = 0; k < K; ++k) CHECK(std::abs(tight[k] - truth[k]) <= 1e-9 * std::max(1.0, truth[k]));
  }
}

TEST_CASE("surrogate rejects non-positive auxiliaries") {
  try {
    surrogate_rate(vec({1, 1}), vec({1e-7, 1e-7}), vec({1e5, 0.0}), kB, kN0);
    FAIL("expected NonPositiveAuxiliary");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveAuxiliary);
    CHECK(e.user() == 1);
  }
}

TEST_CASE("sdma rate is nondecreasing in own power") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec p(3), g(3);
    for (int k = 0; k < 3; ++k) {
      p[k] = u(rng);
      g[k] = std::pow(10.0, -8.0 + 2.0 * u(rng));
    }
    const double before = sdma_rate(p, g, kB, kN0)[1];
    p[1] += 0.1 * u(rng);
    CHECK(sdma_rate(p, g, kB, kN0)[1] >= before);
  }
}

TEST_CASE("latency and energy arithmetic") {
  ScenarioParams params;
  params.num_reflect = 1;
  params.num_transmit = 0;
  AllocationState st;
  st.p = vec({1.0});
  st.f_local = vec({1e9});
  st.f_edge = vec({2e10});
  const auto [lat, en] = latency_energy(st, vec({5e7}), params);
  CHECK(lat.local[0] == doctest::Approx(0.05));
  CHECK(en.local[0] == doctest::Approx(0.05));
  CHECK(lat.comm[0] == doctest::Approx(0.01125));
  CHECK(lat.edge[0] == doctest::Approx(0.028125));
  CHECK(lat.total[0] == doctest::Approx(0.05 + 0.01125 + 0.028125));
  CHECK(en.comm[0] == doctest::Approx(0.01125));
  CHECK(en.total[0] == doctest::Approx(0.06125));

  const auto zero = latency_energy(st, vec({0.0}), params);
  CHECK(std::isinf(zero.first.comm[0]));
  CHECK(std::isinf(max_latency(zero.first)));
}

TEST_CASE("max_latency picks the worst user") {
  LatencyBreakdown lat;
  lat.total = vec({0.10, 0.12, 0.09});
  CHECK(max_latency(lat) == 0.12);
  lat.total = vec({0.3});
  CHECK(max_latency(lat) == 0.3);
  lat.total = vec({0.1, std::numeric_limits<double>::infinity()});
  CHECK(std::isinf(max_latency(lat)));
}

TEST_CASE("StarConfig validation and lifting") {
  StarConfig s = StarConfig::uniform(4);
  CHECK_NOTHROW(s.validate());
  s.gamma_t[2] = 0.7;
  CHECK_THROWS_AS(s.validate(), Error);

  StarConfig one = StarConfig::uniform(1);
  one.theta_r[0] = 1.0;
  const CVec v = one.lifted_vector(Side::kReflection);
  CHECK(std::abs(v[0]) == doctest::Approx(std::sqrt(0.5)));
  CHECK(std::arg(v[0]) == doctest::Approx(1.0));
  CHECK(v[1] == cplx(1.0, 0.0));
}
