#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "starlat/compute.hpp"
#include "starlat/oracle.hpp"

using namespace starlat;

TEST_CASE("single reflection element without direct link") {
  ScenarioParams params;
  params.num_reflect = 1;
  params.num_transmit = 0;
  params.num_elements = 1;
  params.user_template.e_max = 100.0;
  params = place_users(params, 4);
  ChannelRealization ch = gen_channels(params, 4);
  ch.h_direct[0] = 0.0;
  relift(ch);
  const OracleResult res = brute_force(params, ch, AccessMode::kSdma);
  CHECK(res.star.gamma_r[0] == 1.0);
  CHECK(res.star.gamma_t[0] == 0.0);
  const double g = std::norm(ch.cascade[0][0]);
  CHECK(composite_gains(res.star, ch)[0] == doctest::Approx(g).epsilon(1e-12));
  const double rate = params.bandwidth * std::log2(1.0 + g / params.noise_power());
  const double expect = params.user(0).workload / params.user(0).f_max + params.payload_bits(0) / rate +
                        params.edge_load(0) / params.bs_cpu;
  CHECK(res.t == doctest::Approx(expect).epsilon(1e-12));
  CHECK(res.state.p[0] == 1.0);
}

TEST_CASE("single element with direct link aligns the cascade") {
  ScenarioParams params;
  params.num_reflect = 1;
  params.num_transmit = 0;
  params.num_elements = 1;
  params.user_template.e_max = 100.0;
  params = place_users(params, 6);
  const ChannelRealization ch = gen_channels(params, 6);
  GridSpec grid;
  grid.phase_points = 256;
  const OracleResult res = brute_force(params, ch, AccessMode::kSdma, grid);
  const double best = std::pow(std::abs(ch.cascade[0][0]) + std::abs(ch.cascade[0][1]), 2.0);
  const double g = composite_gains(res.star, ch)[0];
  CHECK(g <= best * (1 + 1e-12));
  CHECK(g >= best * std::pow(std::cos(kTwoPi / 256 / 2), 2.0) * 0.999);
}

TEST_CASE("refining the grid never raises the optimum") {
  ScenarioParams params;
  params.num_reflect = 1;
  params.num_transmit = 1;
  params.num_elements = 2;
  for (std::uint64_t seed : {1u, 7u}) {
    CAPTURE(seed);
    const ScenarioParams placed = place_users(params, seed);
    const ChannelRealization ch = gen_channels(placed, seed);
    for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
      GridSpec coarse;
      coarse.phase_points = 8;
      coarse.amplitude_points = 3;
      coarse.power_points = 6;
      coarse.bandwidth_points = 6;
      GridSpec fine;
      fine.phase_points = 16;
      fine.amplitude_points = 5;
      fine.power_points = 11;
      fine.bandwidth_points = 11;
      const OracleResult a = brute_force(placed, ch, mode, coarse);
      const OracleResult b = brute_force(placed, ch, mode, fine);
      CHECK(b.t <= a.t);
      CHECK(b.evaluations > a.evaluations);
    }
  }
}

TEST_CASE("reported point reproduces the reported latency") {
  ScenarioParams params;
  params.num_reflect = 1;
  params.num_transmit = 1;
  params.num_elements = 2;
  params = place_users(params, 7);
  const ChannelRealization ch = gen_channels(params, 7);
  for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
    GridSpec grid;
    grid.phase_points = 16;
    const OracleResult res = brute_force(params, ch, mode, grid);
    REQUIRE(std::isfinite(res.t));
    const Vec r = achieved_rates(res.state, res.star, ch, params);
    CHECK(max_latency(latency_energy(res.state, r, params).first) == doctest::Approx(res.t).epsilon(1e-9));
    CHECK(check_constraints(res.state, res.star, ch, params).max_violation <= 1e-9);
  }
}

TEST_CASE("oversized grids are refused") {
  ScenarioParams params;
  params = place_users(params, 0);
  const ChannelRealization ch = gen_channels(params, 0);
  try {
    brute_force(params, ch, AccessMode::kSdma);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBudgetExceeded);
  }

  ScenarioParams small;
  small.num_reflect = 1;
  small.num_transmit = 1;
  small.num_elements = 2;
  small = place_users(small, 0);
  GridSpec grid;
  grid.max_evaluations = 1000.0;
  CHECK_THROWS_AS(brute_force(small, gen_channels(small, 0), AccessMode::kSdma, grid), Error);
  grid = GridSpec{};
  grid.power_points = 1;
  CHECK_THROWS_AS(grid.validate(), Error);
}
