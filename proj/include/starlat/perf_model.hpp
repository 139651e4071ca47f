#pragma once

#include <string>
#include <utility>

#include "starlat/common.hpp"
#include "starlat/scenario.hpp"

namespace starlat {

// Amplitude/phase form of the STAR-RIS coefficients (energy-splitting mode).
struct StarConfig {
  Vec gamma_r, gamma_t;  // amplitudes (power split), gamma_r + gamma_t = 1
  Vec theta_r, theta_t;  // phases in [0, 2pi)

  static StarConfig uniform(int num_elements, double gamma_t = 0.5);

  int num_elements() const { return static_cast<int>(gamma_r.size()); }
  const Vec& gamma(Side s) const { return s == Side::kReflection ? gamma_r : gamma_t; }
  const Vec& theta(Side s) const { return s == Side::kReflection ? theta_r : theta_t; }

  // [sqrt(gamma_n) e^{j theta_n}; 1]
  CVec lifted_vector(Side s) const;
  CMat lifted_matrix(Side s) const;

  void validate(double tol = 1e-9) const;
};

// |h_d,k + h_r^H Gamma_{i(k)} h_I,k|^2 for every user.
Vec composite_gains(const StarConfig& star, const ChannelRealization& ch);

struct AllocationState {
  AccessMode mode = AccessMode::kSdma;
  Vec p;        // W
  Vec b;        // bandwidth fractions (FDMA only)
  Vec f_local;  // cycles/s
  Vec f_edge;   // cycles/s
  Vec y;        // auxiliary, 1/W (SDMA only)
  double t = 0.0;
};

struct LatencyBreakdown {
  Vec local, comm, edge, total;
};

struct EnergyBreakdown {
  Vec local, comm, total;
};

// Core rate formulas operate on precomputed composite gains.
Vec sdma_rate(const Vec& p, const Vec& gains, double bandwidth, double noise_power);
Vec fdma_rate(const Vec& p, const Vec& b, const Vec& gains, double bandwidth, double noise_power);
Vec surrogate_rate(const Vec& p, const Vec& gains, const Vec& y, double bandwidth, double noise_power);
Vec update_y(const Vec& p, const Vec& gains, double noise_power);

Vec sdma_rate(const Vec& p, const StarConfig& star, const ChannelRealization& ch,
              const ScenarioParams& params);
Vec fdma_rate(const Vec& p, const Vec& b, const StarConfig& star, const ChannelRealization& ch,
              const ScenarioParams& params);
Vec surrogate_rate(const Vec& p, const StarConfig& star, const Vec& y, const ChannelRealization& ch,
                   const ScenarioParams& params);
Vec update_y(const Vec& p, const StarConfig& star, const ChannelRealization& ch,
             const ScenarioParams& params);

// Zero denominators give +inf latency entries rather than throwing.
std::pair<LatencyBreakdown, EnergyBreakdown> latency_energy(const AllocationState& state, const Vec& rates,
                                                            const ScenarioParams& params);

double max_latency(const LatencyBreakdown& lat);

// Rates the state achieves under its access mode (true rates, not the surrogate).
Vec achieved_rates(const AllocationState& state, const StarConfig& star, const ChannelRealization& ch,
                   const ScenarioParams& params);

// Largest violation of the problem constraints (box limits on p/f_l, energy
// budget, edge capacity, amplitude coupling, FDMA simplex), in units relative
// to each constraint's scale. Zero means feasible.
struct ConstraintReport {
  double max_violation = 0.0;
  std::string worst;
};
ConstraintReport check_constraints(const AllocationState& state, const StarConfig& star,
                                   const ChannelRealization& ch, const ScenarioParams& params);

}  // namespace starlat
