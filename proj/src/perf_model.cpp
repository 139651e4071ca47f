#include "starlat/perf_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace starlat {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

StarConfig StarConfig::uniform(int num_elements, double gamma_t) {
  StarConfig s;
  s.gamma_t = Vec::Constant(num_elements, gamma_t);
  s.gamma_r = Vec::Constant(num_elements, 1.0 - gamma_t);
  s.theta_r = Vec::Zero(num_elements);
  s.theta_t = Vec::Zero(num_elements);
  return s;
}

CVec StarConfig::lifted_vector(Side s) const {
  const int N = num_elements();
  const Vec& g = gamma(s);
  const Vec& th = theta(s);
  CVec v(N + 1);
  for (int n = 0; n < N; ++n) v[n] = std::polar(std::sqrt(std::max(g[n], 0.0)), th[n]);
  v[N] = 1.0;
  return v;
}

CMat StarConfig::lifted_matrix(Side s) const {
  const CVec v = lifted_vector(s);
  return v * v.adjoint();
}

void StarConfig::validate(double tol) const {
  const int N = num_elements();
  if (gamma_t.size() != N || theta_r.size() != N || theta_t.size() != N || N == 0) {
    throw Error(ErrorCode::kInvalidParams, "StarConfig vectors must all have N > 0 entries");
  }
  for (int n = 0; n < N; ++n) {
    if (gamma_r[n] < 0.0 || gamma_t[n] < 0.0) {
      throw Error(ErrorCode::kInvalidParams, "negative STAR amplitude");
    }
    if (std::abs(gamma_r[n] + gamma_t[n] - 1.0) > tol) {
      throw Error(ErrorCode::kInvalidParams, "STAR amplitudes must sum to one per element");
    }
  }
}

Vec composite_gains(const StarConfig& star, const ChannelRealization& ch) {
  const CVec vr = star.lifted_vector(Side::kReflection);
  const CVec vt = star.lifted_vector(Side::kTransmission);
  Vec g(ch.num_users);
  for (int k = 0; k < ch.num_users; ++k) {
    const CVec& v = ch.side[k] == Side::kReflection ? vr : vt;
    g[k] = std::norm(ch.cascade[k].cwiseProduct(v).sum());
  }
  return g;
}

Vec sdma_rate(const Vec& p, const Vec& gains, double bandwidth, double noise_power) {
  const Vec rx = p.cwiseProduct(gains);
  const double total = rx.sum() + noise_power;
  Vec r(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double interference = std::max(total - rx[k], noise_power);
    r[k] = bandwidth * std::log1p(rx[k] / interference) / std::numbers::ln2;
  }
  return r;
}

Vec fdma_rate(const Vec& p, const Vec& b, const Vec& gains, double bandwidth, double noise_power) {
  Vec r(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (b[k] <= 0.0) {
      r[k] = 0.0;
      continue;
    }
    r[k] = b[k] * bandwidth * std::log1p(p[k] * gains[k] / (b[k] * noise_power)) / std::numbers::ln2;
  }
  return r;
}

Vec surrogate_rate(const Vec& p, const Vec& gains, const Vec& y, double bandwidth, double noise_power) {
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (!(y[k] > 0.0)) {
      throw Error(ErrorCode::kNonPositiveAuxiliary, "auxiliary y must be positive", static_cast<int>(k));
    }
  }
  // ln S - y I + ln y + 1 = ln(1 + p g / I) + ln(y I) - (y I - 1), with the
  // last pair evaluated around y I = 1 to keep full precision near the update.
  const Vec rx = p.cwiseProduct(gains);
  Vec r(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    double interference = noise_power;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      if (j != k) interference += rx[j];
    }
    const double delta = std::fma(y[k], interference, -1.0);
    r[k] = bandwidth / std::numbers::ln2 * (std::log1p(rx[k] / interference) + std::log1p(delta) - delta);
  }
  return r;
}

Vec update_y(const Vec& p, const Vec& gains, double noise_power) {
  const Vec rx = p.cwiseProduct(gains);
  Vec y(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    double interference = noise_power;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      if (j != k) interference += rx[j];
    }
    y[k] = 1.0 / interference;
  }
  return y;
}

Vec sdma_rate(const Vec& p, const StarConfig& star, const ChannelRealization& ch,
              const ScenarioParams& params) {
  return sdma_rate(p, composite_gains(star, ch), params.bandwidth, params.noise_power());
}

Vec fdma_rate(const Vec& p, const Vec& b, const StarConfig& star, const ChannelRealization& ch,
              const ScenarioParams& params) {
  return fdma_rate(p, b, composite_gains(star, ch), params.bandwidth, params.noise_power());
}

Vec surrogate_rate(const Vec& p, const StarConfig& star, const Vec& y, const ChannelRealization& ch,
                   const ScenarioParams& params) {
  return surrogate_rate(p, composite_gains(star, ch), y, params.bandwidth, params.noise_power());
}

Vec update_y(const Vec& p, const StarConfig& star, const ChannelRealization& ch,
             const ScenarioParams& params) {
  return update_y(p, composite_gains(star, ch), params.noise_power());
}

std::pair<LatencyBreakdown, EnergyBreakdown> latency_energy(const AllocationState& state, const Vec& rates,
                                                            const ScenarioParams& params) {
  const int K = params.num_users();
  LatencyBreakdown lat{Vec(K), Vec(K), Vec(K), Vec(K)};
  EnergyBreakdown en{Vec(K), Vec(K), Vec(K)};
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    const double fl = state.f_local[k];
    const double fs = state.f_edge[k];
    lat.local[k] = fl > 0.0 ? u.workload / fl : kInf;
    lat.comm[k] = rates[k] > 0.0 ? params.payload_bits(k) / rates[k] : kInf;
    lat.edge[k] = fs > 0.0 ? params.edge_load(k) / fs : kInf;
    lat.total[k] = lat.local[k] + lat.comm[k] + lat.edge[k];
    en.local[k] = params.kappa * fl * fl * u.workload;
    en.comm[k] = state.p[k] > 0.0 ? state.p[k] * lat.comm[k] : 0.0;
    en.total[k] = en.local[k] + en.comm[k];
  }
  return {lat, en};
}

double max_latency(const LatencyBreakdown& lat) {
  double t = -kInf;
  for (Eigen::Index k = 0; k < lat.total.size(); ++k) {
    const double v = lat.total[k];
    if (!std::isfinite(v)) return kInf;
    t = std::max(t, v);
  }
  return t;
}

Vec achieved_rates(const AllocationState& state, const StarConfig& star, const ChannelRealization& ch,
                   const ScenarioParams& params) {
  const Vec g = composite_gains(star, ch);
  if (state.mode == AccessMode::kFdma) {
    return fdma_rate(state.p, state.b, g, params.bandwidth, params.noise_power());
  }
  return sdma_rate(state.p, g, params.bandwidth, params.noise_power());
}

ConstraintReport check_constraints(const AllocationState& state, const StarConfig& star,
                                   const ChannelRealization& ch, const ScenarioParams& params) {
  ConstraintReport rep;
  auto note = [&](double v, const std::string& what) {
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst = what;
    }
  };
  const int K = params.num_users();
  const Vec rates = achieved_rates(state, star, ch, params);
  const auto [lat, en] = latency_energy(state, rates, params);
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    const std::string tag = " (user " + std::to_string(k) + ")";
    note(-state.f_local[k] / u.f_max, "C1 lower" + tag);
    note(state.f_local[k] / u.f_max - 1.0, "C1 upper" + tag);
    note(-state.p[k] / u.p_max, "C2 lower" + tag);
    note(state.p[k] / u.p_max - 1.0, "C2 upper" + tag);
    note(en.total[k] / u.e_max - 1.0, "C5 energy" + tag);
    note(-state.f_edge[k] / params.bs_cpu, "C7" + tag);
  }
  note(state.f_edge.sum() / params.bs_cpu - 1.0, "C6 edge capacity");
  for (int n = 0; n < star.num_elements(); ++n) {
    note(std::abs(star.gamma_r[n] + star.gamma_t[n] - 1.0), "C4 amplitude coupling");
    note(-star.gamma_r[n], "C8");
    note(-star.gamma_t[n], "C8");
    for (double th : {star.theta_r[n], star.theta_t[n]}) {
      note(std::max(-th, th - kTwoPi) / kTwoPi, "C3 phase range");
    }
  }
  if (state.mode == AccessMode::kFdma) {
    note(state.b.sum() - 1.0, "FDMA simplex");
    for (int k = 0; k < K; ++k) note(-state.b[k], "FDMA b >= 0");
  }
  return rep;
}

}  // namespace starlat
