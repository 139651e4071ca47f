#include "starlat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "starlat/compute.hpp"

namespace starlat {

void GridSpec::validate() const {
  if (phase_points < 2 || amplitude_points < 2 || power_points < 2 || bandwidth_points < 2) {
    throw Error(ErrorCode::kInvalidParams, "grid counts must be at least 2");
  }
  if (!(max_evaluations > 0.0)) throw Error(ErrorCode::kInvalidParams, "max_evaluations must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One phase choice for a side and the gains it gives that side's users.
struct SideChoice {
  std::vector<int> phase;
  std::vector<double> gains;
};

bool dominates(const SideChoice& a, const SideChoice& b) {
  for (std::size_t i = 0; i < a.gains.size(); ++i) {
    if (a.gains[i] < b.gains[i]) return false;
  }
  return true;
}

// Mixed-radix counter over `digits` positions with `base` values each.
bool next_tuple(std::vector<int>& idx, int base) {
  for (int& d : idx) {
    if (++d < base) return true;
    d = 0;
  }
  return false;
}

std::vector<std::vector<int>> simplex_grid(int K, int steps) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(K, 0);
  auto rec = [&](auto&& self, int k, int left) -> void {
    if (k == K - 1) {
      cur[k] = left;
      out.push_back(cur);
      return;
    }
    for (int i = 0; i <= left; ++i) {
      cur[k] = i;
      self(self, k + 1, left - i);
    }
  };
  rec(rec, 0, steps);
  return out;
}

class Evaluator {
 public:
  Evaluator(const ScenarioParams& params, AccessMode mode) : params_(params), mode_(mode) {
    const int K = params.num_users();
    load_.resize(K);
    payload_.resize(K);
    for (int k = 0; k < K; ++k) {
      load_[k] = params.edge_load(k);
      payload_[k] = params.payload_bits(k);
    }
  }

  // Max latency with closed-form CPU and edge blocks; +inf if infeasible.
  double operator()(const Vec& gains, const Vec& p, const Vec& b, Vec* f_local = nullptr,
                    Vec* f_edge = nullptr) const {
    const int K = static_cast<int>(gains.size());
    const Vec r = mode_ == AccessMode::kSdma
                      ? sdma_rate(p, gains, params_.bandwidth, params_.noise_power())
                      : fdma_rate(p, b, gains, params_.bandwidth, params_.noise_power());
    Vec prefix(K), fl(K);
    for (int k = 0; k < K; ++k) {
      if (!(r[k] > 0.0)) return kInf;
      const UserParams& u = params_.user(k);
      const double t_comm = payload_[k] / r[k];
      const double e_comm = p[k] * t_comm;
      if (!(e_comm < u.e_max)) return kInf;
      fl[k] = optimal_local_cpu(u.e_max, e_comm, u.workload, params_.kappa, u.f_max);
      prefix[k] = u.workload / fl[k] + t_comm;
    }
    const EdgeAllocation edge = solve_edge_allocation(prefix, load_, params_.bs_cpu);
    if (f_local) *f_local = fl;
    if (f_edge) *f_edge = edge.f_edge;
    return edge.t;
  }

 private:
  const ScenarioParams& params_;
  AccessMode mode_;
  Vec load_, payload_;
};

}  // namespace

OracleResult brute_force(const ScenarioParams& params, const ChannelRealization& ch, AccessMode mode,
                         const GridSpec& grid) {
  params.validate();
  grid.validate();
  const int K = params.num_users();
  const int N = params.num_elements;
  if (ch.num_users != K || ch.num_elements != N) {
    throw Error(ErrorCode::kCountMismatch, "channel realization does not match the scenario");
  }

  std::vector<int> users[2];
  for (int k = 0; k < K; ++k) users[static_cast<int>(ch.side[k])].push_back(k);

  const double A = grid.amplitude_points, P = grid.phase_points;
  double evaluations = 0.0;
  for (int s = 0; s < 2; ++s) {
    if (!users[s].empty()) evaluations += std::pow(A, N) * std::pow(P, N);
  }
  if (evaluations > grid.max_evaluations) {
    throw Error(ErrorCode::kBudgetExceeded, "coefficient grid exceeds the evaluation budget");
  }

  std::vector<double> phase_val(grid.phase_points);
  for (int i = 0; i < grid.phase_points; ++i) phase_val[i] = kTwoPi * i / grid.phase_points;

  // Pareto-maximal phase choices per side for every amplitude vector.
  std::vector<std::vector<SideChoice>> fronts;
  std::vector<std::pair<std::vector<int>, std::size_t>> amp_fronts;  // amplitude tuple, index of side 0 front
  std::vector<int> amp(N, 0);
  do {
    amp_fronts.emplace_back(amp, fronts.size());
    for (int s = 0; s < 2; ++s) {
      std::vector<SideChoice> front;
      if (users[s].empty()) {
        front.push_back({std::vector<int>(N, 0), {}});
        fronts.push_back(std::move(front));
        continue;
      }
      CVec scaled(N);
      for (int n = 0; n < N; ++n) {
        const double g_t = static_cast<double>(amp[n]) / (grid.amplitude_points - 1);
        scaled[n] = std::sqrt(s == static_cast<int>(Side::kTransmission) ? g_t : 1.0 - g_t);
      }
      std::vector<SideChoice> all;
      std::vector<int> ph(N, 0);
      do {
        SideChoice c{ph, {}};
        for (int k : users[s]) {
          cplx acc = ch.cascade[k][N];
          for (int n = 0; n < N; ++n) acc += ch.cascade[k][n] * scaled[n] * std::polar(1.0, phase_val[ph[n]]);
          c.gains.push_back(std::norm(acc));
        }
        all.push_back(std::move(c));
      } while (next_tuple(ph, grid.phase_points));
      std::stable_sort(all.begin(), all.end(),
                       [](const SideChoice& a, const SideChoice& b) { return a.gains[0] > b.gains[0]; });
      for (const SideChoice& c : all) {
        bool dominated = false;
        for (const SideChoice& f : front) dominated = dominated || dominates(f, c);
        if (!dominated) front.push_back(c);
      }
      fronts.push_back(std::move(front));
    }
  } while (next_tuple(amp, grid.amplitude_points));

  std::vector<std::vector<int>> bw;
  if (mode == AccessMode::kFdma) {
    bw = simplex_grid(K, grid.bandwidth_points - 1);
  } else {
    bw.push_back(std::vector<int>(K, 0));
  }
  double combos = 0.0;
  for (const auto& af : amp_fronts) combos += double(fronts[af.second].size()) * fronts[af.second + 1].size();
  const double point_evals = combos * std::pow(double(grid.power_points), K) * bw.size();
  evaluations += point_evals;
  if (evaluations > grid.max_evaluations) {
    throw Error(ErrorCode::kBudgetExceeded, "power grid exceeds the evaluation budget");
  }

  const Evaluator eval(params, mode);
  OracleResult best;
  best.t = kInf;
  best.evaluations = evaluations;
  const std::vector<int>* best_amp = nullptr;
  const SideChoice* best_side[2] = {nullptr, nullptr};
  Vec best_p, best_b;

  Vec gains(K), p(K), b(K);
  for (const auto& [a, f0] : amp_fronts) {
    for (const SideChoice& c0 : fronts[f0]) {
      for (const SideChoice& c1 : fronts[f0 + 1]) {
        for (std::size_t i = 0; i < users[0].size(); ++i) gains[users[0][i]] = c0.gains[i];
        for (std::size_t i = 0; i < users[1].size(); ++i) gains[users[1][i]] = c1.gains[i];
        for (const auto& bi : bw) {
          for (int k = 0; k < K; ++k) b[k] = mode == AccessMode::kFdma ? double(bi[k]) / (grid.bandwidth_points - 1) : 1.0;
          std::vector<int> pi(K, 0);
          do {
            for (int k = 0; k < K; ++k) p[k] = params.user(k).p_max * pi[k] / (grid.power_points - 1);
            const double t = eval(gains, p, b);
            if (t < best.t) {
              best.t = t;
              best_amp = &a;
              best_side[0] = &c0;
              best_side[1] = &c1;
              best_p = p;
              best_b = b;
            }
          } while (next_tuple(pi, grid.power_points));
        }
      }
    }
  }

  StarConfig& star = best.star;
  star = StarConfig::uniform(N, 0.5);
  AllocationState& st = best.state;
  st.mode = mode;
  if (!best_amp) return best;

  for (int n = 0; n < N; ++n) {
    star.gamma_t[n] = double((*best_amp)[n]) / (grid.amplitude_points - 1);
    star.gamma_r[n] = 1.0 - star.gamma_t[n];
    star.theta_r[n] = phase_val[best_side[static_cast<int>(Side::kReflection)]->phase[n]];
    star.theta_t[n] = phase_val[best_side[static_cast<int>(Side::kTransmission)]->phase[n]];
  }
  const Vec g = composite_gains(star, ch);
  st.p = best_p;
  if (mode == AccessMode::kFdma) st.b = best_b;
  eval(g, best_p, best_b, &st.f_local, &st.f_edge);
  if (mode == AccessMode::kSdma) st.y = update_y(best_p, g, params.noise_power());
  st.t = best.t;
  return best;
}

}  // namespace starlat
