#include "starlat/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "starlat/compute.hpp"
#include "starlat/power.hpp"

namespace starlat {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "Converged";
    case SolveStatus::kMaxIters: return "MaxIters";
    case SolveStatus::kInfeasible: return "Infeasible";
  }
  return "?";
}

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kProposed: return "Proposed";
    case Scheme::kReflectOnly: return "ReflectOnly";
    case Scheme::kTransmitOnly: return "TransmitOnly";
    case Scheme::kRandomPhase: return "RandomPhase";
  }
  return "?";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double true_latency(const AllocationState& st, const StarConfig& star, const ChannelRealization& ch,
                    const ScenarioParams& params) {
  const Vec r = achieved_rates(st, star, ch, params);
  return max_latency(latency_energy(st, r, params).first);
}

// Local CPU from the remaining energy, then the edge water level, both with
// the true rates of `star`. Returns false when some user has no energy left.
bool resolve_compute(AllocationState& st, const StarConfig& star, const ChannelRealization& ch,
                     const ScenarioParams& params, BlockTimings* timings) {
  const int K = params.num_users();
  auto t0 = Clock::now();
  const Vec r = achieved_rates(st, star, ch, params);
  Vec prefix(K), load(K);
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    if (!(r[k] > 0.0)) return false;
    const double t_comm = params.payload_bits(k) / r[k];
    const double e_comm = st.p[k] * t_comm;
    if (!(e_comm < u.e_max)) return false;
    st.f_local[k] = optimal_local_cpu(u.e_max, e_comm, u.workload, params.kappa, u.f_max);
    prefix[k] = u.workload / st.f_local[k] + t_comm;
    load[k] = params.edge_load(k);
  }
  if (timings) timings->cpu += seconds_since(t0);
  t0 = Clock::now();
  const EdgeAllocation edge = solve_edge_allocation(prefix, load, params.bs_cpu);
  st.f_edge = edge.f_edge;
  if (timings) timings->edge += seconds_since(t0);
  return true;
}

AllocationState initial_state(const ScenarioParams& params, const ChannelRealization& ch, const StarConfig& star,
                              AccessMode mode) {
  const int K = params.num_users();
  AllocationState st;
  st.mode = mode;
  st.p.resize(K);
  st.f_local.resize(K);
  for (int k = 0; k < K; ++k) {
    st.p[k] = params.user(k).p_max;
    st.f_local[k] = params.user(k).f_max;
  }
  st.b = Vec::Constant(K, 1.0 / K);
  st.f_edge = Vec::Constant(K, params.bs_cpu / K);

  // Halve all powers together until every upload fits the energy budget.
  auto comm_fits = [&](const Vec& r) {
    for (int k = 0; k < K; ++k) {
      if (!(r[k] > 0.0) || !(st.p[k] * params.payload_bits(k) / r[k] < params.user(k).e_max)) return false;
    }
    return true;
  };
  Vec r = achieved_rates(st, star, ch, params);
  for (int i = 0; i < 60 && !comm_fits(r); ++i) {
    st.p *= 0.5;
    r = achieved_rates(st, star, ch, params);
  }
  if (mode == AccessMode::kSdma) st.y = update_y(st.p, star, ch, params);

  // Lower f_l where f_max would break the energy budget.
  for (int k = 0; k < K; ++k) {
    const UserParams& u = params.user(k);
    if (!(r[k] > 0.0)) continue;
    const double e_comm = st.p[k] * params.payload_bits(k) / r[k];
    if (params.kappa * u.f_max * u.f_max * u.workload + e_comm > u.e_max && e_comm < u.e_max) {
      st.f_local[k] = optimal_local_cpu(u.e_max, e_comm, u.workload, params.kappa, u.f_max);
    }
  }
  return st;
}

bool energy_feasible(const AllocationState& st, const StarConfig& star, const ChannelRealization& ch,
                     const ScenarioParams& params) {
  const Vec r = achieved_rates(st, star, ch, params);
  const EnergyBreakdown en = latency_energy(st, r, params).second;
  for (int k = 0; k < params.num_users(); ++k) {
    if (!(en.total[k] <= params.user(k).e_max * (1.0 + 1e-9))) return false;
  }
  return true;
}

StarFreedom freedom_of(Scheme scheme) {
  switch (scheme) {
    case Scheme::kReflectOnly: return StarFreedom::kReflectionOnly;
    case Scheme::kTransmitOnly: return StarFreedom::kTransmissionOnly;
    default: return StarFreedom::kBoth;
  }
}

SolveReport run(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg,
                AccessMode mode, Scheme scheme) {
  params.validate();
  if (ch.num_users != params.num_users() || ch.num_elements != params.num_elements) {
    throw Error(ErrorCode::kCountMismatch, "channel realization does not match the scenario");
  }
  SolveReport rep;
  rep.mode = mode;
  rep.scheme = scheme;
  rep.star = initial_star(params, ch, cfg, scheme);
  rep.state = initial_state(params, ch, rep.star, mode);
  double t_prev = energy_feasible(rep.state, rep.star, ch, params) ? true_latency(rep.state, rep.star, ch, params)
                                                                    : kInf;
  rep.trace.push_back(t_prev);

  auto fail = [&](const Error& e, const char* block) {
    rep.status = SolveStatus::kInfeasible;
    rep.message = e.what();
    rep.infeasible_user = e.user();
    rep.infeasible_block = e.block().empty() ? block : e.block();
  };

  for (int n = 1; n <= cfg.max_iters; ++n) {
    IterationRecord rec;
    rec.n = n;
    AllocationState st = rep.state;
    const BlockTimings timings_before = rep.timings;
    const WorkCounters work_before = rep.work;

    // Power (and bandwidth for FDMA).
    auto t0 = Clock::now();
    try {
      const PowerSubproblemInput in = make_power_input(params, composite_gains(rep.star, ch), st, cfg.edge_aware);
      const PowerSolution sol = mode == AccessMode::kSdma ? solve_power_sdma(in) : solve_power_bandwidth_fdma(in);
      st.p = sol.p;
      if (mode == AccessMode::kFdma) st.b = sol.b;
      rep.work.power += sol.work;
    } catch (const Error& e) {
      rep.timings.power += seconds_since(t0);
      fail(e, "power");
      break;
    }
    rep.timings.power += seconds_since(t0);
    rec.t_power = true_latency(st, rep.star, ch, params);

    // STAR coefficients; the candidate must beat the incoming set once the
    // compute blocks are re-solved for both.
    StarConfig star = rep.star;
    AllocationState with_incoming = st;
    if (!resolve_compute(with_incoming, star, ch, params, &rep.timings)) {
      rep.status = SolveStatus::kInfeasible;
      rep.message = "no energy left for local computing";
      rep.infeasible_block = "cpu";
      break;
    }
    double t_best = true_latency(with_incoming, star, ch, params);
    st = with_incoming;
    if (scheme != Scheme::kRandomPhase) {
      t0 = Clock::now();
      try {
        const StarSubproblem sp = make_star_subproblem(params, ch, with_incoming, freedom_of(scheme), cfg.edge_aware);
        const Algorithm1Result a1 = run_algorithm1(sp, LiftedCoeff::from_config(rep.star), cfg.penalty);
        rep.work.star_newton += a1.state.newton_steps;
        rep.work.star_iterates += a1.state.j;
        rep.work.escalations += a1.state.escalations;
        rec.residual_r = a1.state.residual_r;
        rec.residual_t = a1.state.residual_t;
        rec.nu = a1.state.nu;
        rec.star_iterates = a1.state.j;
        const StarConfig cand = extract_rank_one(a1.v, cfg.penalty.rank_tol);
        AllocationState with_cand = st;
        if (resolve_compute(with_cand, cand, ch, params, nullptr)) {
          const double t_cand = true_latency(with_cand, cand, ch, params);
          if (t_cand <= t_best && energy_feasible(with_cand, cand, ch, params)) {
            t_best = t_cand;
            star = cand;
            st = with_cand;
            rec.star_accepted = true;
          }
        }
        if (!rec.star_accepted) ++rep.work.star_rejected;
      } catch (const PenaltyStallError& e) {
        ++rep.work.penalty_stalls;
        rep.work.star_newton += e.state().newton_steps;
        rep.work.star_iterates += e.state().j;
        rec.residual_r = e.state().residual_r;
        rec.residual_t = e.state().residual_t;
        rec.nu = e.state().nu;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kRankTooHigh) {
          rep.timings.star += seconds_since(t0);
          fail(e, "star");
          break;
        }
      }
      rep.timings.star += seconds_since(t0);
    }
    rec.t_star = t_best;

    // Compute blocks once more for the kept coefficients, then the auxiliary.
    if (!resolve_compute(st, star, ch, params, &rep.timings)) {
      rep.status = SolveStatus::kInfeasible;
      rep.message = "no energy left for local computing";
      rep.infeasible_block = "cpu";
      break;
    }
    t0 = Clock::now();
    if (mode == AccessMode::kSdma) st.y = update_y(st.p, star, ch, params);
    rep.timings.aux += seconds_since(t0);

    const double t = true_latency(st, star, ch, params);
    rec.t = t;
    rec.work = rep.work.power + rep.work.star_newton;
    rec.power_work = rep.work.power - work_before.power;
    rec.star_work = rep.work.star_newton - work_before.star_newton;
    rec.timings.power = rep.timings.power - timings_before.power;
    rec.timings.star = rep.timings.star - timings_before.star;
    rec.timings.cpu = rep.timings.cpu - timings_before.cpu;
    rec.timings.edge = rep.timings.edge - timings_before.edge;
    rec.timings.aux = rep.timings.aux - timings_before.aux;
    rep.state = st;
    rep.star = star;
    rep.trace.push_back(t);
    rep.iterations.push_back(rec);
    rep.num_iters = n;

    const double change = std::isfinite(t_prev) ? std::abs(t_prev - t) / t_prev : kInf;
    t_prev = t;
    if (change < cfg.rel_tol) {
      rep.status = SolveStatus::kConverged;
      break;
    }
  }
  rep.t = rep.trace.back();
  return rep;
}

}  // namespace

StarConfig initial_star(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg,
                        Scheme scheme) {
  const int N = params.num_elements;
  switch (scheme) {
    case Scheme::kReflectOnly: return StarConfig::uniform(N, 0.0);
    case Scheme::kTransmitOnly: return StarConfig::uniform(N, 1.0);
    case Scheme::kRandomPhase: {
      StarConfig s = StarConfig::uniform(N, 0.5);
      std::seed_seq seq{static_cast<std::uint32_t>(ch.seed), static_cast<std::uint32_t>(ch.seed >> 32),
                        static_cast<std::uint32_t>(cfg.phase_seed), static_cast<std::uint32_t>(cfg.phase_seed >> 32),
                        0x9e3779b9u};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> u(0.0, kTwoPi);
      for (int n = 0; n < N; ++n) s.theta_r[n] = u(rng);
      for (int n = 0; n < N; ++n) s.theta_t[n] = u(rng);
      return s;
    }
    case Scheme::kProposed: break;
  }
  return StarConfig::uniform(N, 0.5);
}

SolveReport run_sdma(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg) {
  return run(params, ch, cfg, AccessMode::kSdma, Scheme::kProposed);
}

SolveReport run_fdma(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg) {
  return run(params, ch, cfg, AccessMode::kFdma, Scheme::kProposed);
}

SolveReport run_baseline(const ScenarioParams& params, const ChannelRealization& ch, const OptimizerConfig& cfg,
                         Scheme scheme) {
  if (scheme == Scheme::kProposed) throw Error(ErrorCode::kInvalidParams, "run_baseline needs a benchmark scheme");
  return run(params, ch, cfg, AccessMode::kSdma, scheme);
}

}  // namespace starlat
