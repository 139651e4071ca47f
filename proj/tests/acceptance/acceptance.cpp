// Acceptance checks, one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "starlat/compute.hpp"
#include "starlat/harness.hpp"
#include "starlat/optimizer.hpp"
#include "starlat/oracle.hpp"
#include "starlat/star.hpp"

using namespace starlat;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Context {
  int seeds = 50;
  int workers = 1;
  std::string out_dir = "acceptance_out";
};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Outcome local_cpu() {
  Outcome o;
  auto expect_eq = [&](double got, double want, const char* what) {
    if (rel(got, want) > 1e-3) {
      o.pass = false;
      o.detail += std::string(what) + " gave " + fmt(got) + "; ";
    }
  };
  expect_eq(optimal_local_cpu(2.0, 0.5, 5e7, 1e-27, 1e9), 1e9, "capped example");
  expect_eq(optimal_local_cpu(2.0, 2.0 - 5e-3, 5e7, 1e-27, 1e9), 3.162e8, "energy-bound example");
  try {
    optimal_local_cpu(2.0, 2.1, 5e7, 1e-27, 1e9);
    o.pass = false;
    o.detail += "E_c > E_max did not throw; ";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInfeasibleEnergy) o.pass = false;
  }

  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int worst_steps = 0;
  for (int i = 0; i < 100; ++i) {
    const double e_max = 0.1 + 4.0 * u(rng), e_c = e_max * u(rng) * 0.999;
    const double w = std::pow(10.0, 6.0 + 2.0 * u(rng)), kappa = std::pow(10.0, -28.0 + 2.0 * u(rng));
    const double f_max = std::pow(10.0, 8.0 + 2.0 * u(rng));
    const double f = optimal_local_cpu(e_max, e_c, w, kappa, f_max);
    const int n = 10000;
    const double step = f_max / n;
    double best_f = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double fj = step * j;
      if (kappa * fj * fj * w + e_c <= e_max) best_f = fj;  // latency w/f falls with f
    }
    if (!(kappa * f * f * w + e_c <= e_max * (1 + 1e-12)) || w / f > w / best_f * (1 + 1e-12) || f - best_f > step) {
      o.pass = false;
    }
    worst_steps = std::max(worst_steps, static_cast<int>(std::ceil((f - best_f) / step)));
  }
  o.detail += "100 draws, closed form within " + std::to_string(worst_steps) + " grid step(s)";
  return o;
}

Outcome edge_kkt() {
  Outcome o;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_eq = 0.0, worst_kkt = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int K = 1 + static_cast<int>(u(rng) * 10.0);
    Vec prefix(K), load(K);
    for (int k = 0; k < K; ++k) {
      prefix[k] = 0.3 * u(rng);
      load[k] = std::pow(10.0, 8.0 + 1.5 * u(rng));
    }
    const double F = std::pow(10.0, 10.0 + u(rng));
    const EdgeAllocation e = solve_edge_allocation(prefix, load, F);
    worst_sum = std::max(worst_sum, rel(e.f_edge.sum(), F));
    Vec lat = prefix + load.cwiseQuotient(e.f_edge);
    worst_eq = std::max(worst_eq, (lat.maxCoeff() - lat.minCoeff()) / e.t);
    const KktReport r = verify_kkt(e.f_edge, e.t, e.duals, prefix, load, F);
    worst_kkt = std::max({worst_kkt, r.stationarity, r.normalization, r.latency_slackness, r.capacity_slackness,
                          r.nonnegativity});
    if (!r.ok()) o.pass = false;
  }
  o.pass = o.pass && worst_sum <= 1e-12 && worst_eq <= 1e-9 && worst_kkt <= 1e-6;
  o.detail = "sum f " + fmt(worst_sum) + ", latency spread " + fmt(worst_eq) + ", KKT " + fmt(worst_kkt);
  return o;
}

StarConfig random_star(std::mt19937_64& rng, int N) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StarConfig s = StarConfig::uniform(N);
  for (int n = 0; n < N; ++n) {
    s.gamma_t[n] = u(rng);
    s.gamma_r[n] = 1.0 - s.gamma_t[n];
    s.theta_r[n] = kTwoPi * u(rng);
    s.theta_t[n] = kTwoPi * u(rng);
  }
  return s;
}

Outcome lifting() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ScenarioParams p;
    p.num_elements = 1 + i % 16;
    p.num_reflect = 1 + i % 3;
    p.num_transmit = 1 + (i / 3) % 3;
    const ChannelRealization ch = gen_channels(place_users(p, i), i);
    const StarConfig star = random_star(rng, p.num_elements);
    const Vec lifted = lifted_gains(LiftedCoeff::from_config(star), ch);
    for (int k = 0; k < ch.num_users; ++k) {
      const Side s = ch.side[k];
      cplx h = ch.h_direct[k];
      for (int n = 0; n < p.num_elements; ++n) {
        h += std::conj(ch.h_bs_ris[n]) * std::sqrt(star.gamma(s)[n]) * std::polar(1.0, star.theta(s)[n]) *
             ch.h_ris_user[k][n];
      }
      worst = std::max(worst, rel(lifted[k], std::norm(h)));
    }
  }
  return {worst <= 1e-10, "1000 pairs, worst relative gap " + fmt(worst)};
}

Outcome surrogate() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_dom = 0.0, worst_tight = 0.0;
  const double B = 5e7, n0 = 5e-6;
  for (int i = 0; i < 1000; ++i) {
    const int K = 1 + i % 10;
    Vec p(K), g(K), y(K);
    for (int k = 0; k < K; ++k) {
      p[k] = u(rng);
      g[k] = std::pow(10.0, -9.0 + 4.0 * u(rng));
      y[k] = std::pow(10.0, 2.0 + 6.0 * u(rng));
    }
    const Vec r = sdma_rate(p, g, B, n0);
    const Vec s = surrogate_rate(p, g, y, B, n0);
    const Vec t = surrogate_rate(p, g, update_y(p, g, n0), B, n0);
    for (int k = 0; k < K; ++k) {
      worst_dom = std::max(worst_dom, (s[k] - r[k]) / std::max(std::abs(r[k]), 1.0));
      worst_tight = std::max(worst_tight, rel(t[k], r[k]));
    }
  }
  return {worst_dom <= 1e-12 && worst_tight <= 1e-9,
          "surrogate - rate <= " + fmt(worst_dom) + " (rel), gap after update " + fmt(worst_tight)};
}

AllocationState start_state(const ScenarioParams& params, const ChannelRealization& ch, AccessMode mode) {
  const int K = params.num_users();
  AllocationState st;
  st.mode = mode;
  st.p = Vec::Ones(K);
  st.b = Vec::Constant(K, 1.0 / K);
  st.f_local = Vec::Constant(K, params.user_template.f_max);
  st.f_edge = Vec::Constant(K, params.bs_cpu / K);
  st.y = update_y(st.p, StarConfig::uniform(params.num_elements), ch, params);
  return st;
}

Outcome penalty_method() {
  Outcome o;
  const ScenarioParams params = place_users(ScenarioParams{}, 0);
  const ChannelRealization ch = gen_channels(params, 0);
  double worst_rise = 0.0, worst_rank = 0.0, slowest = 0.0;
  for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
    const auto t0 = std::chrono::steady_clock::now();
    const StarSubproblem sp = make_star_subproblem(params, ch, start_state(params, ch, mode));
    const Algorithm1Result res =
        run_algorithm1(sp, LiftedCoeff::from_config(StarConfig::uniform(params.num_elements)));
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const auto& tr = res.state.trace;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      if (tr[i].nu != tr[i - 1].nu) continue;
      worst_rise = std::max(worst_rise, (tr[i].objective - tr[i - 1].objective) / std::abs(tr[i - 1].objective));
    }
    worst_rank = std::max({worst_rank, res.state.residual_r / res.v.v_r.trace().real(),
                           res.state.residual_t / res.v.v_t.trace().real()});
  }
  o.pass = worst_rise <= 1e-8 && worst_rank <= 1e-4 && slowest < 60.0;
  o.detail = "largest rise " + fmt(worst_rise) + ", rank residual/Tr " + fmt(worst_rank) + ", slowest run " +
             fmt(slowest) + " s";
  return o;
}

Outcome outer_convergence() {
  Outcome o;
  int converged = 0, total = 0, max_iters = 0;
  double worst_rise = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScenarioParams params = place_users(ScenarioParams{}, seed);
    const ChannelRealization ch = gen_channels(params, seed);
    for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
      const SolveReport rep = mode == AccessMode::kSdma ? run_sdma(params, ch) : run_fdma(params, ch);
      ++total;
      if (rep.status == SolveStatus::kConverged && rep.num_iters <= 50) ++converged;
      else o.detail += std::string(to_string(mode)) + " seed " + std::to_string(seed) + " " + to_string(rep.status) + "; ";
      max_iters = std::max(max_iters, rep.num_iters);
      for (std::size_t i = 1; i < rep.trace.size(); ++i) {
        worst_rise = std::max(worst_rise, rep.trace[i] - rep.trace[i - 1]);
      }
    }
  }
  o.pass = converged == total && worst_rise <= 1e-8;
  o.detail += std::to_string(converged) + "/" + std::to_string(total) + " converged, most iterations " +
              std::to_string(max_iters) + ", largest rise " + fmt(worst_rise);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  ScenarioParams base;
  base.num_reflect = 1;
  base.num_transmit = 1;
  base.num_elements = 2;
  double worst = -1.0;
  for (std::uint64_t seed : {1u, 3u, 5u, 7u, 9u}) {
    const ScenarioParams params = place_users(base, seed);
    const ChannelRealization ch = gen_channels(params, seed);
    for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
      const OracleResult ref = brute_force(params, ch, mode);
      const SolveReport rep = mode == AccessMode::kSdma ? run_sdma(params, ch) : run_fdma(params, ch);
      const double gap = (rep.t - ref.t) / ref.t;
      worst = std::max(worst, gap);
      if (!std::isfinite(ref.t) || !(gap <= 0.05)) {
        o.pass = false;
        o.detail += std::string(to_string(mode)) + " seed " + std::to_string(seed) + " gap " + fmt(gap) + "; ";
      }
    }
  }
  o.detail += "10 runs, largest gap above the oracle " + fmt(100.0 * worst) + "%";
  return o;
}

// Sweep outputs shared by criteria 8-10.
struct Sweeps {
  std::map<std::string, json> summary;
};

json run_figure(const Context& ctx, const std::string& name, const std::string& param, std::vector<double> values,
                std::vector<std::string> schemes) {
  HarnessConfig cfg;
  cfg.has_sweep = true;
  cfg.sweep.param = param;
  cfg.sweep.values = std::move(values);
  for (int s = 0; s < ctx.seeds; ++s) cfg.sweep.seeds.push_back(s);
  cfg.sweep.schemes = std::move(schemes);
  RunOptions opts;
  opts.out_dir = std::filesystem::path(ctx.out_dir) / name;
  opts.workers = ctx.workers;
  const auto t0 = std::chrono::steady_clock::now();
  json s = run_sweep(cfg, opts).summary;
  std::cout << "      sweep " << name << " done in "
            << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << " s" << std::endl;
  return s;
}

std::vector<double> means(const json& summary, const std::string& scheme) {
  std::vector<double> out;
  for (const json& row : summary["schemes"][scheme]) {
    out.push_back(row["mean_t"].is_null() ? std::numeric_limits<double>::infinity() : row["mean_t"].get<double>());
  }
  return out;
}

const json& row_at(const json& summary, const std::string& scheme, double value) {
  for (const json& row : summary["schemes"][scheme]) {
    if (row["value"].get<double>() == value) return row;
  }
  throw std::runtime_error("missing value in summary");
}

Outcome trends(const Context& ctx, Sweeps& sw) {
  struct Fig {
    std::string name, param;
    std::vector<double> values;
    int direction;  // -1 decreasing, +1 increasing
    std::vector<std::string> schemes;
  };
  const std::vector<Fig> figs = {
      {"bandwidth", "B", {1e7, 2e7, 3e7, 4e7, 5e7}, -1, {"proposed-sdma"}},
      {"power", "p_max", {0.2, 0.4, 0.6, 0.8, 1.0}, -1, {"proposed-sdma", "proposed-fdma"}},
      {"model_size", "d", {100, 125, 150, 175, 200}, +1, {"proposed-sdma"}},
      {"edge_cpu", "F", {1e10, 1.5e10, 2e10, 2.5e10, 3e10}, -1,
       {"proposed-sdma", "reflect-only", "transmit-only", "random-phase"}},
      {"elements", "N", {8, 12, 16, 20, 24}, -1, {"proposed-sdma"}},
      {"users", "K", {4, 6, 8, 10, 12}, +1, {"proposed-sdma"}},
  };
  Outcome o;
  for (const Fig& f : figs) {
    const json s = run_figure(ctx, f.name, f.param, f.values, f.schemes);
    sw.summary[f.name] = s;
    const std::vector<double> m = means(s, "proposed-sdma");
    bool ok = true;
    std::ostringstream line;
    line << f.param << ":";
    for (std::size_t i = 0; i < m.size(); ++i) {
      line << " " << fmt(m[i]);
      if (i > 0 && !(f.direction < 0 ? m[i] < m[i - 1] : m[i] > m[i - 1])) ok = false;
    }
    line << (ok ? " ok" : " OUT OF ORDER");
    std::cout << "      " << line.str() << std::endl;
    o.pass = o.pass && ok;
    if (!ok) o.detail += f.param + " out of order; ";
  }
  o.detail += "6 sweeps x 5 values x " + std::to_string(ctx.seeds) + " seeds (proposed SDMA means)";
  return o;
}

Outcome baselines(Sweeps& sw) {
  Outcome o;
  const json& s = sw.summary.at("edge_cpu");
  const std::vector<double> prop = means(s, "proposed-sdma");
  for (const std::string& b : {"reflect-only", "transmit-only", "random-phase"}) {
    const std::vector<double> m = means(s, b);
    double avg_prop = 0.0, avg_base = 0.0, min_red = 1.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      avg_prop += prop[i];
      avg_base += m[i];
      min_red = std::min(min_red, (m[i] - prop[i]) / m[i]);
    }
    const double red = (avg_base - avg_prop) / avg_base;
    bool ok = avg_prop < avg_base;
    if (b != "transmit-only") ok = ok && red >= 0.10;
    int infeasible = 0;
    for (const json& row : s["schemes"][b]) infeasible += row["infeasible"].get<int>();
    o.pass = o.pass && ok;
    o.detail += b + " -" + fmt(100.0 * red) + "% (min over F " + fmt(100.0 * min_red) + "%, " +
                std::to_string(infeasible) + " infeasible runs); ";
  }
  return o;
}

Outcome crossover(Sweeps& sw) {
  Outcome o;
  const json& s = sw.summary.at("power");
  for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    const json& a = row_at(s, "proposed-sdma", p);
    const json& b = row_at(s, "proposed-fdma", p);
    const double ms = a["mean_t"].get<double>(), mf = b["mean_t"].get<double>();
    const bool want_sdma = p < 0.3;
    const bool ok = want_sdma ? ms <= mf : mf <= ms;
    o.pass = o.pass && ok;
    o.detail += "p=" + fmt(p) + " SDMA " + fmt(ms) + "+-" + fmt(a["ci95"].get<double>()) + " FDMA " + fmt(mf) +
                "+-" + fmt(b["ci95"].get<double>()) + (ok ? "; " : " (reversed); ");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.workers = default_workers();
  std::string only = "1-10";
  CLI::App app{"Acceptance criteria"};
  app.add_option("--seeds", ctx.seeds, "Monte Carlo seeds for the sweeps")->check(CLI::PositiveNumber);
  app.add_option("--workers", ctx.workers, "Worker threads for the sweeps")->check(CLI::PositiveNumber);
  app.add_option("--out", ctx.out_dir, "Directory for sweep outputs");
  app.add_option("--only", only, "Criteria to run, e.g. 1-7 or 8,9,10");
  CLI11_PARSE(app, argc, argv);

  std::set<int> chosen;
  std::stringstream ss(only);
  for (std::string part; std::getline(ss, part, ',');) {
    const auto dash = part.find('-');
    const int lo = std::stoi(part.substr(0, dash));
    const int hi = dash == std::string::npos ? lo : std::stoi(part.substr(dash + 1));
    for (int c = lo; c <= hi; ++c) chosen.insert(c);
  }
  if (chosen.count(9) || chosen.count(10)) chosen.insert(8);

  Sweeps sw;
  struct Criterion {
    int id;
    const char* name;
    bool soft;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "closed-form local CPU", false, local_cpu},
      {2, "edge allocation KKT structure", false, edge_kkt},
      {3, "lifting identity", false, lifting},
      {4, "surrogate tightness and domination", false, surrogate},
      {5, "penalty method", false, penalty_method},
      {6, "outer convergence", false, outer_convergence},
      {7, "oracle equivalence", false, oracle_equivalence},
      {8, "trend reproduction", false, [&] { return trends(ctx, sw); }},
      {9, "baseline dominance", false, [&] { return baselines(sw); }},
      {10, "FDMA/SDMA crossover (report only)", true, [&] { return crossover(sw); }},
  };

  bool all_pass = true;
  for (const Criterion& c : all) {
    if (!chosen.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.pass ? "PASS" : (c.soft ? "SOFT-FAIL" : "FAIL");
    std::cout << tag << " [" << c.id << "] " << c.name << " (" << fmt(secs) << " s): " << o.detail << std::endl;
    if (!o.pass && !c.soft) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
