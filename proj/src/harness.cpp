#include "starlat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "starlat/perf_model.hpp"

namespace starlat {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(path_ + "." + key + " has the wrong type");
    }
  }

  void get(const char* key, Point& out) {
    if (!j_.contains(key)) return;
    out = point(raw(key), path_ + "." + key);
  }

  static Point point(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      config_error(where + " must be [x, y]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) config_error("unknown key " + path_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_area(Section& s, const char* key, Point& lo, Point& hi, const std::string& path) {
  if (!s.has(key)) return;
  const json& v = s.raw(key);
  if (!v.is_array() || v.size() != 2) config_error(path + "." + key + " must be [[x0, y0], [x1, y1]]");
  lo = Section::point(v[0], path + "." + key);
  hi = Section::point(v[1], path + "." + key);
}

void parse_user(const json& j, UserParams& u, const std::string& path) {
  Section s(j, path);
  s.get("workload", u.workload);
  s.get("model_size", u.model_size);
  s.get("cycles_per_bit", u.cycles_per_bit);
  s.get("f_max", u.f_max);
  s.get("p_max", u.p_max);
  s.get("e_max", u.e_max);
  s.finish();
}

void parse_scenario(const json& j, ScenarioParams& p) {
  Section s(j, "scenario");
  s.get("num_reflect", p.num_reflect);
  s.get("num_transmit", p.num_transmit);
  s.get("num_elements", p.num_elements);
  s.get("bandwidth", p.bandwidth);
  s.get("noise_psd", p.noise_psd);
  s.get("bits_per_pixel", p.bits_per_pixel);
  s.get("kappa", p.kappa);
  s.get("bs_cpu", p.bs_cpu);
  s.get("bs_pos", p.bs_pos);
  s.get("ris_pos", p.ris_pos);
  parse_area(s, "reflect_area", p.reflect_area_lo, p.reflect_area_hi, "scenario");
  parse_area(s, "transmit_area", p.transmit_area_lo, p.transmit_area_hi, "scenario");
  s.get("path_loss_ref", p.path_loss_ref);
  s.get("exp_direct", p.exp_direct);
  s.get("exp_ris_user", p.exp_ris_user);
  s.get("exp_bs_ris", p.exp_bs_ris);
  s.get("rician", p.rician);
  if (s.has("user")) parse_user(s.raw("user"), p.user_template, "scenario.user");
  if (s.has("users")) {
    const json& v = s.raw("users");
    if (!v.is_array()) config_error("scenario.users must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      UserParams u = p.user_template;
      parse_user(v[i], u, "scenario.users[" + std::to_string(i) + "]");
      p.users.push_back(u);
    }
  }
  if (s.has("user_pos")) {
    const json& v = s.raw("user_pos");
    if (!v.is_array()) config_error("scenario.user_pos must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      p.user_pos.push_back(Section::point(v[i], "scenario.user_pos[" + std::to_string(i) + "]"));
    }
  }
  s.finish();
}

void parse_solver(const json& j, OptimizerConfig& c) {
  Section s(j, "solver");
  s.get("rel_tol", c.rel_tol);
  s.get("max_iters", c.max_iters);
  s.get("phase_seed", c.phase_seed);
  s.get("edge_aware", c.edge_aware);
  if (s.has("penalty")) {
    Section q(s.raw("penalty"), "solver.penalty");
    q.get("nu0", c.penalty.nu0);
    q.get("growth", c.penalty.growth);
    q.get("cap_factor", c.penalty.cap_factor);
    q.get("rel_tol", c.penalty.rel_tol);
    q.get("max_iters", c.penalty.max_iters);
    q.get("rank_tol", c.penalty.rank_tol);
    q.finish();
  }
  s.finish();
  if (!(c.rel_tol > 0.0) || c.max_iters < 1) config_error("solver.rel_tol must be positive and max_iters >= 1");
  const PenaltyConfig& pc = c.penalty;
  if (!(pc.nu0 > 0.0) || !(pc.growth > 1.0) || !(pc.cap_factor >= 1.0) || !(pc.rel_tol > 0.0) || pc.max_iters < 1 ||
      !(pc.rank_tol > 0.0)) {
    config_error("solver.penalty values out of range");
  }
}

void parse_sweep(const json& j, SweepSpec& w) {
  Section s(j, "sweep");
  s.get("param", w.param);
  s.get("values", w.values);
  s.get("seeds", w.seeds);
  s.get("schemes", w.schemes);
  s.get("traces", w.traces);
  s.get("trace_timings", w.trace_timings);
  s.finish();
  w.validate();
}

void parse_grid(const json& j, GridSpec& g) {
  Section s(j, "oracle");
  s.get("phase_points", g.phase_points);
  s.get("amplitude_points", g.amplitude_points);
  s.get("power_points", g.power_points);
  s.get("bandwidth_points", g.bandwidth_points);
  s.get("max_evaluations", g.max_evaluations);
  s.finish();
  g.validate();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string join(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_number(v[i]);
  }
  return out;
}

std::string cell_name(const std::string& scheme, const std::string& param, double value, std::uint64_t seed) {
  return scheme + "_" + param + "_" + format_number(value) + "_s" + std::to_string(seed);
}

int as_count(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e6) {
    throw Error(ErrorCode::kConfig, std::string(what) + " sweep values must be positive integers");
  }
  return static_cast<int>(v);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

const std::vector<std::string> kCsvColumns = {"scheme", "swept_param", "value",   "seed",   "t_final",
                                              "iters",  "status",      "wall_ms", "t_local", "t_comm",
                                              "t_edge", "t_total",     "message"};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SchemeSpec parse_scheme(const std::string& name) {
  if (name == "proposed-sdma") return {name, AccessMode::kSdma, Scheme::kProposed};
  if (name == "proposed-fdma") return {name, AccessMode::kFdma, Scheme::kProposed};
  if (name == "reflect-only") return {name, AccessMode::kSdma, Scheme::kReflectOnly};
  if (name == "transmit-only") return {name, AccessMode::kSdma, Scheme::kTransmitOnly};
  if (name == "random-phase") return {name, AccessMode::kSdma, Scheme::kRandomPhase};
  throw Error(ErrorCode::kConfig, "unknown scheme '" + name + "'");
}

void SweepSpec::validate() const {
  static const std::set<std::string> params = {"B", "p_max", "d", "F", "N", "K"};
  if (!params.count(param)) config_error("sweep.param must be one of B, p_max, d, F, N, K");
  if (values.empty()) config_error("sweep.values must not be empty");
  if (seeds.empty()) config_error("sweep.seeds must not be empty");
  if (schemes.empty()) config_error("sweep.schemes must not be empty");
  for (double v : values) {
    if (!std::isfinite(v) || !(v > 0.0)) config_error("sweep.values must be positive");
  }
  std::set<std::string> seen;
  for (const std::string& s : schemes) {
    parse_scheme(s);
    if (!seen.insert(s).second) config_error("duplicate scheme '" + s + "'");
  }
}

HarnessConfig parse_config(const json& doc) {
  HarnessConfig cfg;
  Section top(doc, "config");
  if (top.has("scenario")) parse_scenario(top.raw("scenario"), cfg.scenario);
  if (top.has("solver")) parse_solver(top.raw("solver"), cfg.solver);
  if (top.has("sweep")) {
    parse_sweep(top.raw("sweep"), cfg.sweep);
    cfg.has_sweep = true;
  }
  if (top.has("oracle")) parse_grid(top.raw("oracle"), cfg.grid);
  top.finish();
  cfg.scenario.penalty = cfg.solver.penalty.nu0;
  try {
    cfg.scenario.validate();
  } catch (const Error& e) {
    config_error(std::string("scenario: ") + e.what());
  }
  if (cfg.has_sweep) {
    for (double v : cfg.sweep.values) {
      try {
        apply_sweep(cfg.scenario, cfg.sweep.param, v).validate();
      } catch (const Error& e) {
        config_error("sweep value " + format_number(v) + ": " + e.what());
      }
    }
  }
  return cfg;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

ScenarioParams apply_sweep(const ScenarioParams& base, const std::string& param, double value) {
  ScenarioParams p = base;
  auto for_users = [&](auto&& set) {
    set(p.user_template);
    for (UserParams& u : p.users) set(u);
  };
  if (param == "B") {
    p.bandwidth = value;
  } else if (param == "p_max") {
    for_users([&](UserParams& u) { u.p_max = value; });
  } else if (param == "d") {
    for_users([&](UserParams& u) { u.model_size = value; });
  } else if (param == "F") {
    p.bs_cpu = value;
  } else if (param == "N") {
    p.num_elements = as_count(value, "N");
  } else if (param == "K") {
    const int K = as_count(value, "K");
    if (!p.users.empty() || !p.user_pos.empty()) {
      throw Error(ErrorCode::kConfig, "a K sweep needs drawn positions and a shared user template");
    }
    p.num_transmit = K / 2;
    p.num_reflect = K - p.num_transmit;
  } else {
    throw Error(ErrorCode::kConfig, "unknown sweep parameter '" + param + "'");
  }
  return p;
}

int default_workers() {
  const char* env = std::getenv("STARLAT_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) return 1;
  return static_cast<int>(v);
}

SolveReport solve_cell(const HarnessConfig& cfg, const SchemeSpec& scheme, double value, std::uint64_t seed,
                       ScenarioParams* params_out, ChannelRealization* ch_out) {
  const ScenarioParams swept = cfg.has_sweep ? apply_sweep(cfg.scenario, cfg.sweep.param, value) : cfg.scenario;
  const ScenarioParams params = place_users(swept, seed);
  const ChannelRealization ch = gen_channels(params, seed);
  SolveReport rep;
  if (scheme.scheme != Scheme::kProposed) {
    rep = run_baseline(params, ch, cfg.solver, scheme.scheme);
  } else if (scheme.mode == AccessMode::kSdma) {
    rep = run_sdma(params, ch, cfg.solver);
  } else {
    rep = run_fdma(params, ch, cfg.solver);
  }
  if (params_out) *params_out = params;
  if (ch_out) *ch_out = ch;
  return rep;
}

std::string trace_jsonl(const SolveReport& rep, bool wall_clock) {
  std::string out;
  auto line = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  line({{"n", 0}, {"t", number_or_null(rep.trace.front())}});
  for (const IterationRecord& r : rep.iterations) {
    json timings;
    if (wall_clock) {
      timings = {{"unit", "s"},
                 {"power", r.timings.power},
                 {"star", r.timings.star},
                 {"cpu", r.timings.cpu},
                 {"edge", r.timings.edge},
                 {"aux", r.timings.aux}};
    } else {
      timings = {{"unit", "newton_steps"}, {"power", r.power_work}, {"star", r.star_work}};
    }
    line({{"n", r.n},
          {"t", number_or_null(r.t)},
          {"rank_residual_t", r.residual_t},
          {"rank_residual_r", r.residual_r},
          {"nu", r.nu},
          {"star_accepted", r.star_accepted},
          {"block_timings", timings}});
  }
  return out;
}

json summarize(const SweepSpec& sweep, const std::vector<CellResult>& cells) {
  struct Acc {
    std::vector<double> t;
    int infeasible = 0, max_iters = 0;
    double iters = 0.0;
  };
  std::map<std::pair<std::string, double>, Acc> acc;
  for (const CellResult& c : cells) {
    Acc& a = acc[{c.scheme, c.value}];
    if (c.status == SolveStatus::kInfeasible || !std::isfinite(c.t)) {
      ++a.infeasible;
      continue;
    }
    if (c.status == SolveStatus::kMaxIters) ++a.max_iters;
    a.t.push_back(c.t);
    a.iters += c.iters;
  }

  auto mean_of = [&](const std::string& scheme, double value) {
    const Acc& a = acc[{scheme, value}];
    if (a.t.empty()) return kInf;
    double s = 0.0;
    for (double t : a.t) s += t;
    return s / a.t.size();
  };

  json schemes = json::object();
  for (const std::string& s : sweep.schemes) {
    json rows = json::array();
    for (double v : sweep.values) {
      const Acc& a = acc[{s, v}];
      const double mean = mean_of(s, v);
      double var = 0.0;
      for (double t : a.t) var += (t - mean) * (t - mean);
      const double n = static_cast<double>(a.t.size());
      const double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
      rows.push_back({{"value", v},
                      {"mean_t", number_or_null(mean)},
                      {"std_t", sd},
                      {"ci95", n > 0 ? 1.96 * sd / std::sqrt(n) : 0.0},
                      {"feasible", a.t.size()},
                      {"infeasible", a.infeasible},
                      {"max_iters", a.max_iters},
                      {"mean_iters", n > 0 ? a.iters / n : 0.0}});
    }
    schemes[s] = rows;
  }

  json reductions = json::object();
  for (const std::string& proposed : {std::string("proposed-sdma"), std::string("proposed-fdma")}) {
    if (std::find(sweep.schemes.begin(), sweep.schemes.end(), proposed) == sweep.schemes.end()) continue;
    json per = json::object();
    for (const std::string& b : sweep.schemes) {
      if (b.rfind("proposed", 0) == 0) continue;
      json rows = json::array();
      for (double v : sweep.values) {
        const double mb = mean_of(b, v), mp = mean_of(proposed, v);
        rows.push_back({{"value", v}, {"reduction", number_or_null((mb - mp) / mb)}});
      }
      per[b] = rows;
    }
    if (!per.empty()) reductions[proposed] = per;
  }

  return {{"swept_param", sweep.param},
          {"values", sweep.values},
          {"seeds", sweep.seeds.size()},
          {"runs", cells.size()},
          {"schemes", schemes},
          {"reductions", reductions}};
}

SweepResult run_sweep(const HarnessConfig& cfg, const RunOptions& opts) {
  if (!cfg.has_sweep) config_error("config has no sweep section");
  const SweepSpec& sweep = cfg.sweep;
  sweep.validate();

  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + opts.out_dir.string() + ": " + ec.message());
  const std::filesystem::path trace_dir = opts.out_dir / "traces";
  if (sweep.traces) {
    std::filesystem::create_directories(trace_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + trace_dir.string() + ": " + ec.message());
  }

  struct Job {
    SchemeSpec scheme;
    double value;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double v : sweep.values) {
    for (std::uint64_t s : sweep.seeds) {
      for (const std::string& name : sweep.schemes) jobs.push_back({parse_scheme(name), v, s + opts.seed_offset});
    }
  }

  SweepResult result;
  result.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error) return;
      }
      const Job& job = jobs[i];
      CellResult& c = result.cells[i];
      c.scheme = job.scheme.name;
      c.param = sweep.param;
      c.value = job.value;
      c.seed = job.seed;
      c.cell = cell_name(c.scheme, c.param, c.value, c.seed);
      try {
        const auto t0 = std::chrono::steady_clock::now();
        ScenarioParams params;
        ChannelRealization ch;
        const SolveReport rep = solve_cell(cfg, job.scheme, job.value, job.seed, &params, &ch);
        c.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        c.t = rep.status == SolveStatus::kInfeasible ? kInf : rep.t;
        c.iters = rep.num_iters;
        c.status = rep.status;
        c.message = rep.message;
        if (rep.status == SolveStatus::kInfeasible && rep.infeasible_user >= 0) {
          c.message += " (user " + std::to_string(rep.infeasible_user) + ", block " + rep.infeasible_block + ")";
        }
        const LatencyBreakdown lat =
            latency_energy(rep.state, achieved_rates(rep.state, rep.star, ch, params), params).first;
        c.t_local = lat.local;
        c.t_comm = lat.comm;
        c.t_edge = lat.edge;
        c.t_total = lat.total;
        if (sweep.traces) write_file(trace_dir / (c.cell + ".jsonl"), trace_jsonl(rep, sweep.trace_timings));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ostringstream csv;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) csv << (i ? "," : "") << kCsvColumns[i];
  csv << '\n';
  for (const CellResult& c : result.cells) {
    csv << c.scheme << ',' << c.param << ',' << format_number(c.value) << ',' << c.seed << ',' << format_number(c.t)
        << ',' << c.iters << ',' << to_string(c.status) << ',' << format_number(c.wall_ms) << ',' << join(c.t_local)
        << ',' << join(c.t_comm) << ',' << join(c.t_edge) << ',' << join(c.t_total) << ','
        << csv_escape(c.message) << '\n';
  }
  write_file(opts.out_dir / "results.csv", csv.str());

  result.summary = summarize(sweep, result.cells);
  result.summary["seed_offset"] = opts.seed_offset;
  write_file(opts.out_dir / "summary.json", result.summary.dump(2) + "\n");
  return result;
}

json oracle_check(const HarnessConfig& cfg) {
  std::vector<std::uint64_t> seeds = cfg.has_sweep ? cfg.sweep.seeds : std::vector<std::uint64_t>{0};
  json rows = json::array();
  for (std::uint64_t seed : seeds) {
    const ScenarioParams params = place_users(cfg.scenario, seed);
    const ChannelRealization ch = gen_channels(params, seed);
    for (AccessMode mode : {AccessMode::kSdma, AccessMode::kFdma}) {
      const OracleResult ref = brute_force(params, ch, mode, cfg.grid);
      const SolveReport rep =
          mode == AccessMode::kSdma ? run_sdma(params, ch, cfg.solver) : run_fdma(params, ch, cfg.solver);
      rows.push_back({{"seed", seed},
                      {"mode", to_string(mode)},
                      {"oracle_t", number_or_null(ref.t)},
                      {"optimizer_t", number_or_null(rep.t)},
                      {"status", to_string(rep.status)},
                      {"gap", number_or_null((rep.t - ref.t) / ref.t)},
                      {"evaluations", ref.evaluations}});
    }
  }
  return {{"results", rows}};
}

json error_json(const Error& e) {
  json err = {{"code", to_string(e.code())}, {"message", e.what()}};
  err["user"] = e.user() >= 0 ? json(e.user()) : json(nullptr);
  err["block"] = e.block().empty() ? json(nullptr) : json(e.block());
  return {{"error", err}};
}

}  // namespace starlat
