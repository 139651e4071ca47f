#include "starlat/scenario.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace starlat {

const char* to_string(Side side) {
  return side == Side::kReflection ? "reflection" : "transmission";
}

const char* to_string(AccessMode mode) { return mode == AccessMode::kSdma ? "SDMA" : "FDMA"; }

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kBoundaryUser: return "BoundaryUser";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kNonPositiveAuxiliary: return "NonPositiveAuxiliary";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kInfeasibleEnergy: return "InfeasibleEnergy";
    case ErrorCode::kPenaltyStall: return "PenaltyStall";
    case ErrorCode::kRankTooHigh: return "RankTooHigh";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double ScenarioParams::payload_bits(int k) const {
  const double d = user(k).model_size;
  return bits_per_pixel * d * d;
}

double ScenarioParams::edge_load(int k) const { return payload_bits(k) * user(k).cycles_per_bit; }

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidParams, what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void ScenarioParams::validate() const {
  require(num_reflect >= 0 && num_transmit >= 0 && num_users() >= 1, "need at least one user");
  require(num_elements >= 1, "need at least one RIS element");
  require(positive(bandwidth) && positive(noise_psd) && positive(bits_per_pixel) && positive(kappa) &&
              positive(penalty) && positive(bs_cpu),
          "system constants must be positive");
  require(positive(path_loss_ref) && positive(exp_direct) && positive(exp_ris_user) &&
              positive(exp_bs_ris),
          "path-loss constants must be positive");
  require(rician > 0.0, "Rician factor must be positive");
  require(users.empty() || static_cast<int>(users.size()) == num_users(),
          "per-user parameter list must have K entries");
  for (int k = 0; k < num_users(); ++k) {
    const UserParams& u = user(k);
    std::ostringstream os;
    os << "user " << k << ": workload, model size, cycles/bit, f_max, p_max, e_max must be positive";
    require(positive(u.workload) && positive(u.model_size) && positive(u.cycles_per_bit) &&
                positive(u.f_max) && positive(u.p_max) && positive(u.e_max),
            os.str());
  }
  require(distance(bs_pos, ris_pos) > 0.0, "BS and RIS must not coincide");
  if (!user_pos.empty()) {
    require(static_cast<int>(user_pos.size()) == num_users(), "user_pos must have K entries");
    for (const Point& p : user_pos) {
      require(distance(p, bs_pos) > 0.0 && distance(p, ris_pos) > 0.0,
              "user positions must differ from BS and RIS positions");
    }
  }
}

SideAssignment assign_sides(const ScenarioParams& params) {
  if (static_cast<int>(params.user_pos.size()) != params.num_users()) {
    throw Error(ErrorCode::kInvalidParams, "assign_sides needs one position per user");
  }
  SideAssignment out;
  out.side.reserve(params.user_pos.size());
  for (std::size_t k = 0; k < params.user_pos.size(); ++k) {
    const double x = params.user_pos[k].x;
    if (x == params.ris_pos.x) {
      throw Error(ErrorCode::kBoundaryUser, "user lies on the RIS plane", static_cast<int>(k));
    }
    const Side s = x < params.ris_pos.x ? Side::kReflection : Side::kTransmission;
    out.side.push_back(s);
    (s == Side::kReflection ? out.num_reflect : out.num_transmit)++;
  }
  if (out.num_reflect != params.num_reflect || out.num_transmit != params.num_transmit) {
    std::ostringstream os;
    os << "positions give " << out.num_reflect << " reflection / " << out.num_transmit
       << " transmission users, declared " << params.num_reflect << " / " << params.num_transmit;
    throw Error(ErrorCode::kCountMismatch, os.str());
  }
  return out;
}

namespace {

Point draw_in(std::mt19937_64& rng, const Point& lo, const Point& hi, double forbidden_x) {
  std::uniform_real_distribution<double> ux(lo.x, hi.x);
  std::uniform_real_distribution<double> uy(lo.y, hi.y);
  for (;;) {
    Point p{ux(rng), uy(rng)};
    if (p.x != forbidden_x) return p;
  }
}

void place_into(ScenarioParams& params, std::mt19937_64& rng) {
  if (!params.user_pos.empty()) return;
  params.user_pos.reserve(params.num_users());
  for (int k = 0; k < params.num_reflect; ++k) {
    params.user_pos.push_back(
        draw_in(rng, params.reflect_area_lo, params.reflect_area_hi, params.ris_pos.x));
  }
  for (int k = 0; k < params.num_transmit; ++k) {
    params.user_pos.push_back(
        draw_in(rng, params.transmit_area_lo, params.transmit_area_hi, params.ris_pos.x));
  }
}

struct RicianDraw {
  double los;
  double nlos;

  explicit RicianDraw(double factor) {
    if (std::isinf(factor)) {
      los = 1.0;
      nlos = 0.0;
    } else {
      los = std::sqrt(factor / (factor + 1.0));
      nlos = std::sqrt(1.0 / (factor + 1.0));
    }
  }

  // Standard circularly-symmetric complex normal: real and imaginary parts
  // each have variance 1/2.
  cplx sample(std::mt19937_64& rng) const {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double re = n(rng);
    const double im = n(rng);
    return los + nlos * cplx(re, im);
  }
};

double amplitude(const ScenarioParams& p, double dist, double exponent) {
  return std::sqrt(p.path_loss_ref * std::pow(dist, -exponent));
}

}  // namespace

ScenarioParams place_users(const ScenarioParams& params, std::uint64_t seed) {
  ScenarioParams out = params;
  std::mt19937_64 rng(seed);
  place_into(out, rng);
  return out;
}

int ChannelRealization::num_on(Side s) const {
  int n = 0;
  for (Side x : side) n += (x == s);
  return n;
}

ChannelRealization gen_channels(const ScenarioParams& params_in, std::uint64_t seed) {
  params_in.validate();
  std::mt19937_64 rng(seed);
  ScenarioParams params = params_in;
  place_into(params, rng);
  params.validate();
  const SideAssignment sides = assign_sides(params);

  const int K = params.num_users();
  const int N = params.num_elements;
  const RicianDraw fading(params.rician);

  ChannelRealization ch;
  ch.seed = seed;
  ch.num_users = K;
  ch.num_elements = N;
  ch.user_pos = params.user_pos;
  ch.side = sides.side;

  const double a_r = amplitude(params, distance(params.bs_pos, params.ris_pos), params.exp_bs_ris);
  ch.h_bs_ris.resize(N);
  for (int n = 0; n < N; ++n) ch.h_bs_ris[n] = a_r * fading.sample(rng);

  ch.h_direct.resize(K);
  ch.h_ris_user.assign(K, CVec(N));
  for (int k = 0; k < K; ++k) {
    const Point& u = params.user_pos[k];
    ch.h_direct[k] = amplitude(params, distance(u, params.bs_pos), params.exp_direct) * fading.sample(rng);
    const double a_i = amplitude(params, distance(u, params.ris_pos), params.exp_ris_user);
    for (int n = 0; n < N; ++n) ch.h_ris_user[k][n] = a_i * fading.sample(rng);
  }
  relift(ch);
  return ch;
}

std::pair<CVec, CMat> lift_channel(const ChannelRealization& ch, int k) {
  const int N = ch.num_elements;
  CVec row(N + 1);
  for (int n = 0; n < N; ++n) row[n] = std::conj(ch.h_bs_ris[n]) * ch.h_ris_user[k][n];
  row[N] = ch.h_direct[k];
  const CVec col = row.conjugate();
  CMat gram = col * col.adjoint();
  return {row, gram};
}

void relift(ChannelRealization& ch) {
  ch.cascade.resize(ch.num_users);
  ch.gram.resize(ch.num_users);
  for (int k = 0; k < ch.num_users; ++k) {
    auto [row, gram] = lift_channel(ch, k);
    ch.cascade[k] = std::move(row);
    ch.gram[k] = std::move(gram);
  }
}

}  // namespace starlat
