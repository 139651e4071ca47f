#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "starlat/common.hpp"

namespace starlat {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

// Per-user workload and device limits.
struct UserParams {
  double workload = 5e7;      // w_k, CPU cycles for local pre-processing
  double model_size = 150.0;  // d_k, image side in pixels
  double cycles_per_bit = 1000.0;
  double f_max = 1e9;  // cycles/s
  double p_max = 1.0;  // W
  double e_max = 2.0;  // J
};

struct ScenarioParams {
  int num_reflect = 5;
  int num_transmit = 5;
  int num_elements = 16;

  double bandwidth = 5e7;   // Hz
  double noise_psd = 1e-13;  // W/Hz; noise power is bandwidth * noise_psd
  double bits_per_pixel = 25.0;
  double kappa = 1e-27;
  double penalty = 1e-5;  // initial rank-one penalty factor
  double bs_cpu = 2e10;   // F, cycles/s

  // Applied to every user unless `users` is non-empty (then it must hold K entries).
  UserParams user_template;
  std::vector<UserParams> users;

  Point bs_pos{0.0, 10.0};
  Point ris_pos{10.0, 0.0};
  // Empty means "draw uniformly from the default squares" at channel generation.
  std::vector<Point> user_pos;
  // Squares used for drawing: reflection users left of the RIS, transmission users right.
  Point reflect_area_lo{8.0, 0.0}, reflect_area_hi{10.0, 2.0};
  Point transmit_area_lo{10.0, 0.0}, transmit_area_hi{12.0, 2.0};

  double path_loss_ref = 1e-3;  // rho, linear (-30 dB)
  double exp_direct = 3.0;      // BS <-> user
  double exp_ris_user = 2.0;    // RIS <-> user
  double exp_bs_ris = 2.0;      // BS <-> RIS
  double rician = 3.0;

  int num_users() const { return num_reflect + num_transmit; }
  const UserParams& user(int k) const { return users.empty() ? user_template : users[k]; }
  double noise_power() const { return bandwidth * noise_psd; }
  // beta * d_k^2, bits uploaded by user k.
  double payload_bits(int k) const;
  // beta * d_k^2 * c_k, edge cycles needed for user k.
  double edge_load(int k) const;

  // Throws Error(kInvalidParams) on any violated invariant.
  void validate() const;
};

struct SideAssignment {
  std::vector<Side> side;
  int num_reflect = 0;
  int num_transmit = 0;
};

// Classifies users by which side of the RIS plane (vertical line through
// ris_pos) they sit on. Requires user_pos to be populated.
SideAssignment assign_sides(const ScenarioParams& params);

// Draws positions for the users from the configured squares; reflection users
// first, then transmission users. Returns params unchanged if positions are set.
ScenarioParams place_users(const ScenarioParams& params, std::uint64_t seed);

struct ChannelRealization {
  std::uint64_t seed = 0;
  int num_users = 0;
  int num_elements = 0;
  std::vector<Point> user_pos;
  std::vector<Side> side;

  CVec h_direct;                 // h_d,k
  std::vector<CVec> h_ris_user;  // h_I,k, N entries each
  CVec h_bs_ris;                 // h_r, N entries

  // Row-vector lifting: entries conj(h_r,n) * h_I,k,n followed by h_d,k, so
  // the composite channel is cascade[k]^T * [v; 1].
  std::vector<CVec> cascade;
  // H_k = conj(cascade[k]) * cascade[k]^T, Hermitian PSD rank one.
  std::vector<CMat> gram;

  int num_on(Side s) const;
};

// Rician draw for all links plus the lifted per-user quantities. Pure function
// of (params, seed).
ChannelRealization gen_channels(const ScenarioParams& params, std::uint64_t seed);

// Recomputes cascade/gram for one user from the raw links.
std::pair<CVec, CMat> lift_channel(const ChannelRealization& ch, int k);

// Fills cascade/gram for all users (used after editing raw links by hand).
void relift(ChannelRealization& ch);

}  // namespace starlat
