#pragma once

#include "co4/rng.hpp"

namespace co4 {

// Classic balance benchmark constants; explicit Euler at dt = 0.02 s.
struct CartPoleParams {
  double gravity = 9.8;
  double mass_cart = 1.0;
  double mass_pole = 0.1;
  double half_length = 0.5;
  double force_mag = 10.0;
  double dt = 0.02;
  double x_limit = 2.4;                   // meters
  double theta_limit = 0.20943951023931953;  // 12 degrees in radians
  int max_steps = 1000;
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  int step_count = 0;
  bool terminated = false;
};

// All four components drawn uniformly from ±0.05.
CartPoleState cartpole_reset(Rng& rng);

// Applies `force` (newtons) for one step. Throws std::runtime_error when the
// state is already terminated.
void cartpole_step(CartPoleState& state, double force,
                   const CartPoleParams& params = {});

}  // namespace co4
