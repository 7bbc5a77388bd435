#include "co4/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace co4 {

CartPoleState cartpole_reset(Rng& rng) {
  CartPoleState s;
  s.x = rng.uniform(-0.05, 0.05);
  s.x_dot = rng.uniform(-0.05, 0.05);
  s.theta = rng.uniform(-0.05, 0.05);
  s.theta_dot = rng.uniform(-0.05, 0.05);
  return s;
}

void cartpole_step(CartPoleState& s, double force, const CartPoleParams& p) {
  if (s.terminated)
    throw std::runtime_error("cartpole_step: stepping a terminated state");
  const double total_mass = p.mass_cart + p.mass_pole;
  const double polemass_length = p.mass_pole * p.half_length;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp =
      (force + polemass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_length * (4.0 / 3.0 - p.mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  s.x += p.dt * s.x_dot;
  s.x_dot += p.dt * x_acc;
  s.theta += p.dt * s.theta_dot;
  s.theta_dot += p.dt * theta_acc;
  ++s.step_count;

  if (std::fabs(s.x) > p.x_limit || std::fabs(s.theta) > p.theta_limit ||
      s.step_count >= p.max_steps)
    s.terminated = true;
}

}  // namespace co4
