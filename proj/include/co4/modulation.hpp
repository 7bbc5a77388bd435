#pragma once

#include <string>
#include <vector>

#include "co4/tensor.hpp"

namespace co4 {

// Modulatory transfer functions combining a driving input R with a
// contextual input C. Cooperation is context-dominant (C can drive the
// output when R is weak or negative); TM1-TM4 vanish whenever R does.
enum class ModulationKind { Cooperation, TM1, TM2, TM3, TM4 };

ModulationKind parse_modulation(const std::string& name);  // throws on unknown tag
std::string modulation_name(ModulationKind kind);

namespace mod {

// Scalar value of the selected transfer function.
//   Cooperation: relu6(R² + 2R + C(1+|R|))
//   TM1: ½R(1+exp(RC))   TM2: R+RC   TM3: R(1+tanh(RC))   TM4: R·2^(RC)
// Exponent arguments RC are clamped to |RC| <= 30 as a numerical guard.
double value(ModulationKind kind, double r, double c);

// Partial derivatives (dR, dC). Subgradient 0 at the relu6 kinks and
// d|R|/dR = 0 at R = 0.
void partials(ModulationKind kind, double r, double c, double& dr, double& dc);

// Distance of (r, c) from the nearest non-smooth point of the function
// (relu6 kinks and R = 0 for Cooperation; +inf for the smooth kinds).
double kink_margin(ModulationKind kind, double r, double c);

// Margin probe for gradient tests: while armed (per thread), every
// modulate() forward records the minimum kink_margin over its inputs.
void arm_margin_probe();
double disarm_margin_probe();

}  // namespace mod

// Elementwise modulation as a differentiable graph op (R, C same shape).
Tensor modulate(ModulationKind kind, const Tensor& r, const Tensor& c);

// Convenience wrappers matching the two conceptual entry points.
inline Tensor cooperate(const Tensor& r, const Tensor& c) {
  return modulate(ModulationKind::Cooperation, r, c);
}
inline Tensor transfer(ModulationKind kind, const Tensor& r, const Tensor& c) {
  return modulate(kind, r, c);
}

// Regular sampling of a transfer function over an (R, C) rectangle, with
// central-difference partials of the sampled values (one-sided at the grid
// boundary). Row i follows r_axis[i], column j follows c_axis[j].
struct FieldGrid {
  std::vector<double> r_axis;
  std::vector<double> c_axis;
  std::vector<double> value;      // steps×steps, row-major
  std::vector<double> dvalue_dr;  // central differences along the R axis
  std::vector<double> dvalue_dc;  // central differences along the C axis

  int steps_r() const { return static_cast<int>(r_axis.size()); }
  int steps_c() const { return static_cast<int>(c_axis.size()); }
  double at(int i, int j) const { return value[static_cast<std::size_t>(i) * c_axis.size() + j]; }
};

FieldGrid sample_field(ModulationKind kind, double r_min, double r_max,
                       double c_min, double c_max, int steps);

// CSV columns: R, C, value, dR, dC (one row per grid point).
void write_field_csv(const FieldGrid& grid, const std::string& path);

}  // namespace co4
