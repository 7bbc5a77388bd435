#include "co4/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "co4/kernels.hpp"
#include "co4/macs.hpp"

namespace co4 {

ModulationKind parse_modulation(const std::string& name) {
  if (name == "cooperation") return ModulationKind::Cooperation;
  if (name == "tm1") return ModulationKind::TM1;
  if (name == "tm2") return ModulationKind::TM2;
  if (name == "tm3") return ModulationKind::TM3;
  if (name == "tm4") return ModulationKind::TM4;
  throw std::invalid_argument("unknown modulation kind: '" + name +
                              "' (expected cooperation|tm1|tm2|tm3|tm4)");
}

std::string modulation_name(ModulationKind kind) {
  switch (kind) {
    case ModulationKind::Cooperation: return "cooperation";
    case ModulationKind::TM1: return "tm1";
    case ModulationKind::TM2: return "tm2";
    case ModulationKind::TM3: return "tm3";
    case ModulationKind::TM4: return "tm4";
  }
  return "?";
}

namespace mod {

namespace {
constexpr double kExpClamp = 30.0;
constexpr double kLn2 = 0.6931471805599453;

inline double clamped_rc(double r, double c) {
  double rc = r * c;
  if (rc > kExpClamp) return kExpClamp;
  if (rc < -kExpClamp) return -kExpClamp;
  return rc;
}
}  // namespace

double value(ModulationKind kind, double r, double c) {
  switch (kind) {
    case ModulationKind::Cooperation: {
      const double pre = r * r + 2.0 * r + c * (1.0 + std::fabs(r));
      return std::min(6.0, std::max(0.0, pre));
    }
    case ModulationKind::TM1:
      return 0.5 * r * (1.0 + std::exp(clamped_rc(r, c)));
    case ModulationKind::TM2:
      return r + r * c;
    case ModulationKind::TM3:
      return r * (1.0 + std::tanh(r * c));
    case ModulationKind::TM4:
      return r * std::exp2(clamped_rc(r, c));
  }
  return 0.0;
}

void partials(ModulationKind kind, double r, double c, double& dr, double& dc) {
  switch (kind) {
    case ModulationKind::Cooperation: {
      const double pre = r * r + 2.0 * r + c * (1.0 + std::fabs(r));
      if (pre <= 0.0 || pre >= 6.0) {
        dr = 0.0;
        dc = 0.0;
        return;
      }
      const double sign_r = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      dr = 2.0 * r + 2.0 + c * sign_r;
      dc = 1.0 + std::fabs(r);
      return;
    }
    case ModulationKind::TM1: {
      const double rc = clamped_rc(r, c);
      const double e = std::exp(rc);
      const bool sat = std::fabs(r * c) > kExpClamp;
      dr = 0.5 * (1.0 + e) + (sat ? 0.0 : 0.5 * r * c * e);
      dc = sat ? 0.0 : 0.5 * r * r * e;
      return;
    }
    case ModulationKind::TM2:
      dr = 1.0 + c;
      dc = r;
      return;
    case ModulationKind::TM3: {
      const double t = std::tanh(r * c);
      const double sech2 = 1.0 - t * t;
      dr = 1.0 + t + r * c * sech2;
      dc = r * r * sech2;
      return;
    }
    case ModulationKind::TM4: {
      const double rc = clamped_rc(r, c);
      const double p = std::exp2(rc);
      const bool sat = std::fabs(r * c) > kExpClamp;
      dr = p + (sat ? 0.0 : r * c * kLn2 * p);
      dc = sat ? 0.0 : r * r * kLn2 * p;
      return;
    }
  }
  dr = dc = 0.0;
}

namespace {
thread_local bool t_probe_armed = false;
thread_local double t_probe_margin = 0.0;
}  // namespace

void arm_margin_probe() {
  t_probe_armed = true;
  t_probe_margin = std::numeric_limits<double>::infinity();
}

double disarm_margin_probe() {
  t_probe_armed = false;
  return t_probe_margin;
}

double kink_margin(ModulationKind kind, double r, double c) {
  if (kind != ModulationKind::Cooperation)
    return std::numeric_limits<double>::infinity();
  const double pre = r * r + 2.0 * r + c * (1.0 + std::fabs(r));
  return std::min({std::fabs(r), std::fabs(pre), std::fabs(pre - 6.0)});
}

}  // namespace mod

Tensor modulate(ModulationKind kind, const Tensor& r, const Tensor& c) {
  if (r.shape != c.shape)
    throw std::invalid_argument("modulate: shape mismatch " + shape_str(r.shape) +
                                " vs " + shape_str(c.shape));
  Tensor out = Tensor::zeros(r.shape, r.requires_grad || c.requires_grad);
  const std::size_t n = out.size();
  macs::count_elementwise("modulation", static_cast<long long>(n));
  const double* rd = r.data->data();
  const double* cd = c.data->data();
  double* od = out.data->data();
  if (mod::t_probe_armed)
    for (std::size_t i = 0; i < n; ++i)
      mod::t_probe_margin =
          std::min(mod::t_probe_margin, mod::kink_margin(kind, rd[i], cd[i]));
  kernels::map(n, [=](std::size_t i) { od[i] = mod::value(kind, rd[i], cd[i]); });
  if (out.requires_grad) {
    out.node = std::make_shared<Node>();
    out.node->parents = {r, c};
    out.node->out_data = out.data;
    out.node->out_grad = out.grad;
    out.node->out_shape = out.shape;
    out.node->backward = [kind](Node& nd) {
      const std::vector<double>& g = *nd.out_grad;
      const Tensor& rp = nd.parents[0];
      const Tensor& cp = nd.parents[1];
      const double* rv = rp.data->data();
      const double* cv = cp.data->data();
      double* rg = rp.requires_grad ? rp.grad->data() : nullptr;
      double* cg = cp.requires_grad ? cp.grad->data() : nullptr;
      kernels::map(g.size(), [&, rv, cv, rg, cg](std::size_t i) {
        double dr, dc;
        mod::partials(kind, rv[i], cv[i], dr, dc);
        if (rg) rg[i] += g[i] * dr;
        if (cg) cg[i] += g[i] * dc;
      });
    };
  }
  return out;
}

FieldGrid sample_field(ModulationKind kind, double r_min, double r_max,
                       double c_min, double c_max, int steps) {
  if (steps < 2) throw std::invalid_argument("sample_field: steps must be >= 2");
  if (!(r_max > r_min) || !(c_max > c_min))
    throw std::invalid_argument("sample_field: degenerate range");
  FieldGrid grid;
  grid.r_axis.resize(steps);
  grid.c_axis.resize(steps);
  const double dr = (r_max - r_min) / (steps - 1);
  const double dc = (c_max - c_min) / (steps - 1);
  for (int i = 0; i < steps; ++i) grid.r_axis[i] = r_min + dr * i;
  for (int j = 0; j < steps; ++j) grid.c_axis[j] = c_min + dc * j;
  const std::size_t n = static_cast<std::size_t>(steps) * steps;
  grid.value.resize(n);
  grid.dvalue_dr.resize(n);
  grid.dvalue_dc.resize(n);
  kernels::row_map(steps, static_cast<std::size_t>(steps) * 4, [&](int i) {
    for (int j = 0; j < steps; ++j)
      grid.value[static_cast<std::size_t>(i) * steps + j] =
          mod::value(kind, grid.r_axis[i], grid.c_axis[j]);
  });
  auto v = [&](int i, int j) { return grid.value[static_cast<std::size_t>(i) * steps + j]; };
  kernels::row_map(steps, static_cast<std::size_t>(steps) * 6, [&](int i) {
    for (int j = 0; j < steps; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * steps + j;
      if (i == 0)
        grid.dvalue_dr[idx] = (v(1, j) - v(0, j)) / dr;
      else if (i == steps - 1)
        grid.dvalue_dr[idx] = (v(steps - 1, j) - v(steps - 2, j)) / dr;
      else
        grid.dvalue_dr[idx] = (v(i + 1, j) - v(i - 1, j)) / (2.0 * dr);
      if (j == 0)
        grid.dvalue_dc[idx] = (v(i, 1) - v(i, 0)) / dc;
      else if (j == steps - 1)
        grid.dvalue_dc[idx] = (v(i, steps - 1) - v(i, steps - 2)) / dc;
      else
        grid.dvalue_dc[idx] = (v(i, j + 1) - v(i, j - 1)) / (2.0 * dc);
    }
  });
  return grid;
}

void write_field_csv(const FieldGrid& grid, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_field_csv: cannot open " + path);
  std::fputs("R,C,value,dR,dC\n", f);
  const int sr = grid.steps_r(), sc = grid.steps_c();
  for (int i = 0; i < sr; ++i)
    for (int j = 0; j < sc; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * sc + j;
      std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g\n", grid.r_axis[i],
                   grid.c_axis[j], grid.value[idx], grid.dvalue_dr[idx],
                   grid.dvalue_dc[idx]);
    }
  std::fclose(f);
}

}  // namespace co4
