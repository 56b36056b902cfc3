#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mftg/dynamics.hpp"

namespace mftg {

// Built-in benchmark games. All keep |controls| small so downstream matrix
// games stay cheap.
struct CatalogParams {
  double kappa_u = 1.2;
  double kappa_v = 0.8;
  double gain = 0.5;        // mean-field coupling strength (crowd-averse only)
  std::size_t grid_u = 3;   // control grid sizes for the 1d games
  std::size_t grid_v = 3;
  double horizon = 1.0;
};

namespace detail {

inline std::vector<Control> grid_1d(std::size_t n) {
  if (n < 2) throw InvalidInput("catalog: control grid needs at least 2 points");
  std::vector<Control> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1)});
  return out;
}

}  // namespace detail

// g(m) = integral of sin^2(pi x_1) dm; Lipschitz constant pi on the torus.
inline TerminalCost sine_squared_cost() {
  TerminalCost tc;
  auto c = [](const TorusPoint& x) {
    double s = std::sin(std::numbers::pi * x[0]);
    return s * s;
  };
  tc.g = [c](const DiscreteMeasure& m) {
    double acc = 0.0;
    for (const auto& a : m.atoms()) acc += a.weight * c(a.point);
    return acc;
  };
  tc.modulus = [](double r) { return std::numbers::pi * r; };
  tc.linear = TerminalCost::Linear{c, std::numbers::pi};
  return tc;
}

inline GameDynamics make_game(const std::string& name, const CatalogParams& p = {}) {
  GameDynamics dyn;
  dyn.name = name;
  dyn.horizon = p.horizon;
  const double ku = p.kappa_u, kv = p.kappa_v;

  if (name == "pursuit-1d") {
    dyn.dim = 1;
    dyn.controls_u = detail::grid_1d(p.grid_u);
    dyn.controls_v = detail::grid_1d(p.grid_v);
    dyn.bound_R = ku + kv;
    dyn.lipschitz_L = 0.0;
    dyn.f_u = [ku](double, const TorusPoint&, const DiscreteMeasure&, const Control& u) {
      return Vec{ku * u[0]};
    };
    dyn.f_v = [kv](double, const TorusPoint&, const DiscreteMeasure&, const Control& v) {
      return Vec{kv * v[0]};
    };
    dyn.f = [ku, kv](double, const TorusPoint&, const DiscreteMeasure&, const Control& u,
                     const Control& v) { return Vec{ku * u[0] + kv * v[0]}; };
    return dyn;
  }

  if (name == "crowd-averse-1d") {
    dyn.dim = 1;
    dyn.controls_u = detail::grid_1d(p.grid_u);
    dyn.controls_v = detail::grid_1d(p.grid_v);
    const double gain = p.gain;
    dyn.bound_R = ku + kv + gain;
    // d/dx sin(2 pi ell) has norm at most 2 pi, and averaging over m is
    // 1-Lipschitz in W1 <= W2 for a 2 pi gain-Lipschitz kernel.
    dyn.lipschitz_L = 2.0 * std::numbers::pi * gain;
    auto crowd = [gain](const TorusPoint& x, const DiscreteMeasure& m) {
      double acc = 0.0;
      for (const auto& a : m.atoms())
        acc += a.weight * std::sin(2.0 * std::numbers::pi * wrap_half(x[0] - a.point[0]));
      return gain * acc;
    };
    dyn.f_u = [ku, crowd](double, const TorusPoint& x, const DiscreteMeasure& m,
                          const Control& u) { return Vec{ku * u[0] + crowd(x, m)}; };
    dyn.f_v = [kv](double, const TorusPoint&, const DiscreteMeasure&, const Control& v) {
      return Vec{kv * v[0]};
    };
    dyn.f = [ku, kv, crowd](double, const TorusPoint& x, const DiscreteMeasure& m,
                            const Control& u, const Control& v) {
      return Vec{ku * u[0] + kv * v[0] + crowd(x, m)};
    };
    return dyn;
  }

  if (name == "pursuit-2d") {
    dyn.dim = 2;
    // the rest direction plus unit steps along each axis, in lexicographic order
    std::vector<Control> cross = {{-1.0, 0.0}, {0.0, -1.0}, {0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}};
    dyn.controls_u = cross;
    dyn.controls_v = cross;
    dyn.bound_R = ku + kv;
    dyn.lipschitz_L = 0.0;
    dyn.f_u = [ku](double, const TorusPoint&, const DiscreteMeasure&, const Control& u) {
      return Vec{ku * u[0], ku * u[1]};
    };
    dyn.f_v = [kv](double, const TorusPoint&, const DiscreteMeasure&, const Control& v) {
      return Vec{kv * v[0], kv * v[1]};
    };
    dyn.f = [ku, kv](double, const TorusPoint&, const DiscreteMeasure&, const Control& u,
                     const Control& v) {
      return Vec{ku * u[0] + kv * v[0], ku * u[1] + kv * v[1]};
    };
    return dyn;
  }

  throw InvalidInput("make_game: unknown game '" + name + "'");
}

}  // namespace mftg
