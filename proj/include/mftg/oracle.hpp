#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "mftg/measures.hpp"

// Independent reference implementations used by tests and verification runs.
// They share no solver machinery with the main code paths: transport by
// permutation enumeration, laws by matrix exponentials, agent values by a
// finite-difference scheme.
namespace mftg::oracle {

struct AssignmentResult {
  double value = 0.0;  // W_p
  double cost = 0.0;   // W_p^p
  std::size_t particles = 0;
};

// Brute-force p-Wasserstein for measures whose weights are multiples of 1/N
// with a common N <= 8: split into unit particles and enumerate assignments.
inline AssignmentResult ot_assignment(int p, const DiscreteMeasure& m1,
                                      const DiscreteMeasure& m2,
                                      std::size_t max_particles = 8) {
  if (p != 1 && p != 2) throw InvalidInput("ot_assignment: p must be 1 or 2");
  std::size_t n = 0;
  for (std::size_t cand = 1; cand <= max_particles; ++cand) {
    auto representable = [cand](const DiscreteMeasure& m) {
      for (const auto& a : m.atoms()) {
        double k = a.weight * static_cast<double>(cand);
        if (std::fabs(k - std::round(k)) > 1e-9) return false;
      }
      return true;
    };
    if (representable(m1) && representable(m2)) {
      n = cand;
      break;
    }
  }
  if (n == 0) throw InvalidInput("ot_assignment: weights not unit-splittable at this size");

  auto split = [n](const DiscreteMeasure& m) {
    std::vector<TorusPoint> pts;
    for (const auto& a : m.atoms()) {
      auto k = static_cast<std::size_t>(std::llround(a.weight * static_cast<double>(n)));
      for (std::size_t r = 0; r < k; ++r) pts.push_back(a.point);
    }
    return pts;
  };
  std::vector<TorusPoint> xs = split(m1), ys = split(m2);
  if (xs.size() != n || ys.size() != n)
    throw InvalidInput("ot_assignment: particle split inconsistent");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = torus_distance(xs[i], ys[perm[i]]);
      c += (p == 1) ? d : d * d;
    }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));

  AssignmentResult out;
  out.cost = best / static_cast<double>(n);
  out.value = (p == 1) ? out.cost : std::sqrt(out.cost);
  out.particles = n;
  return out;
}

namespace detail {

inline std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                                   std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double aik = a[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  return c;
}

}  // namespace detail

// mu0 * exp(t Q) by scaling and squaring with a Taylor series truncated below
// 1e-16 of the running sum. Row-vector convention.
inline Vec expm_law(const Vec& mu0, const Matrix& q, double t) {
  const std::size_t n = mu0.size();
  if (q.rows() != n || q.cols() != n) throw DimensionMismatch("expm_law: shape mismatch");
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::fabs(t * q(i, j));
    norm = std::max(norm, row);
  }
  int s = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++s;
  }
  const double scale = t / std::ldexp(1.0, s);
  std::vector<double> b(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b[i * n + j] = q(i, j) * scale;

  std::vector<double> e(n * n, 0.0), term(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = term[i * n + i] = 1.0;
  for (int k = 1; k <= 40; ++k) {
    term = detail::mat_mul(term, b, n);
    for (auto& x : term) x /= static_cast<double>(k);
    double tn = 0.0;
    for (double x : term) tn = std::max(tn, std::fabs(x));
    for (std::size_t i = 0; i < n * n; ++i) e[i] += term[i];
    if (tn < 1e-18) break;
  }
  for (int r = 0; r < s; ++r) e = detail::mat_mul(e, e, n);

  Vec out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mi = mu0[i];
    if (mi == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += mi * e[i * n + j];
  }
  return out;
}

// Single-agent lower-game value on the one-dimensional torus:
//   v_t + min_u max_v f(t, x, u, v) v_x = 0, v(T, x) = c(x),
// solved backward with a monotone Lax-Friedrichs scheme on a periodic grid.
struct HjiSolution {
  std::vector<double> grid;    // cell centers i/M
  std::vector<double> values;  // v(0, grid[i])

  double at(double x) const {
    const std::size_t m = grid.size();
    double y = x - std::floor(x);
    double pos = y * static_cast<double>(m);
    auto i = static_cast<std::size_t>(pos);
    if (i >= m) i = m - 1;
    double frac = pos - static_cast<double>(i);
    return values[i] * (1.0 - frac) + values[(i + 1) % m] * frac;
  }

  double integrate(const DiscreteMeasure& m0) const {
    double s = 0.0;
    for (const auto& a : m0.atoms()) s += a.weight * at(a.point[0]);
    return s;
  }
};

inline HjiSolution agent_hji_1d(
    const std::function<double(double, double, std::size_t, std::size_t)>& velocity,
    std::size_t n_u, std::size_t n_v, const std::function<double(double)>& terminal,
    double horizon, std::size_t grid_m, double cfl = 0.5) {
  if (grid_m < 8) throw InvalidInput("agent_hji_1d: grid too coarse");
  const double dx = 1.0 / static_cast<double>(grid_m);
  std::vector<double> xs(grid_m);
  for (std::size_t i = 0; i < grid_m; ++i) xs[i] = static_cast<double>(i) * dx;

  double sigma = 0.0;
  for (std::size_t i = 0; i < grid_m; i += 7)
    for (std::size_t iu = 0; iu < n_u; ++iu)
      for (std::size_t iv = 0; iv < n_v; ++iv)
        sigma = std::max({sigma, std::fabs(velocity(0.0, xs[i], iu, iv)),
                          std::fabs(velocity(horizon, xs[i], iu, iv))});
  if (sigma == 0.0) sigma = 1.0;
  auto steps = static_cast<std::size_t>(std::ceil(horizon * sigma / (cfl * dx)));
  steps = std::max<std::size_t>(steps, 1);
  const double dt = horizon / static_cast<double>(steps);

  std::vector<double> v(grid_m), vn(grid_m);
  for (std::size_t i = 0; i < grid_m; ++i) v[i] = terminal(xs[i]);
  for (std::size_t step = 0; step < steps; ++step) {
    const double t = horizon - static_cast<double>(step) * dt;
    for (std::size_t i = 0; i < grid_m; ++i) {
      const double vm = v[(i + grid_m - 1) % grid_m];
      const double vp = v[(i + 1) % grid_m];
      const double pminus = (v[i] - vm) / dx;
      const double pplus = (vp - v[i]) / dx;
      const double pbar = 0.5 * (pminus + pplus);
      double h = std::numeric_limits<double>::infinity();
      for (std::size_t iu = 0; iu < n_u; ++iu) {
        double inner = -std::numeric_limits<double>::infinity();
        for (std::size_t iv = 0; iv < n_v; ++iv)
          inner = std::max(inner, velocity(t, xs[i], iu, iv) * pbar);
        h = std::min(h, inner);
      }
      // Backward march of v_t + H = 0; the +sigma/2 (p+ - p-) term is the
      // monotone viscosity for this orientation (CFL: dt sigma <= dx).
      vn[i] = v[i] + dt * (h + 0.5 * sigma * (pplus - pminus));
    }
    v.swap(vn);
  }
  HjiSolution out;
  out.grid = std::move(xs);
  out.values = std::move(v);
  return out;
}

}  // namespace mftg::oracle
