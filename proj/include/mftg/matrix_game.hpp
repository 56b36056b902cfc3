#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mftg/linalg.hpp"

namespace mftg {

// Zero-sum matrix game: the row player picks a mixed strategy to minimize
// x' A y, the column player maximizes. Solved exactly (up to the certified
// gap) by the standard value-normalization LP.
struct MatrixGameResult {
  double value = 0.0;
  Vec mixed_u;          // row player (minimizer)
  Vec mixed_v;          // column player (maximizer)
  double gap = 0.0;     // certified saddle gap, >= 0
  double pure_minmax = 0.0;  // min_u max_v A
  double pure_maxmin = 0.0;  // max_v min_u A
};

inline MatrixGameResult solve_matrix_game(const Matrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw InvalidInput("solve_matrix_game: empty payoff");

  // flip sign so the row player maximizes b = -a, then shift positive
  double bmin = std::numeric_limits<double>::infinity();
  double scale = 1.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      bmin = std::min(bmin, -a(i, j));
      scale = std::max(scale, std::fabs(a(i, j)));
    }
  if (!std::isfinite(bmin)) throw InvalidInput("solve_matrix_game: non-finite payoff");
  const double shift = 1.0 - bmin;

  // primal simplex on: max sum(q) s.t. (b + shift) q <= 1, q >= 0
  const std::size_t rhs = n + m;
  std::vector<Vec> t(m + 1, Vec(n + m + 1, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[i + 1][j] = -a(i, j) + shift;
    t[i + 1][n + i] = 1.0;
    t[i + 1][rhs] = 1.0;
  }
  for (std::size_t j = 0; j < n; ++j) t[0][j] = -1.0;
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

  const double enter_tol = 1e-11, pivot_tol = 1e-11;
  const std::size_t bland_after = 2000, max_pivots = 20000 + 200 * (m + n);
  for (std::size_t pivots = 0;; ++pivots) {
    if (pivots > max_pivots) throw ContractError("solve_matrix_game: pivot budget exhausted");
    std::size_t col = rhs;
    if (pivots < bland_after) {
      double best = -enter_tol;
      for (std::size_t j = 0; j < n + m; ++j)
        if (t[0][j] < best) {
          best = t[0][j];
          col = j;
        }
    } else {
      for (std::size_t j = 0; j < n + m; ++j)
        if (t[0][j] < -enter_tol) {
          col = j;
          break;
        }
    }
    if (col == rhs) break;  // optimal
    std::size_t prow = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= m; ++i) {
      if (t[i][col] <= pivot_tol) continue;
      double ratio = t[i][rhs] / t[i][col];
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && (prow == 0 || basis[i - 1] < basis[prow - 1]))) {
        best_ratio = ratio;
        prow = i;
      }
    }
    if (prow == 0) throw ContractError("solve_matrix_game: unbounded tableau");
    double piv = t[prow][col];
    for (auto& x : t[prow]) x /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == prow) continue;
      double c = t[i][col];
      if (c == 0.0) continue;
      for (std::size_t j = 0; j <= rhs; ++j) t[i][j] -= c * t[prow][j];
    }
    basis[prow - 1] = col;
  }

  const double sum_q = t[0][rhs];
  if (!(sum_q > 0.0)) throw ContractError("solve_matrix_game: degenerate normalization");
  const double vprime = 1.0 / sum_q;

  Vec q(n, 0.0), p(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) q[basis[i]] = t[i + 1][rhs];
  for (std::size_t i = 0; i < m; ++i) p[i] = t[0][n + i];

  MatrixGameResult res;
  res.mixed_u.assign(m, 0.0);
  res.mixed_v.assign(n, 0.0);
  double su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < m; ++i) su += (res.mixed_u[i] = std::max(0.0, p[i] * vprime));
  for (std::size_t j = 0; j < n; ++j) sv += (res.mixed_v[j] = std::max(0.0, q[j] * vprime));
  if (std::fabs(su - 1.0) > 1e-7 || std::fabs(sv - 1.0) > 1e-7)
    throw ContractError("solve_matrix_game: strategies failed to normalize");
  for (auto& w : res.mixed_u) w /= su;
  for (auto& w : res.mixed_v) w /= sv;

  // certificate on the original payoff
  double u_guarantee = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < m; ++i) col += res.mixed_u[i] * a(i, j);
    u_guarantee = std::max(u_guarantee, col);
  }
  double v_guarantee = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += a(i, j) * res.mixed_v[j];
    v_guarantee = std::min(v_guarantee, row);
  }
  res.gap = u_guarantee - v_guarantee;
  if (res.gap < -1e-9 * scale || res.gap > 1e-8 * scale)
    throw ContractError("solve_matrix_game: saddle certificate failed");
  res.gap = std::max(res.gap, 0.0);
  res.value = 0.5 * (u_guarantee + v_guarantee);

  res.pure_minmax = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, a(i, j));
    res.pure_minmax = std::min(res.pure_minmax, worst);
  }
  res.pure_maxmin = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) worst = std::min(worst, a(i, j));
    res.pure_maxmin = std::max(res.pure_maxmin, worst);
  }
  return res;
}

}  // namespace mftg
