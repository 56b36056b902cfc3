#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <tuple>
#include <vector>

#include "mftg/linalg.hpp"

namespace mftg {

// Exact solver for the balanced transportation problem
//   min sum_ij flow_ij * cost_ij,  flow >= 0, row sums = supply, col sums = demand.
// Classic primal transportation simplex on a spanning-tree basis, northwest
// corner start, Dantzig entering rule with a Bland fallback against cycling.
// Optimality is certified through the dual potentials it maintains.
struct TransportSolution {
  std::vector<std::tuple<std::size_t, std::size_t, double>> flows;
  double cost = 0.0;
  std::vector<double> potential_u, potential_v;
  double worst_reduced = 0.0;   // min reduced cost over all cells; >= -tol at optimum
  double worst_slack = 0.0;     // max |reduced cost| over carrying cells
  double dual_gap = 0.0;        // primal cost minus dual objective
};

namespace detail {

struct TransportBasis {
  std::size_t n1, n2;
  Matrix flow;
  std::vector<char> basic;

  TransportBasis(std::size_t a, std::size_t b)
      : n1(a), n2(b), flow(a, b, 0.0), basic(a * b, 0) {}

  bool is_basic(std::size_t i, std::size_t j) const { return basic[i * n2 + j] != 0; }
  void set_basic(std::size_t i, std::size_t j, bool on) { basic[i * n2 + j] = on ? 1 : 0; }
};

// Fills potentials from the basis tree: u_i + v_j = cost_ij on basic cells.
inline void transport_potentials(const TransportBasis& b, const Matrix& cost,
                                 std::vector<double>& u, std::vector<double>& v) {
  const std::size_t n1 = b.n1, n2 = b.n2;
  u.assign(n1, 0.0);
  v.assign(n2, 0.0);
  std::vector<char> row_done(n1, 0), col_done(n2, 0);
  std::vector<std::vector<std::size_t>> row_cells(n1), col_cells(n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      if (b.is_basic(i, j)) {
        row_cells[i].push_back(j);
        col_cells[j].push_back(i);
      }
  // Node stack over the bipartite tree, rows encoded as i, cols as n1 + j.
  std::vector<std::size_t> stack;
  stack.push_back(0);
  row_done[0] = 1;
  while (!stack.empty()) {
    std::size_t node = stack.back();
    stack.pop_back();
    if (node < n1) {
      for (std::size_t j : row_cells[node])
        if (!col_done[j]) {
          v[j] = cost(node, j) - u[node];
          col_done[j] = 1;
          stack.push_back(n1 + j);
        }
    } else {
      std::size_t j = node - n1;
      for (std::size_t i : col_cells[j])
        if (!row_done[i]) {
          u[i] = cost(i, j) - v[j];
          row_done[i] = 1;
          stack.push_back(i);
        }
    }
  }
}

// Unique path between row i0 and column j0 through basic cells.
// Returns the cell sequence of the cycle closed by the entering cell (i0, j0):
// entering first, then alternating minus/plus cells along the path.
inline std::vector<std::pair<std::size_t, std::size_t>> transport_cycle(
    const TransportBasis& b, std::size_t i0, std::size_t j0) {
  const std::size_t n1 = b.n1, n2 = b.n2;
  const std::size_t nodes = n1 + n2;
  std::vector<std::size_t> parent(nodes, SIZE_MAX);
  std::vector<char> seen(nodes, 0);
  std::vector<std::size_t> queue;
  queue.push_back(i0);
  seen[i0] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    std::size_t node = queue[head];
    if (node == n1 + j0) break;
    if (node < n1) {
      for (std::size_t j = 0; j < n2; ++j)
        if (b.is_basic(node, j) && !seen[n1 + j]) {
          seen[n1 + j] = 1;
          parent[n1 + j] = node;
          queue.push_back(n1 + j);
        }
    } else {
      std::size_t jc = node - n1;
      for (std::size_t i = 0; i < n1; ++i)
        if (b.is_basic(i, jc) && !seen[i]) {
          seen[i] = 1;
          parent[i] = node;
          queue.push_back(i);
        }
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> cycle;
  cycle.emplace_back(i0, j0);
  std::size_t node = n1 + j0;
  while (node != i0) {
    std::size_t par = parent[node];
    if (par == SIZE_MAX) throw ContractError("transport basis lost connectivity");
    if (node < n1)
      cycle.emplace_back(node, par - n1);
    else
      cycle.emplace_back(par, node - n1);
    node = par;
  }
  return cycle;
}

}  // namespace detail

inline TransportSolution solve_transport(std::vector<double> supply,
                                         std::vector<double> demand,
                                         const Matrix& cost) {
  const std::size_t n1 = supply.size(), n2 = demand.size();
  if (cost.rows() != n1 || cost.cols() != n2)
    throw DimensionMismatch("solve_transport: cost shape mismatch");
  if (n1 == 0 || n2 == 0) throw InvalidInput("solve_transport: empty marginal");
  double sa = 0.0, sb = 0.0;
  for (double x : supply) {
    if (!(x >= 0.0)) throw InvalidInput("solve_transport: negative supply");
    sa += x;
  }
  for (double x : demand) {
    if (!(x >= 0.0)) throw InvalidInput("solve_transport: negative demand");
    sb += x;
  }
  if (sa <= 0.0 || sb <= 0.0) throw InvalidInput("solve_transport: zero total mass");
  for (auto& x : supply) x /= sa;
  for (auto& x : demand) x /= sb;

  double cmax = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) cmax = std::max(cmax, std::fabs(cost(i, j)));
  const double enter_tol = 1e-12 * (1.0 + cmax);

  detail::TransportBasis basis(n1, n2);
  {
    // Northwest corner start: exactly n1 + n2 - 1 basic cells.
    std::vector<double> a = supply, b = demand;
    std::size_t i = 0, j = 0;
    while (true) {
      double f = std::min(a[i], b[j]);
      basis.flow(i, j) = f;
      basis.set_basic(i, j, true);
      a[i] -= f;
      b[j] -= f;
      if (i == n1 - 1 && j == n2 - 1) break;
      if (a[i] <= 1e-15 && i + 1 < n1)
        ++i;
      else
        ++j;
    }
  }

  std::vector<double> u, v;
  const std::size_t bland_after = 4000;
  const std::size_t max_pivots = 400000;
  std::size_t pivots = 0;
  while (true) {
    detail::transport_potentials(basis, cost, u, v);
    std::size_t bi = SIZE_MAX, bj = SIZE_MAX;
    double best = -enter_tol;
    bool bland = pivots >= bland_after;
    for (std::size_t i = 0; i < n1 && (!bland || bi == SIZE_MAX); ++i)
      for (std::size_t j = 0; j < n2; ++j) {
        if (basis.is_basic(i, j)) continue;
        double r = cost(i, j) - u[i] - v[j];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
          if (bland) break;
        }
      }
    if (bi == SIZE_MAX) break;
    if (++pivots > max_pivots) throw ContractError("solve_transport: pivot budget exhausted");

    auto cycle = detail::transport_cycle(basis, bi, bj);
    // cycle[0] is the entering cell (+), odd positions are minus cells.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave_pos = SIZE_MAX;
    for (std::size_t k = 1; k < cycle.size(); k += 2) {
      double f = basis.flow(cycle[k].first, cycle[k].second);
      if (f < theta) {
        theta = f;
        leave_pos = k;
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      auto [ci, cj] = cycle[k];
      if (k % 2 == 0)
        basis.flow(ci, cj) += theta;
      else
        basis.flow(ci, cj) -= theta;
    }
    auto [li, lj] = cycle[leave_pos];
    basis.flow(li, lj) = 0.0;
    basis.set_basic(li, lj, false);
    basis.set_basic(bi, bj, true);
  }

  TransportSolution sol;
  detail::transport_potentials(basis, cost, sol.potential_u, sol.potential_v);
  double primal = 0.0;
  double worst_reduced = 0.0, worst_slack = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double f = basis.flow(i, j);
      double r = cost(i, j) - sol.potential_u[i] - sol.potential_v[j];
      worst_reduced = std::min(worst_reduced, r);
      if (f > 1e-15) {
        primal += f * cost(i, j);
        worst_slack = std::max(worst_slack, std::fabs(r));
        sol.flows.emplace_back(i, j, f);
      }
    }
  double dual = 0.0;
  for (std::size_t i = 0; i < n1; ++i) dual += supply[i] * sol.potential_u[i];
  for (std::size_t j = 0; j < n2; ++j) dual += demand[j] * sol.potential_v[j];
  sol.cost = primal;
  sol.worst_reduced = worst_reduced;
  sol.worst_slack = worst_slack;
  sol.dual_gap = primal - dual;
  return sol;
}

}  // namespace mftg
