// Acceptance harness: nine end-to-end checks with pinned tolerances, one
// pass/fail line each. Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/catalog.hpp"
#include "mftg/chainsim.hpp"
#include "mftg/cli.hpp"
#include "mftg/hj.hpp"
#include "mftg/markov.hpp"
#include "mftg/mfsim.hpp"
#include "mftg/oracle.hpp"
#include "mftg/strategy.hpp"

using namespace mftg;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void run_criterion(int index, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    auto [p, d] = body();
    pass = p;
    detail = d;
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %d %s: %s (%.1fs)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::shared_ptr<const GameDynamics> shared_game(const std::string& name) {
  return std::make_shared<const GameDynamics>(make_game(name));
}

std::vector<double> partition_of(std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    t[k] = static_cast<double>(k) / static_cast<double>(steps);
  t.back() = 1.0;
  return t;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- criterion 1

std::pair<bool, std::string> metric_suite() {
  Rng rng(0xACCE5501ull);
  std::size_t checked = 0, violations = 0;
  for (std::size_t n : {4u, 8u, 16u}) {
    auto lat = Lattice::regular(1, n);
    for (int p : {1, 2}) {
      for (std::size_t i = 0; i < 1000; ++i) {
        SimplexVector mu1(lat, rng.simplex_point(n));
        SimplexVector mu2(lat, rng.simplex_point(n));
        auto c = metric_comparison(p, mu1, mu2);
        ++checked;
        if (c.wp_pow < c.lower - 1e-9) ++violations;
        if (c.wp_pow > c.upper + 1e-9) ++violations;
      }
    }
  }
  double worst_oracle = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    int p = (i % 2 == 0) ? 1 : 2;
    std::vector<WeightedAtom> a1, a2;
    for (std::size_t j = 0; j < 8; ++j) {
      a1.push_back({TorusPoint({rng.uniform()}), 0.125});
      a2.push_back({TorusPoint({rng.uniform()}), 0.125});
    }
    DiscreteMeasure m1(a1), m2(a2);
    double gap = std::fabs(wasserstein(p, m1, m2).value - oracle::ot_assignment(p, m1, m2).value);
    worst_oracle = std::max(worst_oracle, gap);
  }
  bool pass = violations == 0 && worst_oracle <= 1e-10;
  return {pass, std::to_string(checked) + " pairs, " + std::to_string(violations) +
                    " violations, worst oracle gap " + fmt(worst_oracle)};
}

// ---------------------------------------------------------------- criterion 2

std::pair<bool, std::string> chain_certification() {
  struct Case {
    std::string game;
    double h;
  };
  std::vector<Case> cases = {{"pursuit-1d", 0.25},      {"pursuit-1d", 0.125},
                             {"pursuit-1d", 0.0625},    {"crowd-averse-1d", 0.25},
                             {"crowd-averse-1d", 0.125}, {"crowd-averse-1d", 0.0625},
                             {"pursuit-2d", 0.25},      {"pursuit-2d", 0.125}};
  std::size_t bad = 0;
  double worst_row = 0.0, worst_drift = 0.0, worst_moment_margin = 1.0;
  for (const auto& c : cases) {
    auto model = build_lattice_chain(shared_game(c.game), c.h);
    auto cert = certify_epsilon(model, 24, 0xACCE5502ull);
    worst_row = std::max(worst_row, cert.worst_row_sum);
    worst_drift = std::max(worst_drift, cert.drift_defect);
    const double budget = cert.epsilon * cert.epsilon;
    worst_moment_margin = std::min(worst_moment_margin, budget - cert.second_moment);
    bool ok = cert.worst_row_sum <= 1e-12 && cert.drift_defect <= 1e-10 &&
              cert.second_moment <= budget * (1.0 + 1e-12) && cert.covering <= cert.epsilon &&
              cert.pass;
    if (!ok) ++bad;
  }
  return {bad == 0, std::to_string(cases.size()) + " chains, " + std::to_string(bad) +
                        " failed; worst row sum " + fmt(worst_row) + ", worst drift defect " +
                        fmt(worst_drift)};
}

// ---------------------------------------------------------------- criterion 3

KolmogorovModel constant_two_state() {
  auto lat = std::make_shared<const Lattice>(
      std::vector<TorusPoint>{TorusPoint({0.0}), TorusPoint({0.5})});
  KolmogorovModel model;
  model.lattice = lat;
  model.controls_u = {{0.0}};
  model.controls_v = {{0.0}};
  model.horizon = 1.0;
  model.epsilon = 1.0;
  model.rate_bound = 0.45;
  model.rate = [](double, const SimplexVector&, std::size_t, std::size_t) {
    Matrix q(2, 2);
    q(0, 0) = -0.3;
    q(0, 1) = 0.3;
    q(1, 0) = 0.45;
    q(1, 1) = -0.45;
    return q;
  };
  return model;
}

std::pair<bool, std::string> law_integration() {
  // constant two-state generator against the matrix exponential
  auto small = constant_two_state();
  auto one_u = constant_feedback(2, {1.0}), one_v = constant_feedback(2, {1.0});
  SimplexVector mu0(small.lattice, {0.85, 0.15});
  auto traj = integrate_kolmogorov(small, mu0, one_u, one_v, 0.0, 1.0, 1e-3);
  Matrix q = small.rate(0.0, mu0, 0, 0);
  double worst_expm = 0.0;
  for (double t : {0.25, 0.5, 1.0}) {
    Vec expd = oracle::expm_law({0.85, 0.15}, q, t);
    auto got = traj.at(t);
    for (std::size_t i = 0; i < 2; ++i)
      worst_expm = std::max(worst_expm, std::fabs(got[i] - expd[i]));
  }

  // mass drift along a controlled eight-state flow
  auto model = build_lattice_chain(shared_game("pursuit-1d"), 0.125);
  auto fu = constant_feedback(8, Vec(3, 1.0 / 3.0));
  auto fv = constant_feedback(8, Vec(3, 1.0 / 3.0));
  auto flow = integrate_kolmogorov(model, SimplexVector::uniform(model.lattice), fu, fv, 0.0,
                                   1.0);
  double worst_mass_excess = -1.0;
  for (std::size_t i = 0; i < flow.times.size(); ++i) {
    double mass = 0.0;
    for (double w : flow.laws[i]) mass += w;
    double allowance = 1e-13 * flow.times[i] + 1e-15;
    worst_mass_excess = std::max(worst_mass_excess, std::fabs(mass - 1.0) - allowance);
  }

  // velocity envelope of the law along random control schedules
  const double r1 = moment_R1(2.0, 1);
  Rng rng(0xACCE5503ull);
  std::size_t schedule_violations = 0;
  for (std::size_t s = 0; s < 100; ++s) {
    Matrix wu(8, 3), wv(8, 3);
    for (std::size_t x = 0; x < 8; ++x) {
      Vec ru = rng.simplex_point(3), rv = rng.simplex_point(3);
      for (std::size_t j = 0; j < 3; ++j) {
        wu(x, j) = ru[j];
        wv(x, j) = rv[j];
      }
    }
    Feedback gu = [wu](double, const SimplexVector&) { return wu; };
    Feedback gv = [wv](double, const SimplexVector&) { return wv; };
    SimplexVector start(model.lattice, rng.simplex_point(8));
    auto law = integrate_kolmogorov(model, start, gu, gv, 0.0, 1.0);
    for (std::size_t k = 0; k < 5; ++k) {
      double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0);
      if (a > b) std::swap(a, b);
      if (b - a < 1e-3) continue;
      double w2sq = wasserstein(2, embed(law.at(a)), embed(law.at(b))).cost;
      if (w2sq > r1 * r1 * (b - a) + 1e-9) ++schedule_violations;
    }
  }

  bool pass = worst_expm <= 1e-8 && worst_mass_excess <= 0.0 && schedule_violations == 0;
  return {pass, "expm gap " + fmt(worst_expm) + ", mass drift within budget by " +
                    fmt(-worst_mass_excess) + ", schedule violations " +
                    std::to_string(schedule_violations)};
}

// ---------------------------------------------------------------- criterion 4

std::pair<bool, std::string> path_moments() {
  auto model = build_lattice_chain(shared_game("pursuit-1d"), 0.125);
  auto fu = constant_feedback(8, Vec(3, 1.0 / 3.0));
  auto fv = constant_feedback(8, Vec(3, 1.0 / 3.0));
  auto flow = integrate_kolmogorov(model, SimplexVector::uniform(model.lattice), fu, fv, 0.0,
                                   1.0);
  const double r1 = moment_R1(2.0, 1);
  const double eps = model.epsilon;
  const double s = 0.5;
  const std::vector<double> horizons = {0.01, 0.05, 0.1};
  const std::size_t n_paths = 10000;
  const auto& pts = model.lattice->points();

  struct Cell {
    double mean = 0.0, sd = 0.0;
    std::size_t x0 = 0;
    double theta = 0.0;
  };
  std::vector<Cell> cells(horizons.size() * 8);
  parallel_for(cells.size(), [&](std::size_t c) {
    const std::size_t ti = c / 8, x0 = c % 8;
    const double theta = horizons[ti];
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) {
      Rng rng(split_seed(0xACCE5504ull, c * 100003ull + i));
      auto path = sample_chain(model, flow, fu, fv, x0, s, s + theta, rng);
      double d = torus_distance(pts[path.state_at(s + theta)], pts[x0]);
      sum += d * d;
      sumsq += d * d * d * d;
    }
    double mean = sum / static_cast<double>(n_paths);
    double var = std::max(0.0, sumsq / static_cast<double>(n_paths) - mean * mean);
    cells[c] = {mean, std::sqrt(var / static_cast<double>(n_paths)), x0, theta};
  });

  std::size_t bad = 0;
  double worst_coarse = 0.0, worst_fine = 0.0;
  for (const auto& cell : cells) {
    const double coarse = r1 * r1 * cell.theta;
    const double fine = eps * eps * cell.theta + varsigma1(cell.theta, 2.0, r1) * cell.theta;
    const double slack = 3.0 * cell.sd;
    if (cell.mean > coarse + slack) ++bad;
    if (cell.mean > fine + slack) ++bad;
    worst_coarse = std::max(worst_coarse, cell.mean / coarse);
    worst_fine = std::max(worst_fine, cell.mean / fine);
  }
  return {bad == 0, std::to_string(cells.size()) + " cells of 10000 paths, " +
                        std::to_string(bad) + " bound breaches; worst coarse ratio " +
                        fmt(worst_coarse) + ", worst fine ratio " + fmt(worst_fine)};
}

// ---------------------------------------------------------------- criterion 5

std::pair<bool, std::string> saddle_points() {
  Rng rng(0xACCE5505ull);
  double worst_duality = 0.0;
  std::size_t bad = 0;
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    std::size_t m = 2 + rng.index(5), n = 2 + rng.index(5);
    Matrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform(-3.0, 3.0);
    auto res = solve_matrix_game(a);
    // first player's guarantee vs second player's guarantee (LP duality)
    double ub = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < m; ++i) col += res.mixed_u[i] * a(i, j);
      ub = std::max(ub, col);
    }
    double lb = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += a(i, j) * res.mixed_v[j];
      lb = std::min(lb, row);
    }
    worst_duality = std::max(worst_duality, ub - lb);
    if (ub - lb > 1e-8) ++bad;
    if (res.value < lb - 1e-9 || res.value > ub + 1e-9) ++bad;
  }

  // constant weights: the difference-form payoff vanishes identically
  auto model = build_lattice_chain(shared_game("pursuit-1d"), 0.125);
  auto mu = SimplexVector::uniform(model.lattice);
  auto h_const = hamiltonian(model, 0.3, mu, Vec(8, 0.7310588));
  bool const_exact = h_const.value == 0.0;
  for (const auto& g : h_const.games) const_exact = const_exact && g.value == 0.0;

  Vec w(8);
  for (auto& x : w) x = rng.uniform(-1.0, 1.0);
  Vec shifted = w;
  for (auto& x : shifted) x += 17.25;
  double shift_gap =
      std::fabs(hamiltonian(model, 0.2, mu, shifted).value - hamiltonian(model, 0.2, mu, w).value);

  double worst_closed = 0.0;
  std::size_t done = 0;
  while (done < 200) {
    Matrix a(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) a(i, j) = rng.uniform(-2.0, 2.0);
    double minmax = std::min(std::max(a(0, 0), a(0, 1)), std::max(a(1, 0), a(1, 1)));
    double maxmin = std::max(std::min(a(0, 0), a(1, 0)), std::min(a(0, 1), a(1, 1)));
    if (std::fabs(minmax - maxmin) < 1e-6) continue;  // pure saddle or near it
    double denom = a(0, 0) + a(1, 1) - a(0, 1) - a(1, 0);
    if (std::fabs(denom) < 1e-6) continue;
    double closed = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / denom;
    if (closed < maxmin - 1e-9 || closed > minmax + 1e-9) continue;  // mixed form not active
    ++done;
    worst_closed = std::max(worst_closed, std::fabs(solve_matrix_game(a).value - closed));
  }

  bool pass = bad == 0 && const_exact && shift_gap <= 1e-10 && worst_closed <= 1e-10;
  return {pass, "1000 games, duality gap " + fmt(worst_duality) + "; constant weights exact " +
                    std::string(const_exact ? "yes" : "no") + ", shift gap " + fmt(shift_gap) +
                    "; closed-form gap " + fmt(worst_closed)};
}

// ---------------------------------------------------------------- criterion 6

KolmogorovModel two_state_controlled() {
  auto lat = std::make_shared<const Lattice>(
      std::vector<TorusPoint>{TorusPoint({0.0}), TorusPoint({0.5})});
  KolmogorovModel model;
  model.lattice = lat;
  model.controls_u = {{0.0}, {1.0}};
  model.controls_v = {{0.0}, {1.0}};
  model.horizon = 1.0;
  model.epsilon = 1.0;
  model.rate_bound = 0.4;
  model.lipschitz_mu = 0.0;
  model.rate = [](double, const SimplexVector&, std::size_t iu, std::size_t iv) {
    static const double a[2][2] = {{0.10, 0.40}, {0.35, 0.15}};
    static const double b[2][2] = {{0.30, 0.05}, {0.10, 0.25}};
    Matrix q(2, 2);
    q(0, 1) = a[iu][iv];
    q(0, 0) = -a[iu][iv];
    q(1, 0) = b[iu][iv];
    q(1, 1) = -b[iu][iv];
    return q;
  };
  return model;
}

std::pair<bool, std::string> value_solver_crosschecks() {
  auto cost = sine_squared_cost();

  // backward weight solve against the dense simplex grid solver
  auto model2 = two_state_controlled();
  auto lin = solve_linear_value(model2, cost, 1.0 / 512.0);
  GridOptions gopts;
  gopts.resolution = 200;
  gopts.dt = 1.0 / 200.0;
  auto grid = solve_grid(model2, cost, gopts);
  double worst_grid = 0.0;
  for (double t : {0.0, 0.37, 0.71}) {
    for (std::size_t a = 0; a < grid.node_count(); ++a) {
      auto mu = SimplexVector(model2.lattice, grid.node_coords(a));
      worst_grid = std::max(worst_grid, std::fabs(grid.value(t, mu) - lin.value(t, mu)));
    }
  }

  // degenerate control sets: the weight system is a linear ODE
  GameDynamics drift;
  drift.name = "drift";
  drift.dim = 1;
  drift.horizon = 0.8;
  drift.bound_R = 1.0;
  drift.lipschitz_L = 0.0;
  drift.controls_u = {{1.0}};
  drift.controls_v = {{0.0}};
  drift.f = [](double, const TorusPoint&, const DiscreteMeasure&, const Control& u,
               const Control&) { return Vec{u[0]}; };
  auto dmodel = build_lattice_chain(std::make_shared<const GameDynamics>(drift), 0.125);
  auto dfield = solve_linear_value(dmodel, cost, 1.0 / 400.0);
  Matrix q = dmodel.rate(0.0, SimplexVector::uniform(dmodel.lattice), 0, 0);
  Matrix qt(8, 8);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) qt(i, j) = q(j, i);
  Vec c(8);
  for (std::size_t x = 0; x < 8; ++x) {
    double sx = std::sin(std::numbers::pi * dmodel.lattice->points()[x][0]);
    c[x] = sx * sx;
  }
  double worst_expm = 0.0;
  for (std::size_t k = 0; k < dfield.times().size(); k += 16) {
    Vec expect = oracle::expm_law(c, qt, dmodel.horizon - dfield.times()[k]);
    Vec got = dfield.weights_at(dfield.times()[k]);
    for (std::size_t x = 0; x < 8; ++x)
      worst_expm = std::max(worst_expm, std::fabs(got[x] - expect[x]));
  }

  // the solver's own output passes the constructive audit
  auto pmodel = build_lattice_chain(shared_game("pursuit-1d"), 0.125);
  auto pfield = std::make_shared<LinearValueField>(solve_linear_value(pmodel, cost));
  ValueCheckOptions vopts;
  vopts.samples = 6;
  auto rep = verify_supersolution(*pfield, pmodel, cost, vopts);

  bool pass = worst_grid <= 2e-3 && worst_expm <= 1e-8 && rep.pass && rep.violations == 0;
  return {pass, "grid gap " + fmt(worst_grid) + ", expm gap " + fmt(worst_expm) +
                    ", audit violations " + std::to_string(rep.violations) + " in " +
                    std::to_string(rep.samples) + " windows"};
}

// ---------------------------------------------------------------- criterion 7

std::pair<bool, std::string> guide_gap_scaling() {
  auto dyn = shared_game("pursuit-1d");
  auto model = build_lattice_chain(dyn, 0.25);
  auto cost = sine_squared_cost();
  DiscreteMeasure m0({{TorusPoint({0.2}), 0.5}, {TorusPoint({0.3}), 0.5}});
  const std::vector<std::size_t> step_counts = {10, 20, 40};
  std::vector<double> gaps, terminal;
  for (std::size_t steps : step_counts) {
    const double d_delta = 1.0 / static_cast<double>(steps);
    const double dt = cli_detail::aligned_solver_dt(d_delta, model.rate_bound);
    auto field = std::make_shared<LinearValueField>(solve_linear_value(model, cost, dt));
    ExtremalShiftStrategy strat(model, field, partition_of(steps));
    simulate_flow(*dyn, cost, strat, extremal_adversary(), m0, 128);
    double peak = 0.0;
    for (std::size_t k = 0; k <= strat.steps_total(); ++k)
      peak = std::max(peak, strat.guide_gap(k));
    gaps.push_back(peak);
    terminal.push_back(strat.guide_gap(strat.steps_total()));
  }
  bool monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
  double slope = std::log(gaps[0] / gaps[2]) / std::log(4.0);
  bool pass = monotone && slope >= 0.8;
  return {pass, "peak gaps " + fmt(gaps[0]) + " / " + fmt(gaps[1]) + " / " + fmt(gaps[2]) +
                    ", log-log slope " + fmt(slope) + " (terminal " + fmt(terminal[0]) + " / " +
                    fmt(terminal[1]) + " / " + fmt(terminal[2]) + ")"};
}

// ---------------------------------------------------------------- criterion 8

std::pair<bool, std::string> end_to_end_bound() {
  auto dyn = shared_game("pursuit-1d");
  auto cost = sine_squared_cost();
  DiscreteMeasure m0({{TorusPoint({0.2}), 0.5}, {TorusPoint({0.3}), 0.5}});

  // tracking residual under nested partition refinements at a fixed grid
  auto model16 = build_lattice_chain(dyn, 1.0 / 16.0);
  std::vector<double> residuals, outcomes;
  double bound_total = 0.0;
  bool within = true;
  for (std::size_t steps : {10, 20, 40}) {
    const double d_delta = 1.0 / static_cast<double>(steps);
    const double dt = cli_detail::aligned_solver_dt(d_delta, model16.rate_bound);
    auto field = std::make_shared<LinearValueField>(solve_linear_value(model16, cost, dt));
    ExtremalShiftStrategy strat(model16, field, partition_of(steps));
    auto res = simulate_flow(*dyn, cost, strat, extremal_adversary(), m0, 512);
    auto bound = theorem1_bound(*dyn, cost, model16, *field, m0, 0.0);
    double residual = 0.0;
    for (const auto& row : res.trace) residual += row.w2_to_eta;
    residual /= static_cast<double>(res.trace.size());
    residuals.push_back(residual);
    outcomes.push_back(res.outcome);
    bound_total = bound.bound;
    if (res.outcome > bound.phi_value + bound.modulus_term + residual) within = false;
  }
  bool residual_decreasing =
      residuals[0] > residuals[1] && residuals[1] > residuals[2];

  // guaranteed-outcome estimate against the per-agent fixed-grid solver
  auto hji = oracle::agent_hji_1d(
      [&](double t, double x, std::size_t iu, std::size_t iv) {
        return dyn->velocity(t, TorusPoint({x}), m0, iu, iv)[0];
      },
      3, 3,
      [](double x) {
        double sx = std::sin(std::numbers::pi * x);
        return sx * sx;
      },
      1.0, 1024);
  const double v_ref = hji.integrate(m0);

  std::vector<double> errors;
  double eps_finest = 0.0, c_star = 0.0;
  for (std::size_t level = 0; level < 3; ++level) {
    const double h = 1.0 / static_cast<double>(8u << level);
    auto model = build_lattice_chain(dyn, h);
    auto field = std::make_shared<LinearValueField>(solve_linear_value(model, cost));
    ExtremalShiftStrategy proto(model, field, partition_of(8u << level));
    std::vector<Adversary> menu = {constant_adversary(0), constant_adversary(2),
                                   random_adversary(7), extremal_adversary()};
    auto est = estimate_value(*dyn, cost, proto, menu, m0, 128, 2);
    errors.push_back(std::fabs(est.upper - v_ref));
    auto bound = theorem1_bound(*dyn, cost, model, *field, m0, 0.0);
    eps_finest = bound.epsilon;
    c_star = bound.c_star;
  }
  bool errors_decreasing = errors[0] > errors[1] && errors[1] > errors[2];
  const double finest_budget = std::numbers::pi * c_star * eps_finest * 1.5;
  bool finest_ok = errors.back() <= finest_budget;

  bool pass = within && residual_decreasing && errors_decreasing && finest_ok;
  return {pass, "residuals " + fmt(residuals[0]) + " / " + fmt(residuals[1]) + " / " +
                    fmt(residuals[2]) + " (outcomes " + fmt(outcomes[0]) + " / " +
                    fmt(outcomes[1]) + " / " + fmt(outcomes[2]) + ", bound " + fmt(bound_total) +
                    "); estimate errors " + fmt(errors[0]) + " / " + fmt(errors[1]) + " / " +
                    fmt(errors[2]) + " vs budget " + fmt(finest_budget)};
}

// ---------------------------------------------------------------- criterion 9

int cli(std::vector<std::string> args) {
  std::vector<std::string> all;
  all.emplace_back("mftg");
  for (auto& a : args) all.push_back(std::move(a));
  std::vector<char*> argv;
  argv.reserve(all.size());
  for (auto& s : all) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[entry.path().filename().string()] = os.str();
  }
  return out;
}

std::pair<bool, std::string> output_determinism() {
  fs::path base = fs::temp_directory_path() / "mftg_acceptance";
  fs::remove_all(base);
  struct Job {
    std::string name;
    std::vector<std::string> args;
  };
  std::vector<Job> jobs = {
      {"lattice", {"lattice", "--game", "pursuit-1d", "--h", "1/8", "--seed", "5"}},
      {"chain-sim", {"chain-sim", "--game", "pursuit-1d", "--h", "1/8", "--paths", "4", "--seed",
                     "5"}},
      {"solve", {"solve", "--game", "pursuit-1d", "--h", "1/8"}},
      {"simulate", {"simulate", "--game", "pursuit-1d", "--h", "1/4", "--particles", "16",
                    "--partition", "2", "--adversary", "random", "--seed", "5"}},
      {"convergence", {"convergence", "--game", "pursuit-1d", "--levels", "2", "--particles",
                       "32", "--seed", "5"}},
      {"verify", {"verify", "--suite", "metrics", "--seed", "5"}}};
  std::size_t mismatched = 0, files = 0;
  for (const auto& job : jobs) {
    fs::path da = base / (job.name + "_a"), db = base / (job.name + "_b");
    for (const auto& dir : {da, db}) {
      auto args = job.args;
      args.push_back("--out");
      args.push_back(dir.string());
      if (cli(args) != 0) return {false, job.name + " exited nonzero"};
    }
    auto ca = dir_contents(da), cb = dir_contents(db);
    if (ca.size() != cb.size() || ca.empty()) return {false, job.name + " file sets differ"};
    for (const auto& [name, bytes] : ca) {
      ++files;
      auto it = cb.find(name);
      if (it == cb.end() || it->second != bytes) ++mismatched;
    }
  }
  return {mismatched == 0, std::to_string(jobs.size()) + " subcommands, " +
                               std::to_string(files) + " files compared, " +
                               std::to_string(mismatched) + " mismatches"};
}

}  // namespace

int main() {
  run_criterion(1, "metric comparison suite", metric_suite);
  run_criterion(2, "chain certification", chain_certification);
  run_criterion(3, "law integration", law_integration);
  run_criterion(4, "path moment bounds", path_moments);
  run_criterion(5, "matrix game saddle", saddle_points);
  run_criterion(6, "value solver cross-checks", value_solver_crosschecks);
  run_criterion(7, "guide gap scaling", guide_gap_scaling);
  run_criterion(8, "end-to-end value bound", end_to_end_bound);
  run_criterion(9, "output determinism", output_determinism);
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
