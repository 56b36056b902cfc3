#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mftg/catalog.hpp"
#include "mftg/chainsim.hpp"
#include "mftg/csv.hpp"
#include "mftg/hj.hpp"
#include "mftg/markov.hpp"
#include "mftg/mfsim.hpp"
#include "mftg/oracle.hpp"
#include "mftg/strategy.hpp"

namespace mftg {
namespace cli_detail {

namespace fs = std::filesystem;

inline std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

inline std::size_t parse_count(const std::string& text, const std::string& what,
                               std::size_t min_value = 1) {
  const std::string s = detail::trim(text);
  if (s.empty() || s[0] == '-') throw InvalidInput(what + ": need a positive integer, got " + s);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput(what + ": cannot parse " + s);
  }
  if (used != s.size()) throw InvalidInput(what + ": trailing text in " + s);
  if (v < min_value)
    throw InvalidInput(what + ": must be at least " + std::to_string(min_value));
  return static_cast<std::size_t>(v);
}

inline std::uint64_t parse_seed(const std::string& text) {
  const std::string s = detail::trim(text);
  if (s.empty() || s[0] == '-') throw InvalidInput("--seed: need a nonnegative integer");
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("--seed: cannot parse " + s);
  }
  if (used != s.size()) throw InvalidInput("--seed: trailing text in " + s);
  return static_cast<std::uint64_t>(v);
}

inline double c_star_of(const GameDynamics& dyn) {
  const double T = dyn.horizon, L = dyn.lipschitz_L;
  return std::sqrt(1.0 + 2.0 * T) * std::exp((2.0 * L + 0.5) * T);
}

inline std::shared_ptr<const GameDynamics> load_game(const std::string& name) {
  return std::make_shared<const GameDynamics>(make_game(name));
}

inline std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

inline std::vector<double> uniform_partition(std::size_t steps, double horizon) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    t[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  t.back() = horizon;
  return t;
}

// Solver step that divides the partition step exactly, so every partition
// node is a solver node and the value field is exact there (no interpolation
// error feeding the strategy's per-step audit). Step-halving refinement
// inside the solver keeps the alignment.
inline double aligned_solver_dt(double d_delta, double rate_bound) {
  const double target = 0.25 / std::max(4.0, rate_bound);
  return d_delta / std::ceil(d_delta / target);
}

inline DiscreteMeasure default_m0(std::size_t dim) {
  Vec a(dim, 0.2), b(dim, 0.3);
  return DiscreteMeasure({{TorusPoint(a), 0.5}, {TorusPoint(b), 0.5}});
}

// "x:w,x:w" with space-separated coordinates for d > 1, weights summing to 1.
inline DiscreteMeasure parse_m0(const std::string& text, std::size_t dim) {
  std::vector<WeightedAtom> atoms;
  double total = 0.0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string entry =
        detail::trim(text.substr(start, comma == std::string::npos ? comma : comma - start));
    start = comma == std::string::npos ? text.size() + 1 : comma + 1;
    if (entry.empty()) continue;
    std::size_t colon = entry.rfind(':');
    if (colon == std::string::npos)
      throw InvalidInput("--m0: entry '" + entry + "' is not coords:weight");
    std::string coords = detail::trim(entry.substr(0, colon));
    double w = parse_ratio(entry.substr(colon + 1));
    Vec x;
    std::size_t p = 0;
    while (p < coords.size()) {
      while (p < coords.size() && std::isspace(static_cast<unsigned char>(coords[p]))) ++p;
      if (p >= coords.size()) break;
      std::size_t q = p;
      while (q < coords.size() && !std::isspace(static_cast<unsigned char>(coords[q]))) ++q;
      try {
        x.push_back(std::stod(coords.substr(p, q - p)));
      } catch (const std::exception&) {
        throw InvalidInput("--m0: bad coordinate in '" + entry + "'");
      }
      p = q;
    }
    if (x.size() != dim)
      throw InvalidInput("--m0: entry '" + entry + "' has " + std::to_string(x.size()) +
                         " coordinates, the game needs " + std::to_string(dim));
    atoms.push_back({TorusPoint(x), w});
    total += w;
  }
  if (atoms.empty()) throw InvalidInput("--m0: no atoms given");
  if (std::fabs(total - 1.0) > 1e-9)
    throw InvalidInput("--m0: weights sum to " + format_double(total) + ", need 1");
  return DiscreteMeasure(atoms);
}

// constant | constant:K | random | random:SEED | extremal
inline Adversary parse_adversary(const std::string& text, std::uint64_t seed) {
  const std::string s = detail::trim(text);
  if (s == "extremal") return extremal_adversary();
  if (s == "constant") return constant_adversary(0);
  if (s == "random") return random_adversary(seed);
  if (s.rfind("constant:", 0) == 0)
    return constant_adversary(parse_count(s.substr(9), "--adversary constant index", 0));
  if (s.rfind("random:", 0) == 0) return random_adversary(parse_seed(s.substr(7)));
  throw InvalidInput("--adversary: unknown kind '" + s +
                     "' (use constant[:K], random[:SEED], extremal)");
}

struct SimulateRun {
  FlowResult flow;
  BoundComponents bound;
  double residual = 0.0;  // time-averaged W2(m_k, eta~(t_k)) over partition steps
  std::vector<double> w2_to_guide;  // one value per partition node
};

inline SimulateRun run_flow(const GameDynamics& dyn, const KolmogorovModel& model,
                            const TerminalCost& cost,
                            const std::shared_ptr<const ValueField>& field, std::size_t steps,
                            const Adversary& adv, const DiscreteMeasure& m0,
                            std::size_t particles, double ode_dt) {
  ExtremalShiftStrategy strat(model, field, uniform_partition(steps, model.horizon));
  SimulateRun run;
  run.flow = simulate_flow(dyn, cost, strat, adv, m0, particles, ode_dt);
  run.bound = theorem1_bound(dyn, cost, model, *field, m0, 0.0);
  for (const auto& row : run.flow.trace) run.residual += row.w2_to_eta;
  if (!run.flow.trace.empty()) run.residual /= static_cast<double>(run.flow.trace.size());
  run.w2_to_guide.reserve(run.flow.flow.size());
  for (std::size_t k = 0; k < run.flow.flow.size(); ++k)
    run.w2_to_guide.push_back(
        wasserstein(2, run.flow.flow[k], embed(strat.guide_eta(k))).value);
  return run;
}

inline std::string yes_no(bool v) { return v ? "yes" : "no"; }

inline int run_lattice(const std::string& game, double h, bool split, std::uint64_t seed,
                       const std::string& out) {
  auto dyn = load_game(game);
  KolmogorovModel model = split ? build_split_chain(dyn, h) : build_lattice_chain(dyn, h);
  const std::size_t n = model.n_states();

  write_lattice_csv(out_path(out, "lattice.csv"), *model.lattice);

  std::vector<std::string> cols;
  for (std::size_t y = 0; y < n; ++y) cols.push_back("q_" + std::to_string(y + 1));
  CsvWriter rates(out_path(out, "rates.csv"), cols);
  Matrix q = model.rate(0.0, SimplexVector::uniform(model.lattice), 0, 0);
  for (std::size_t s = 0; s < n; ++s) {
    Vec row(n);
    for (std::size_t y = 0; y < n; ++y) row[y] = q(s, y);
    rates.row(row);
  }

  auto cert = certify_epsilon(model, 32, seed);
  {
    std::ofstream rep(out_path(out, "epsilon_report.txt"));
    rep << "game: " << game << "\n";
    rep << "h: " << format_double(model.h) << "\n";
    rep << "states: " << n << "\n";
    rep << "epsilon: " << format_double(cert.epsilon) << "\n";
    rep << "covering_radius: " << format_double(cert.covering) << "\n";
    rep << "worst_offdiag: " << format_double(cert.worst_offdiag) << "\n";
    rep << "worst_row_sum: " << format_double(cert.worst_row_sum) << "\n";
    rep << "drift_defect: " << format_double(cert.drift_defect) << "\n";
    rep << "second_moment: " << format_double(cert.second_moment) << "\n";
    rep << "second_moment_budget: " << format_double(cert.epsilon * cert.epsilon) << "\n";
    rep << "rate_outflow: " << format_double(cert.rate_outflow) << "\n";
    rep << "rate_bound: " << format_double(model.rate_bound) << "\n";
    rep << "mu_ratio: " << format_double(cert.mu_ratio) << "\n";
    if (model.separated()) rep << "split_defect: " << format_double(cert.split_defect) << "\n";
    rep << "pass: " << yes_no(cert.pass) << "\n";
    if (!cert.pass) rep << "detail: " << cert.detail << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"),
                 {{"command", "lattice"},
                  {"game", game},
                  {"h", format_double(model.h)},
                  {"split", yes_no(split)},
                  {"seed", std::to_string(seed)},
                  {"states", std::to_string(n)},
                  {"epsilon", format_double(model.epsilon)},
                  {"c_star", format_double(c_star_of(*dyn))},
                  {"r1", format_double(moment_R1(dyn->bound_R, dyn->dim))}});
  return cert.pass ? 0 : 2;
}

inline int run_chain_sim(const std::string& game, double h, std::size_t paths,
                         std::uint64_t seed, const std::string& out) {
  auto dyn = load_game(game);
  KolmogorovModel model = build_lattice_chain(dyn, h);
  const std::size_t n = model.n_states();
  Feedback fu = constant_feedback(
      n, Vec(model.controls_u.size(), 1.0 / static_cast<double>(model.controls_u.size())));
  Feedback fv = constant_feedback(
      n, Vec(model.controls_v.size(), 1.0 / static_cast<double>(model.controls_v.size())));
  auto mu0 = SimplexVector::uniform(model.lattice);
  auto flow = integrate_kolmogorov(model, mu0, fu, fv, 0.0, model.horizon);

  {
    std::vector<std::string> cols = {"t"};
    for (std::size_t x = 0; x < n; ++x) cols.push_back("mu_" + std::to_string(x + 1));
    CsvWriter law(out_path(out, "law.csv"), cols);
    for (std::size_t i = 0; i < flow.times.size(); ++i) {
      Vec row;
      row.reserve(n + 1);
      row.push_back(flow.times[i]);
      for (double m : flow.laws[i]) row.push_back(m);
      law.row(row);
    }
  }
  {
    CsvWriter pcsv(out_path(out, "paths.csv"), {"path", "t", "state"});
    for (std::size_t p = 0; p < paths; ++p) {
      Rng rng(split_seed(seed, p + 1));
      ChainPath path =
          sample_chain(model, flow, fu, fv, p % n, 0.0, model.horizon, rng);
      pcsv.row(Vec{static_cast<double>(p), path.start, static_cast<double>(path.states[0])});
      for (std::size_t j = 0; j < path.jump_times.size(); ++j)
        pcsv.row(Vec{static_cast<double>(p), path.jump_times[j],
                     static_cast<double>(path.states[j + 1])});
    }
  }

  const std::vector<std::pair<double, double>> intervals = {
      {0.0, 0.05}, {0.25, 0.35}, {0.5, 1.0}};
  auto chk = moment_bounds_check(model, flow, fu, fv, intervals, 16, split_seed(seed, 0));
  {
    std::ofstream rep(out_path(out, "moments_report.txt"));
    rep << "game: " << game << "\n";
    rep << "h: " << format_double(model.h) << "\n";
    rep << "r1: " << format_double(chk.r1) << "\n";
    rep << "worst_coarse_ratio: " << format_double(chk.worst_coarse) << "\n";
    rep << "worst_fine_ratio: " << format_double(chk.worst_fine) << "\n";
    rep << "worst_flow_ratio: " << format_double(chk.worst_flow) << "\n";
    rep << "pass: " << yes_no(chk.pass) << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"),
                 {{"command", "chain-sim"},
                  {"game", game},
                  {"h", format_double(model.h)},
                  {"paths", std::to_string(paths)},
                  {"seed", std::to_string(seed)},
                  {"states", std::to_string(n)},
                  {"epsilon", format_double(model.epsilon)},
                  {"c_star", format_double(c_star_of(*dyn))},
                  {"r1", format_double(chk.r1)}});
  return chk.pass ? 0 : 2;
}

inline int run_solve(const std::string& game, double h, double dt, const std::string& out) {
  auto dyn = load_game(game);
  KolmogorovModel model = build_lattice_chain(dyn, h);
  auto cost = sine_squared_cost();
  LinearValueField field = solve_linear_value(model, cost, dt);
  const std::size_t n = model.n_states();
  {
    std::vector<std::string> cols = {"t"};
    for (std::size_t x = 0; x < n; ++x) cols.push_back("w_" + std::to_string(x + 1));
    CsvWriter vcsv(out_path(out, "value.csv"), cols);
    for (std::size_t i = 0; i < field.times().size(); ++i) {
      Vec row;
      row.reserve(n + 1);
      row.push_back(field.times()[i]);
      for (double w : field.weights_grid()[i]) row.push_back(w);
      vcsv.row(row);
    }
  }
  {
    std::ofstream rep(out_path(out, "solve_report.txt"));
    rep << "game: " << game << "\n";
    rep << "h: " << format_double(model.h) << "\n";
    rep << "time_nodes: " << field.times().size() << "\n";
    rep << "residual: " << format_double(field.residual()) << "\n";
    rep << "value_at_uniform: "
        << format_double(field.value(0.0, SimplexVector::uniform(model.lattice))) << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"),
                 {{"command", "solve"},
                  {"game", game},
                  {"h", format_double(model.h)},
                  {"dt", format_double(dt)},
                  {"states", std::to_string(n)},
                  {"epsilon", format_double(model.epsilon)},
                  {"c_star", format_double(c_star_of(*dyn))},
                  {"r1", format_double(moment_R1(dyn->bound_R, dyn->dim))}});
  return 0;
}

inline int run_simulate(const std::string& game, double h, std::size_t particles,
                        std::size_t steps, const std::string& adversary, std::uint64_t seed,
                        const std::string& m0_text, double ode_dt, const std::string& out) {
  auto dyn = load_game(game);
  KolmogorovModel model = build_lattice_chain(dyn, h);
  auto cost = sine_squared_cost();
  const double d_delta = model.horizon / static_cast<double>(steps);
  const double dt = aligned_solver_dt(d_delta, model.rate_bound);
  auto field = std::make_shared<LinearValueField>(solve_linear_value(model, cost, dt));
  DiscreteMeasure m0 = m0_text.empty() ? default_m0(dyn->dim) : parse_m0(m0_text, dyn->dim);
  Adversary adv = parse_adversary(adversary, seed);
  auto run = run_flow(*dyn, model, cost, field, steps, adv, m0, particles, ode_dt);
  const auto& res = run.flow;

  {
    CsvWriter trace(out_path(out, "trace.csv"), {"t", "guide_gap", "w2_to_eta", "phi"});
    for (const auto& row : res.trace) trace.row(Vec{row.t, row.guide_gap, row.w2_to_eta, row.phi});
  }
  {
    const std::size_t d = dyn->dim;
    std::vector<std::string> cols = {"t", "atoms"};
    for (std::size_t c = 0; c < d; ++c) cols.push_back("mean_" + std::to_string(c + 1));
    for (std::size_t c = 0; c < d; ++c) cols.push_back("disp_" + std::to_string(c + 1));
    cols.push_back("w2_to_guide");
    CsvWriter fcsv(out_path(out, "flow.csv"), cols);
    for (std::size_t k = 0; k < res.flow.size(); ++k) {
      const auto& m = res.flow[k];
      Vec row;
      row.push_back(res.times[k]);
      row.push_back(static_cast<double>(m.size()));
      // circular mean and variance per coordinate
      for (std::size_t c = 0; c < d; ++c) {
        double cs = 0.0, sn = 0.0;
        for (const auto& a : m.atoms()) {
          double ang = 2.0 * std::numbers::pi * a.point[c];
          cs += a.weight * std::cos(ang);
          sn += a.weight * std::sin(ang);
        }
        double mean = std::atan2(sn, cs) / (2.0 * std::numbers::pi);
        row.push_back(wrap_unit(mean));
      }
      for (std::size_t c = 0; c < d; ++c) {
        double cs = 0.0, sn = 0.0;
        for (const auto& a : m.atoms()) {
          double ang = 2.0 * std::numbers::pi * a.point[c];
          cs += a.weight * std::cos(ang);
          sn += a.weight * std::sin(ang);
        }
        row.push_back(1.0 - std::hypot(cs, sn));
      }
      row.push_back(run.w2_to_guide[k]);
      fcsv.row(row);
    }
  }
  write_measure_csv(out_path(out, "final.csv"), res.flow.back());

  const bool within = res.outcome <= run.bound.bound + 1e-12;
  {
    std::ofstream rep(out_path(out, "report.txt"));
    rep << "game: " << game << "\n";
    rep << "adversary: " << adv.name << "\n";
    rep << "outcome: " << format_double(res.outcome) << "\n";
    rep << "phi_plus: " << format_double(run.bound.phi_value) << "\n";
    rep << "epsilon: " << format_double(run.bound.epsilon) << "\n";
    rep << "c_star: " << format_double(run.bound.c_star) << "\n";
    rep << "modulus_term: " << format_double(run.bound.modulus_term) << "\n";
    rep << "bound: " << format_double(run.bound.bound) << "\n";
    rep << "projection_gap: " << format_double(run.bound.projection_gap) << "\n";
    rep << "residual_proxy: " << format_double(run.residual) << "\n";
    rep << "final_w2_to_mu: " << format_double(res.final_w2_to_mu) << "\n";
    rep << "final_w2_to_eta: " << format_double(res.final_w2_to_eta) << "\n";
    rep << "resampled: " << yes_no(res.resampled) << "\n";
    rep << "within_bound: " << yes_no(within) << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"),
                 {{"command", "simulate"},
                  {"game", game},
                  {"h", format_double(model.h)},
                  {"particles", std::to_string(particles)},
                  {"partition_steps", std::to_string(steps)},
                  {"adversary", adv.name},
                  {"seed", std::to_string(seed)},
                  {"ode_dt", format_double(ode_dt)},
                  {"solver_dt", format_double(dt)},
                  {"epsilon", format_double(run.bound.epsilon)},
                  {"c_star", format_double(run.bound.c_star)},
                  {"r1", format_double(moment_R1(dyn->bound_R, dyn->dim))}});
  return within ? 0 : 2;
}

inline int run_convergence(const std::string& game, std::size_t levels, std::size_t particles,
                           std::uint64_t seed, const std::string& m0_text, double ode_dt,
                           const std::string& out) {
  auto dyn = load_game(game);
  auto cost = sine_squared_cost();
  Adversary adv = extremal_adversary();
  CsvWriter table(out_path(out, "convergence.csv"),
                  {"level", "h", "d_delta", "particles", "outcome", "phi", "bound", "residual",
                   "gap"});
  std::vector<double> gaps;
  double epsilon_finest = 0.0, c_star = c_star_of(*dyn);
  for (std::size_t level = 0; level < levels; ++level) {
    const std::size_t k = std::size_t{8} << level;
    const double h = 1.0 / static_cast<double>(k);
    KolmogorovModel model = build_lattice_chain(dyn, h);
    const std::size_t steps = k;
    const double d_delta = model.horizon / static_cast<double>(steps);
    const double dt = aligned_solver_dt(d_delta, model.rate_bound);
    auto field = std::make_shared<LinearValueField>(solve_linear_value(model, cost, dt));
    DiscreteMeasure m0 = m0_text.empty() ? default_m0(dyn->dim) : parse_m0(m0_text, dyn->dim);
    auto run = run_flow(*dyn, model, cost, field, steps, adv, m0, particles, ode_dt);
    const double gap = std::fabs(run.flow.outcome - run.bound.phi_value);
    gaps.push_back(gap);
    epsilon_finest = run.bound.epsilon;
    table.row(Vec{static_cast<double>(level), h, d_delta, static_cast<double>(particles),
                  run.flow.outcome, run.bound.phi_value, run.bound.bound, run.residual, gap});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < gaps.size(); ++i)
    if (gaps[i] > gaps[i - 1] + 1e-12) monotone = false;
  {
    std::ofstream rep(out_path(out, "convergence_report.txt"));
    rep << "game: " << game << "\n";
    rep << "levels: " << levels << "\n";
    rep << "gap_non_increasing: " << yes_no(monotone) << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"),
                 {{"command", "convergence"},
                  {"game", game},
                  {"levels", std::to_string(levels)},
                  {"particles", std::to_string(particles)},
                  {"seed", std::to_string(seed)},
                  {"ode_dt", format_double(ode_dt)},
                  {"epsilon_finest", format_double(epsilon_finest)},
                  {"c_star", format_double(c_star)},
                  {"r1", format_double(moment_R1(dyn->bound_R, dyn->dim))}});
  return monotone ? 0 : 2;
}

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline SuiteResult verify_metrics(std::uint64_t seed) {
  SuiteResult res{"metrics", true, ""};
  Rng rng(split_seed(seed, 1));
  std::size_t checked = 0, violations = 0;
  for (std::size_t size : {4u, 8u, 16u}) {
    auto lat = Lattice::regular(1, size);
    for (int p : {1, 2}) {
      for (std::size_t i = 0; i < 40; ++i) {
        SimplexVector mu1(lat, rng.simplex_point(size));
        SimplexVector mu2(lat, rng.simplex_point(size));
        auto cmp = metric_comparison(p, mu1, mu2);
        ++checked;
        if (!cmp.lower_ok || !cmp.upper_ok) ++violations;
      }
    }
  }
  double worst_cross = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    for (int p : {1, 2}) {
      std::vector<WeightedAtom> a1, a2;
      for (std::size_t j = 0; j < 4; ++j) {
        a1.push_back({TorusPoint({rng.uniform()}), 0.25});
        a2.push_back({TorusPoint({rng.uniform()}), 0.25});
      }
      DiscreteMeasure m1(a1), m2(a2);
      double lp = wasserstein(p, m1, m2).value;
      double brute = oracle::ot_assignment(p, m1, m2).value;
      worst_cross = std::max(worst_cross, std::fabs(lp - brute));
    }
  }
  if (violations > 0 || worst_cross > 1e-10) res.pass = false;
  res.detail = "pairs: " + std::to_string(checked) +
               ", violations: " + std::to_string(violations) +
               ", worst_oracle_gap: " + format_double(worst_cross);
  return res;
}

inline SuiteResult verify_chain(std::uint64_t seed) {
  SuiteResult res{"chain", true, ""};
  for (const std::string& game : {std::string("pursuit-1d"), std::string("crowd-averse-1d")}) {
    auto dyn = load_game(game);
    auto model = build_lattice_chain(dyn, 1.0 / 8.0);
    auto cert = certify_epsilon(model, 16, split_seed(seed, 2));
    if (!cert.pass) {
      res.pass = false;
      res.detail += game + ": " + cert.detail + "; ";
    } else {
      res.detail += game + ": epsilon " + format_double(cert.epsilon) + "; ";
    }
  }
  return res;
}

inline SuiteResult verify_value(std::uint64_t seed) {
  SuiteResult res{"value", true, ""};
  auto dyn = load_game("pursuit-1d");
  auto model = build_lattice_chain(dyn, 1.0 / 8.0);
  auto cost = sine_squared_cost();
  auto field = std::make_shared<LinearValueField>(solve_linear_value(model, cost));
  ValueCheckOptions opts;
  opts.samples = 6;
  opts.seed = split_seed(seed, 3);
  auto rep = verify_supersolution(*field, model, cost, opts);
  res.pass = rep.pass && rep.violations == 0;
  res.detail = "samples: " + std::to_string(rep.samples) +
               ", violations: " + std::to_string(rep.violations) +
               ", worst_drift: " + format_double(rep.worst_drift);
  return res;
}

inline int run_verify(const std::string& suite, std::uint64_t seed, const std::string& out) {
  std::vector<SuiteResult> results;
  if (suite == "metrics" || suite == "all") results.push_back(verify_metrics(seed));
  if (suite == "chain" || suite == "all") results.push_back(verify_chain(seed));
  if (suite == "value" || suite == "all") results.push_back(verify_value(seed));
  if (results.empty())
    throw InvalidInput("--suite: unknown suite '" + suite + "' (use metrics, chain, value, all)");
  bool all_pass = true;
  {
    std::ofstream rep(out_path(out, "verify_report.txt"));
    for (const auto& r : results) {
      rep << r.name << ": " << (r.pass ? "pass" : "FAIL") << " (" << r.detail << ")\n";
      if (!r.pass) all_pass = false;
    }
    rep << "overall: " << yes_no(all_pass) << "\n";
  }
  write_manifest(out_path(out, "manifest.txt"), {{"command", "verify"},
                                                 {"suite", suite},
                                                 {"seed", std::to_string(seed)}});
  return all_pass ? 0 : 2;
}

}  // namespace cli_detail

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 usage or input error, 2 a certification or bound check failed.
inline int run(int argc, char** argv) {
  using namespace cli_detail;
  Config cfg;
  try {
    std::string cfg_path = find_config_arg(argc, argv);
    if (!cfg_path.empty()) cfg = Config::from_file(cfg_path);
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  CLI::App app{"finite-state mean-field game toolkit on the flat torus"};
  app.require_subcommand(1);
  // --h is a real option, so the help flag must not claim the short -h
  app.set_help_flag("--help", "print help and exit");

  int rc = 0;
  std::string config_path;  // consumed by the pre-scan; declared so parsing accepts it
  auto add_sub = [&app](const std::string& name, const std::string& desc) {
    auto* s = app.add_subcommand(name, desc);
    s->set_help_flag("--help", "print help and exit");
    return s;
  };

  struct LatticeArgs {
    std::string game, h, seed, out;
    bool split = false;
  } lat;
  auto* sub_lat = add_sub("lattice", "build a lattice chain and certify it");
  sub_lat->add_option("--game", lat.game, "game name")
      ->default_val(cfg.get("lattice", "game", "pursuit-1d"));
  sub_lat->add_option("--h", lat.h, "grid pitch, e.g. 1/16")
      ->default_val(cfg.get("lattice", "h", "1/8"));
  sub_lat->add_flag("--split", lat.split, "build the separated-rate variant");
  sub_lat->add_option("--seed", lat.seed, "master seed")
      ->default_val(cfg.get("lattice", "seed", "1"));
  sub_lat->add_option("--out", lat.out, "output directory")
      ->default_val(cfg.get("lattice", "out", "out"));
  sub_lat->add_option("--config", config_path, "key=value defaults file");
  sub_lat->callback([&] {
    rc = run_lattice(lat.game, parse_ratio(lat.h), lat.split, parse_seed(lat.seed), lat.out);
  });

  struct ChainArgs {
    std::string game, h, paths, seed, out;
  } ch;
  auto* sub_ch = add_sub("chain-sim", "integrate the law and sample agent paths");
  sub_ch->add_option("--game", ch.game, "game name")
      ->default_val(cfg.get("chain-sim", "game", "pursuit-1d"));
  sub_ch->add_option("--h", ch.h, "grid pitch")->default_val(cfg.get("chain-sim", "h", "1/8"));
  sub_ch->add_option("--paths", ch.paths, "number of sampled paths")
      ->default_val(cfg.get("chain-sim", "paths", "16"));
  sub_ch->add_option("--seed", ch.seed, "master seed")
      ->default_val(cfg.get("chain-sim", "seed", "1"));
  sub_ch->add_option("--out", ch.out, "output directory")
      ->default_val(cfg.get("chain-sim", "out", "out"));
  sub_ch->add_option("--config", config_path, "key=value defaults file");
  sub_ch->callback([&] {
    rc = run_chain_sim(ch.game, parse_ratio(ch.h), parse_count(ch.paths, "--paths"),
                       parse_seed(ch.seed), ch.out);
  });

  struct SolveArgs {
    std::string game, h, dt, out;
  } so;
  auto* sub_so = add_sub("solve", "solve the value weight system backward");
  sub_so->add_option("--game", so.game, "game name")
      ->default_val(cfg.get("solve", "game", "pursuit-1d"));
  sub_so->add_option("--h", so.h, "grid pitch")->default_val(cfg.get("solve", "h", "1/8"));
  sub_so->add_option("--dt", so.dt, "time step, 0 picks one from the rate bound")
      ->default_val(cfg.get("solve", "dt", "0"));
  sub_so->add_option("--out", so.out, "output directory")
      ->default_val(cfg.get("solve", "out", "out"));
  sub_so->add_option("--config", config_path, "key=value defaults file");
  sub_so->callback([&] {
    double dt = so.dt == "0" ? 0.0 : parse_ratio(so.dt);
    rc = run_solve(so.game, parse_ratio(so.h), dt, so.out);
  });

  struct SimArgs {
    std::string game, h, particles, partition, adversary, seed, m0, ode_dt, out;
  } si;
  auto* sub_si = add_sub("simulate", "run the particle flow under a strategy");
  sub_si->add_option("--game", si.game, "game name")
      ->default_val(cfg.get("simulate", "game", "pursuit-1d"));
  sub_si->add_option("--h", si.h, "grid pitch")->default_val(cfg.get("simulate", "h", "1/8"));
  sub_si->add_option("--particles", si.particles, "ensemble size")
      ->default_val(cfg.get("simulate", "particles", "128"));
  sub_si->add_option("--partition", si.partition, "number of strategy steps")
      ->default_val(cfg.get("simulate", "partition", "8"));
  sub_si->add_option("--adversary", si.adversary, "constant[:K], random[:SEED], extremal")
      ->default_val(cfg.get("simulate", "adversary", "extremal"));
  sub_si->add_option("--seed", si.seed, "master seed")
      ->default_val(cfg.get("simulate", "seed", "1"));
  sub_si->add_option("--m0", si.m0, "initial measure, x:w pairs separated by commas")
      ->default_val(cfg.get("simulate", "m0", ""));
  sub_si->add_option("--ode-dt", si.ode_dt, "particle integrator step")
      ->default_val(cfg.get("simulate", "ode-dt", "0.01"));
  sub_si->add_option("--out", si.out, "output directory")
      ->default_val(cfg.get("simulate", "out", "out"));
  sub_si->add_option("--config", config_path, "key=value defaults file");
  sub_si->callback([&] {
    rc = run_simulate(si.game, parse_ratio(si.h), parse_count(si.particles, "--particles"),
                      parse_count(si.partition, "--partition"), si.adversary,
                      parse_seed(si.seed), si.m0, parse_ratio(si.ode_dt), si.out);
  });

  struct ConvArgs {
    std::string game, levels, particles, seed, m0, ode_dt, out;
  } co;
  auto* sub_co = add_sub("convergence", "joint grid and partition refinement study");
  sub_co->add_option("--game", co.game, "game name")
      ->default_val(cfg.get("convergence", "game", "pursuit-1d"));
  sub_co->add_option("--levels", co.levels, "number of refinement levels")
      ->default_val(cfg.get("convergence", "levels", "3"));
  sub_co->add_option("--particles", co.particles, "ensemble size")
      ->default_val(cfg.get("convergence", "particles", "256"));
  sub_co->add_option("--seed", co.seed, "master seed")
      ->default_val(cfg.get("convergence", "seed", "1"));
  sub_co->add_option("--m0", co.m0, "initial measure, x:w pairs separated by commas")
      ->default_val(cfg.get("convergence", "m0", ""));
  sub_co->add_option("--ode-dt", co.ode_dt, "particle integrator step")
      ->default_val(cfg.get("convergence", "ode-dt", "0.01"));
  sub_co->add_option("--out", co.out, "output directory")
      ->default_val(cfg.get("convergence", "out", "out"));
  sub_co->add_option("--config", config_path, "key=value defaults file");
  sub_co->callback([&] {
    rc = run_convergence(co.game, parse_count(co.levels, "--levels"),
                         parse_count(co.particles, "--particles"), parse_seed(co.seed), co.m0,
                         parse_ratio(co.ode_dt), co.out);
  });

  struct VerifyArgs {
    std::string suite, seed, out;
  } ve;
  auto* sub_ve = add_sub("verify", "run self-check suites");
  sub_ve->add_option("--suite", ve.suite, "metrics, chain, value, or all")
      ->default_val(cfg.get("verify", "suite", "all"));
  sub_ve->add_option("--seed", ve.seed, "master seed")
      ->default_val(cfg.get("verify", "seed", "1"));
  sub_ve->add_option("--out", ve.out, "output directory")
      ->default_val(cfg.get("verify", "out", "out"));
  sub_ve->add_option("--config", config_path, "key=value defaults file");
  sub_ve->callback(
      [&] { rc = run_verify(ve.suite, parse_seed(ve.seed), ve.out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const CertificationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}

}  // namespace mftg
