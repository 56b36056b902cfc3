#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mftg/common.hpp"
#include "mftg/dynamics.hpp"
#include "mftg/hj.hpp"
#include "mftg/markov.hpp"
#include "mftg/measures.hpp"
#include "mftg/rng.hpp"
#include "mftg/strategy.hpp"
#include "mftg/torus.hpp"

namespace mftg {

// One simulated agent. Every particle carries mass 1/N. Controls are pure and
// constant on each partition step; plan_entry records which transport-plan row
// produced them, channel is the particle's rank in the position-sorted order
// of the step (so storage order never influences the run).
struct Particle {
  TorusPoint position;
  std::size_t control_u = 0;
  std::size_t control_v = 0;
  std::size_t plan_entry = 0;
  std::size_t channel = 0;
};

struct ParticleEnsemble {
  std::vector<Particle> particles;

  std::size_t size() const { return particles.size(); }

  double particle_weight() const {
    return particles.empty() ? 0.0 : 1.0 / static_cast<double>(particles.size());
  }

  DiscreteMeasure measure() const {
    if (particles.empty()) throw InvalidInput("ParticleEnsemble: empty");
    std::vector<TorusPoint> pts;
    pts.reserve(particles.size());
    for (const auto& p : particles) pts.push_back(p.position);
    return DiscreteMeasure::empirical(pts);
  }
};

// Second-player policy queried once per particle per partition step; the
// reply is a control index held fixed on [t_k, t_{k+1}). `constant` always
// plays one control, `random` draws per (step, channel) from a seeded stream,
// `extremal` plays the shift reply against the particle's guide pairing, and
// `custom` defers to the callback (step, position, assigned u) -> v index.
struct Adversary {
  enum class Kind { constant, random, extremal, custom };

  Kind kind = Kind::constant;
  std::string name = "constant:0";
  std::size_t control = 0;
  std::uint64_t seed = 1;
  std::function<std::size_t(std::size_t, const TorusPoint&, std::size_t)> respond;
};

inline Adversary constant_adversary(std::size_t iv) {
  Adversary a;
  a.kind = Adversary::Kind::constant;
  a.name = "constant:" + std::to_string(iv);
  a.control = iv;
  return a;
}

inline Adversary random_adversary(std::uint64_t seed) {
  Adversary a;
  a.kind = Adversary::Kind::random;
  a.name = "random:" + std::to_string(seed);
  a.seed = seed;
  return a;
}

inline Adversary extremal_adversary() {
  Adversary a;
  a.kind = Adversary::Kind::extremal;
  a.name = "extremal";
  return a;
}

inline Adversary custom_adversary(
    std::string name,
    std::function<std::size_t(std::size_t, const TorusPoint&, std::size_t)> respond) {
  Adversary a;
  a.kind = Adversary::Kind::custom;
  a.name = std::move(name);
  a.respond = std::move(respond);
  return a;
}

namespace detail {

// Largest-remainder rounding of nonnegative quotas to integer counts summing
// to total. Ties break toward earlier entries, so splits are deterministic.
inline std::vector<std::size_t> apportion(const Vec& quotas, std::size_t total) {
  const std::size_t n = quotas.size();
  if (n == 0) throw InvalidInput("apportion: no quotas");
  std::vector<std::size_t> counts(n, 0);
  std::vector<std::pair<double, std::size_t>> rest;
  rest.reserve(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::max(0.0, quotas[i]);
    const double base = std::floor(q + 1e-9);
    counts[i] = static_cast<std::size_t>(base);
    assigned += counts[i];
    rest.push_back({q - base, i});
  }
  std::sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % n) {
    counts[rest[r].second] += 1;
    ++assigned;
  }
  while (assigned > total) {
    for (std::size_t r = n; r-- > 0 && assigned > total;) {
      const std::size_t tgt = rest[r].second;
      if (counts[tgt] > 0) {
        counts[tgt] -= 1;
        --assigned;
      }
    }
  }
  return counts;
}

inline std::size_t hash_pick(std::uint64_t seed, std::size_t step, std::size_t channel,
                             std::size_t n) {
  const std::uint64_t h = split_seed(split_seed(seed, step + 1), channel + 1);
  return static_cast<std::size_t>(h % static_cast<std::uint64_t>(n));
}

}  // namespace detail

// Snapshot trajectory of one simulated run, the realized control splits, and
// the guide diagnostics collected by the strategy along the way.
struct FlowResult {
  std::vector<double> times;
  std::vector<DiscreteMeasure> flow;
  double outcome = 0.0;
  bool resampled = false;
  std::vector<ControlDistribution> realized;
  std::vector<StrategyTraceRow> trace;
  double final_w2_to_mu = 0.0;
  double final_w2_to_eta = 0.0;
  ParticleEnsemble ensemble;
};

// Runs one particle discretization of the mean-field flow under the extremal
// shift strategy and the given adversary. Per step: the strategy's relaxed
// control is realized exactly on the particles by largest-remainder splitting
// inside each position group (exact whenever the plan masses are multiples of
// 1/N), the adversary replies per particle, and the coupled ODEs
// dx/dt = f(t, x, m(t), u, v) are integrated with the empirical measure
// refreshed at every Runge-Kutta stage. m0 weights that are not multiples of
// 1/N are resampled the same way; the strategy then starts from the measure
// the particles actually realize.
inline FlowResult simulate_flow(const GameDynamics& dyn, const TerminalCost& cost,
                                ExtremalShiftStrategy& strategy, const Adversary& adv,
                                const DiscreteMeasure& m0, std::size_t n_particles,
                                double ode_dt = 0.01) {
  const KolmogorovModel& model = strategy.model();
  if (!cost.g) throw InvalidInput("simulate_flow: cost carries no payoff");
  if (n_particles == 0) throw InvalidInput("simulate_flow: need at least one particle");
  if (!(ode_dt > 0.0)) throw InvalidInput("simulate_flow: ODE step must be positive");
  if (m0.dim() != dyn.dim)
    throw DimensionMismatch("simulate_flow: measure dimension mismatch");
  if (dyn.dim != model.lattice->dim())
    throw InvalidInput("simulate_flow: dynamics dimension differs from the strategy lattice");
  if (dyn.controls_u.size() != model.dynamics->controls_u.size() ||
      dyn.controls_v.size() != model.dynamics->controls_v.size())
    throw InvalidInput("simulate_flow: control sets differ from the strategy model");
  const std::size_t nv = dyn.controls_v.size();
  if (adv.kind == Adversary::Kind::constant && adv.control >= nv)
    throw InvalidInput("simulate_flow: constant adversary control out of range");
  if (adv.kind == Adversary::Kind::custom && !adv.respond)
    throw InvalidInput("simulate_flow: custom adversary without a response callback");

  FlowResult out;

  const double npf = static_cast<double>(n_particles);
  Vec quotas(m0.size());
  for (std::size_t i = 0; i < m0.size(); ++i) quotas[i] = m0.weight(i) * npf;
  auto counts = detail::apportion(quotas, n_particles);
  for (std::size_t i = 0; i < m0.size(); ++i)
    if (std::fabs(quotas[i] - static_cast<double>(counts[i])) > 1e-9) out.resampled = true;

  std::vector<Particle> particles;
  particles.reserve(n_particles);
  for (std::size_t i = 0; i < m0.size(); ++i)
    for (std::size_t c = 0; c < counts[i]; ++c)
      particles.push_back({m0.point(i), 0, 0, 0, 0});

  std::vector<TorusPoint> pts;
  pts.reserve(n_particles);
  for (const auto& p : particles) pts.push_back(p.position);
  DiscreteMeasure m_cur = DiscreteMeasure::empirical(pts);

  strategy.initialize(m_cur);
  const auto& grid = strategy.partition();
  out.times.push_back(grid.front());
  out.flow.push_back(m_cur);

  const std::size_t dim = dyn.dim;
  std::vector<Vec> pos(n_particles), stage(n_particles);
  std::vector<Vec> f1(n_particles), f2(n_particles), f3(n_particles), f4(n_particles);

  auto forces = [&](double ts, const std::vector<Vec>& raw, std::vector<Vec>& vel) {
    std::vector<TorusPoint> wrapped;
    wrapped.reserve(raw.size());
    for (const auto& c : raw) wrapped.emplace_back(c);
    DiscreteMeasure ms = DiscreteMeasure::empirical(wrapped);
    parallel_for(raw.size(), [&](std::size_t i) {
      vel[i] =
          dyn.velocity(ts, wrapped[i], ms, particles[i].control_u, particles[i].control_v);
    });
  };

  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double tk = grid[k];
    const double span = grid[k + 1] - tk;
    DiscreteMeasure m_step = m_cur;
    ControlDistribution alpha = strategy.step_first_player(k, m_step);
    auto plan = strategy.plan(k);
    const auto& entries = plan->entries();

    std::vector<std::size_t> order(particles.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return particles[a].position < particles[b].position;
    });

    // realize alpha on the particles: walk atoms and their plan rows in step
    ControlDistribution realized;
    realized.pairs.reserve(entries.size());
    std::size_t cursor = 0;
    std::size_t ebase = 0;
    for (std::size_t a = 0; a < m_step.size(); ++a) {
      std::size_t run = cursor;
      while (run < order.size() && particles[order[run]].position == m_step.point(a)) ++run;
      std::size_t eend = ebase;
      while (eend < entries.size() && entries[eend].i == a) ++eend;
      if (eend == ebase)
        throw ContractError("simulate_flow: transport plan skips a charged atom");
      Vec q(eend - ebase);
      for (std::size_t e = ebase; e < eend; ++e) q[e - ebase] = entries[e].mass * npf;
      auto cts = detail::apportion(q, run - cursor);
      for (std::size_t e = ebase; e < eend; ++e) {
        const auto& atom = alpha.pairs[e];
        realized.pairs.push_back(
            {atom.point, atom.control, static_cast<double>(cts[e - ebase]) / npf});
        for (std::size_t c = 0; c < cts[e - ebase]; ++c) {
          Particle& p = particles[order[cursor]];
          p.control_u = atom.control;
          p.plan_entry = e;
          p.channel = cursor;
          ++cursor;
        }
      }
      if (cursor != run) throw ContractError("simulate_flow: particle split left a gap");
      ebase = eend;
    }

    std::vector<std::size_t> entry_v;
    if (adv.kind == Adversary::Kind::extremal) {
      entry_v.resize(entries.size());
      for (std::size_t e = 0; e < entries.size(); ++e)
        entry_v[e] = extremal_v_index(dyn, tk, m_step.point(entries[e].i),
                                      plan->second().point(entries[e].j), m_step);
    }
    for (auto& p : particles) {
      switch (adv.kind) {
        case Adversary::Kind::constant:
          p.control_v = adv.control;
          break;
        case Adversary::Kind::random:
          p.control_v = detail::hash_pick(adv.seed, k, p.channel, nv);
          break;
        case Adversary::Kind::extremal:
          p.control_v = entry_v[p.plan_entry];
          break;
        case Adversary::Kind::custom: {
          const std::size_t iv = adv.respond(k, p.position, p.control_u);
          if (iv >= nv)
            throw ContractError("simulate_flow: adversary reply outside the control set");
          p.control_v = iv;
          break;
        }
      }
    }

    const std::size_t nsub =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / ode_dt - 1e-12)));
    const double dt = span / static_cast<double>(nsub);
    for (std::size_t i = 0; i < n_particles; ++i) pos[i] = particles[i].position.coords();
    for (std::size_t s = 0; s < nsub; ++s) {
      const double t = tk + dt * static_cast<double>(s);
      forces(t, pos, f1);
      for (std::size_t i = 0; i < n_particles; ++i) {
        stage[i] = pos[i];
        for (std::size_t c = 0; c < dim; ++c) stage[i][c] += 0.5 * dt * f1[i][c];
      }
      forces(t + 0.5 * dt, stage, f2);
      for (std::size_t i = 0; i < n_particles; ++i)
        for (std::size_t c = 0; c < dim; ++c) stage[i][c] = pos[i][c] + 0.5 * dt * f2[i][c];
      forces(t + 0.5 * dt, stage, f3);
      for (std::size_t i = 0; i < n_particles; ++i)
        for (std::size_t c = 0; c < dim; ++c) stage[i][c] = pos[i][c] + dt * f3[i][c];
      forces(t + dt, stage, f4);
      for (std::size_t i = 0; i < n_particles; ++i)
        for (std::size_t c = 0; c < dim; ++c)
          pos[i][c] +=
              dt / 6.0 * (f1[i][c] + 2.0 * f2[i][c] + 2.0 * f3[i][c] + f4[i][c]);
    }
    for (std::size_t i = 0; i < n_particles; ++i) particles[i].position = TorusPoint(pos[i]);

    pts.clear();
    for (const auto& p : particles) pts.push_back(p.position);
    m_cur = DiscreteMeasure::empirical(pts);

    strategy.advance_guides(k, m_step);
    out.realized.push_back(std::move(realized));
    out.times.push_back(grid[k + 1]);
    out.flow.push_back(m_cur);
  }

  out.outcome = cost.g(m_cur);
  const std::size_t last = strategy.steps_total();
  out.final_w2_to_mu = wasserstein(2, m_cur, embed(strategy.guide_mu(last))).value;
  out.final_w2_to_eta = wasserstein(2, m_cur, embed(strategy.guide_eta(last))).value;
  out.trace = strategy.trace();
  out.ensemble.particles = std::move(particles);
  return out;
}

// Raw ingredients of the value guarantee: the supersolution read at the
// projected start, the chain certificate epsilon, and the flow-comparison
// constant sqrt(1 + 2T) e^{(2L + 1/2) T}. The bound is the fine-partition
// limit; finite runs add a measured residual on top of it.
struct BoundComponents {
  double bound = 0.0;
  double phi_value = 0.0;
  double epsilon = 0.0;
  double c_star = 0.0;
  double modulus_term = 0.0;
  double projection_gap = 0.0;
};

inline BoundComponents theorem1_bound(const GameDynamics& dyn, const TerminalCost& cost,
                                      const KolmogorovModel& model, const ValueField& phi,
                                      const DiscreteMeasure& m0, double t0) {
  if (!cost.modulus)
    throw InvalidInput("theorem1_bound: cost carries no continuity modulus");
  if (!same_lattice(phi.lattice(), model.lattice))
    throw InvalidInput("theorem1_bound: value field on a different lattice");
  if (m0.dim() != model.lattice->dim())
    throw DimensionMismatch("theorem1_bound: measure dimension mismatch");
  if (t0 < 0.0 || t0 > model.horizon + 1e-12)
    throw InvalidInput("theorem1_bound: start time outside the horizon");
  auto proj = project(m0, model.lattice);
  BoundComponents out;
  out.phi_value = phi.value(t0, proj.coordinates);
  out.epsilon = model.epsilon;
  const double T = model.horizon;
  const double L = dyn.lipschitz_L;
  out.c_star = std::sqrt(1.0 + 2.0 * T) * std::exp((2.0 * L + 0.5) * T);
  out.modulus_term = cost.modulus(out.c_star * out.epsilon);
  out.bound = out.phi_value + out.modulus_term;
  out.projection_gap = wasserstein(2, m0, embed(proj.coordinates)).value;
  return out;
}

struct AdversaryOutcome {
  std::string name;
  std::vector<double> outcomes;
  double worst = 0.0;
};

// Inner approximation of the strategy's guaranteed payoff: the supremum of
// simulated outcomes over the adversary list. Deterministic adversaries run
// once; random ones run `reps` times on forked seed streams. The prototype
// strategy must be freshly constructed; each run copies it.
struct ValueEstimate {
  double upper = 0.0;
  std::size_t strongest = 0;
  std::vector<AdversaryOutcome> outcomes;
};

inline ValueEstimate estimate_value(const GameDynamics& dyn, const TerminalCost& cost,
                                    const ExtremalShiftStrategy& prototype,
                                    const std::vector<Adversary>& adversaries,
                                    const DiscreteMeasure& m0, std::size_t n_particles,
                                    std::size_t reps = 1, double ode_dt = 0.01) {
  if (adversaries.empty()) throw InvalidInput("estimate_value: no adversaries");
  if (reps == 0) throw InvalidInput("estimate_value: need at least one repetition");
  ValueEstimate est;
  est.upper = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < adversaries.size(); ++a) {
    AdversaryOutcome row;
    row.name = adversaries[a].name;
    row.worst = -std::numeric_limits<double>::infinity();
    const bool seeded = adversaries[a].kind == Adversary::Kind::random;
    const std::size_t runs = seeded ? reps : 1;
    for (std::size_t r = 0; r < runs; ++r) {
      Adversary variant = adversaries[a];
      if (seeded && r > 0) variant.seed = split_seed(variant.seed, r);
      ExtremalShiftStrategy strat = prototype;
      auto res = simulate_flow(dyn, cost, strat, variant, m0, n_particles, ode_dt);
      row.outcomes.push_back(res.outcome);
      row.worst = std::max(row.worst, res.outcome);
    }
    if (row.worst > est.upper) {
      est.upper = row.worst;
      est.strongest = a;
    }
    est.outcomes.push_back(std::move(row));
  }
  return est;
}

}  // namespace mftg
