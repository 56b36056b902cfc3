#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mftg/markov.hpp"
#include "mftg/rng.hpp"

namespace mftg {

// Mixed stationary-in-control feedback: rows are states, columns control
// weights. Evaluated along the flow, so it may depend on time and law.
using Feedback = std::function<Matrix(double, const SimplexVector&)>;

inline Feedback constant_feedback(std::size_t n_states, Vec mix) {
  double total = 0.0;
  for (double w : mix) {
    if (w < 0.0) throw InvalidInput("constant_feedback: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw InvalidInput("constant_feedback: weights must sum to one");
  Matrix m(n_states, mix.size());
  for (std::size_t s = 0; s < n_states; ++s)
    for (std::size_t j = 0; j < mix.size(); ++j) m(s, j) = mix[j];
  return [m](double, const SimplexVector&) { return m; };
}

inline Feedback pure_feedback(std::size_t n_states, std::size_t n_controls, std::size_t idx) {
  if (idx >= n_controls) throw InvalidInput("pure_feedback: control index out of range");
  Vec mix(n_controls, 0.0);
  mix[idx] = 1.0;
  return constant_feedback(n_states, std::move(mix));
}

// Q-bar(x, .) = sum_{u, v} wu(x, u) wv(x, v) Q^{u, v}(x, .)
inline Matrix averaged_rates(const KolmogorovModel& model, double t, const SimplexVector& mu,
                             const Matrix& wu, const Matrix& wv) {
  const std::size_t n = model.n_states();
  const std::size_t nu = model.controls_u.size(), nv = model.controls_v.size();
  if (wu.rows() != n || wu.cols() != nu || wv.rows() != n || wv.cols() != nv)
    throw DimensionMismatch("averaged_rates: feedback of wrong shape");
  Matrix out(n, n);
  for (std::size_t iu = 0; iu < nu; ++iu)
    for (std::size_t iv = 0; iv < nv; ++iv) {
      double heaviest = 0.0;
      for (std::size_t x = 0; x < n; ++x)
        heaviest = std::max(heaviest, wu(x, iu) * wv(x, iv));
      if (heaviest <= 0.0) continue;
      Matrix q = model.rate(t, mu, iu, iv);
      for (std::size_t x = 0; x < n; ++x) {
        double c = wu(x, iu) * wv(x, iv);
        if (c <= 0.0) continue;
        const double* row = q.row(x);
        double* orow = out.row(x);
        for (std::size_t y = 0; y < n; ++y) orow[y] += c * row[y];
      }
    }
  return out;
}

struct LawTrajectory {
  LatticePtr lattice;
  std::vector<double> times;
  std::vector<Vec> laws;

  double t0() const { return times.front(); }
  double t1() const { return times.back(); }

  // linear interpolation, clamped to the recorded span
  SimplexVector at(double t) const {
    if (times.empty()) throw SequencingError("LawTrajectory: empty");
    if (t <= times.front()) return SimplexVector(lattice, laws.front());
    if (t >= times.back()) return SimplexVector(lattice, laws.back());
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    double a = times[j - 1], b = times[j];
    double w = (t - a) / (b - a);
    Vec mix(laws[j - 1].size());
    for (std::size_t i = 0; i < mix.size(); ++i)
      mix[i] = (1.0 - w) * laws[j - 1][i] + w * laws[j][i];
    return SimplexVector(lattice, std::move(mix));
  }
};

namespace detail {

// One RK4 sweep of dy/dt = y Q-bar. `measure_of` supplies the law the
// generator and feedbacks see; passing the state itself makes the flow
// nonlinear, passing a frozen trajectory keeps it linear in y.
template <typename MeasureOf>
void rk4_sweep(const KolmogorovModel& model, const Feedback& fu, const Feedback& fv,
               MeasureOf&& measure_of, Vec& y, double ta, double dt, std::size_t steps,
               LawTrajectory* record) {
  const std::size_t n = y.size();
  auto deriv = [&](double t, const Vec& state) {
    SimplexVector mu = measure_of(t, state);
    Matrix q = averaged_rates(model, t, mu, fu(t, mu), fv(t, mu));
    return row_times(state, q);
  };
  auto axpy = [n](const Vec& base, double c, const Vec& dir) {
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + c * dir[i];
    return out;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    double t = ta + static_cast<double>(s) * dt;
    Vec k1 = deriv(t, y);
    Vec k2 = deriv(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    Vec k3 = deriv(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    Vec k4 = deriv(t + dt, axpy(y, dt, k3));
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (y[i] < 0.0) {
        if (y[i] < -1e-9) throw ContractError("kolmogorov flow: law left the simplex");
        y[i] = 0.0;
      }
      mass += y[i];
    }
    if (std::fabs(mass - 1.0) > 1e-8)
      throw ContractError("kolmogorov flow: mass not conserved");
    for (std::size_t i = 0; i < n; ++i) y[i] /= mass;
    if (record) {
      record->times.push_back(t + dt);
      record->laws.push_back(y);
    }
  }
}

inline std::pair<double, std::size_t> resolve_steps(const KolmogorovModel& model, double ta,
                                                    double tb, double dt) {
  if (!(tb > ta)) throw InvalidInput("kolmogorov flow: empty time interval");
  double target = dt > 0.0 ? dt : 0.25 / std::max(4.0, model.rate_bound);
  auto steps = static_cast<std::size_t>(std::ceil((tb - ta) / target - 1e-12));
  steps = std::max<std::size_t>(steps, 1);
  return {(tb - ta) / static_cast<double>(steps), steps};
}

}  // namespace detail

// Solves the nonlinear forward equation d mu / dt = mu Q(t, mu) under the
// given feedback pair. Default step keeps rate_bound * dt <= 1/4.
inline LawTrajectory integrate_kolmogorov(const KolmogorovModel& model, const SimplexVector& mu0,
                                          const Feedback& fu, const Feedback& fv, double ta,
                                          double tb, double dt = 0.0) {
  if (!same_lattice(mu0.lattice(), model.lattice))
    throw InvalidInput("integrate_kolmogorov: initial law lives on a different lattice");
  auto [step, steps] = detail::resolve_steps(model, ta, tb, dt);
  LawTrajectory traj;
  traj.lattice = model.lattice;
  traj.times.push_back(ta);
  Vec y(mu0.size());
  for (std::size_t i = 0; i < mu0.size(); ++i) y[i] = mu0[i];
  traj.laws.push_back(y);
  detail::rk4_sweep(
      model, fu, fv,
      [&](double, const Vec& state) { return SimplexVector(model.lattice, state); }, y, ta, step,
      steps, &traj);
  return traj;
}

// Linear evolution of a law y under the generator frozen along `flow`:
// the measure argument of rates and feedbacks comes from the trajectory,
// not from y. Used for conditional distributions of single agents.
inline Vec evolve_frozen(const KolmogorovModel& model, const LawTrajectory& flow,
                         const Feedback& fu, const Feedback& fv, Vec y0, double ta, double tb,
                         double dt = 0.0) {
  if (ta == tb) return y0;
  auto [step, steps] = detail::resolve_steps(model, ta, tb, dt);
  detail::rk4_sweep(
      model, fu, fv, [&](double t, const Vec&) { return flow.at(t); }, y0, ta, step, steps,
      nullptr);
  return y0;
}

struct ChainPath {
  double start = 0.0;
  std::vector<double> jump_times;
  std::vector<std::size_t> states;  // states[0] at start, one more than jump_times

  std::size_t state_at(double t) const {
    std::size_t i = 0;
    while (i < jump_times.size() && jump_times[i] <= t) ++i;
    return states[i];
  }
};

// Samples one trajectory of the chain whose law is `flow` by uniformization:
// a Poisson clock at the global rate bound with thinned transitions.
inline ChainPath sample_chain(const KolmogorovModel& model, const LawTrajectory& flow,
                              const Feedback& fu, const Feedback& fv, std::size_t x0, double ta,
                              double tb, Rng& rng) {
  if (x0 >= model.n_states()) throw InvalidInput("sample_chain: start state out of range");
  double lambda = model.rate_bound;
  if (lambda < 0.0) throw InvalidInput("sample_chain: negative rate bound");
  ChainPath path;
  path.start = ta;
  path.states.push_back(x0);
  if (lambda == 0.0) return path;
  double t = ta;
  std::size_t s = x0;
  while (true) {
    t += rng.exponential(lambda);
    if (t >= tb) break;
    SimplexVector mu = flow.at(t);
    Matrix q = averaged_rates(model, t, mu, fu(t, mu), fv(t, mu));
    if (-q(s, s) > lambda * (1.0 + 1e-9))
      throw ContractError("sample_chain: outflow exceeds the uniformization rate");
    double u = rng.uniform() * lambda;
    double acc = 0.0;
    std::size_t target = s;
    for (std::size_t y = 0; y < model.n_states(); ++y) {
      if (y == s) continue;
      acc += q(s, y);
      if (u < acc) {
        target = y;
        break;
      }
    }
    if (target != s) {
      path.jump_times.push_back(t);
      path.states.push_back(target);
      s = target;
    }
  }
  return path;
}

// Constants of the conditional moment estimates.
inline double moment_R1(double bound_R, std::size_t dim) {
  return 1.0 + 2.0 * (1.0 + bound_R * static_cast<double>(dim));
}

inline double varsigma1(double theta, double bound_R, double r1) {
  return (4.0 / 3.0) * (1.0 + bound_R) * r1 * std::sqrt(theta);
}

struct MomentCheck {
  double r1 = 0.0;
  double worst_coarse = 0.0;  // E|X(t) - z|^2 over R1^2 (t - s)
  double worst_fine = 0.0;    // E|X(t) - z|^2 over eps^2 (t-s) + varsigma1(t-s)(t-s)
  double worst_flow = 0.0;    // W2^2 of the law increment over R1^2 (t - s)
  bool pass = false;
};

// Audits the conditional second-moment growth of single agents riding the
// frozen flow, and the W2 speed of the flow itself, against the certified
// envelopes. Expectations are computed exactly from the linear evolution.
inline MomentCheck moment_bounds_check(const KolmogorovModel& model, const LawTrajectory& flow,
                                       const Feedback& fu, const Feedback& fv,
                                       const std::vector<std::pair<double, double>>& intervals,
                                       std::size_t max_states = 16, std::uint64_t seed = 1) {
  if (!model.dynamics) throw InvalidInput("moment_bounds_check: needs the underlying dynamics");
  const std::size_t n = model.n_states();
  const auto& pts = model.lattice->points();
  MomentCheck chk;
  chk.r1 = moment_R1(model.dynamics->bound_R, model.dynamics->dim);
  Rng rng(seed);
  std::vector<std::size_t> starts;
  if (n <= max_states)
    for (std::size_t i = 0; i < n; ++i) starts.push_back(i);
  else
    for (std::size_t i = 0; i < max_states; ++i) starts.push_back(rng.index(n));

  for (auto [s, t] : intervals) {
    if (!(t > s)) throw InvalidInput("moment_bounds_check: need s < t");
    double theta = t - s;
    double coarse = chk.r1 * chk.r1 * theta;
    double fine = model.epsilon * model.epsilon * theta +
                  varsigma1(theta, model.dynamics->bound_R, chk.r1) * theta;
    for (std::size_t z : starts) {
      Vec y0(n, 0.0);
      y0[z] = 1.0;
      Vec yt = evolve_frozen(model, flow, fu, fv, std::move(y0), s, t);
      double second = 0.0;
      for (std::size_t y = 0; y < n; ++y)
        second += yt[y] * torus_distance_sq(pts[y], pts[z]);
      chk.worst_coarse = std::max(chk.worst_coarse, second / coarse);
      chk.worst_fine = std::max(chk.worst_fine, second / fine);
    }
    double w2 = wasserstein(2, embed(flow.at(s)), embed(flow.at(t))).value;
    chk.worst_flow = std::max(chk.worst_flow, w2 * w2 / coarse);
  }
  chk.pass = chk.worst_coarse <= 1.0 + 1e-9 && chk.worst_fine <= 1.0 + 1e-9 &&
             chk.worst_flow <= 1.0 + 1e-9;
  return chk;
}

}  // namespace mftg
