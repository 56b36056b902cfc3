#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/chainsim.hpp"
#include "mftg/dynamics.hpp"
#include "mftg/matrix_game.hpp"

namespace mftg {

struct HamiltonianResult {
  double value = 0.0;                   // sum_x mu_x * games[x].value
  std::vector<MatrixGameResult> games;  // one saddle per state
};

// Per-state payoff A_{u,v} = sum_y Q_xy (w_y - w_x), written in difference
// form so a constant w gives exactly zero. The value is the mu-weighted sum
// of the per-state saddle values. The rate tensor is laid out iu * nv + iv;
// callers that already hold the matrices can pass them to skip the rebuild.
inline HamiltonianResult hamiltonian(const KolmogorovModel& model, const SimplexVector& mu,
                                     const Vec& w, const std::vector<Matrix>& rates) {
  const std::size_t n = model.n_states();
  if (w.size() != n) throw DimensionMismatch("hamiltonian: weight vector of wrong length");
  if (!same_lattice(mu.lattice(), model.lattice))
    throw InvalidInput("hamiltonian: law lives on a different lattice");
  const std::size_t nu = model.controls_u.size(), nv = model.controls_v.size();
  if (rates.size() != nu * nv) throw DimensionMismatch("hamiltonian: rate tensor of wrong shape");

  HamiltonianResult out;
  out.games.resize(n);
  auto solve_state = [&](std::size_t x) {
    Matrix pay(nu, nv);
    for (std::size_t iu = 0; iu < nu; ++iu)
      for (std::size_t iv = 0; iv < nv; ++iv) {
        const double* row = rates[iu * nv + iv].row(x);
        double acc = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
          if (y == x || row[y] == 0.0) continue;
          acc += row[y] * (w[y] - w[x]);
        }
        pay(iu, iv) = acc;
      }
    out.games[x] = solve_matrix_game(pay);
  };
  if (n >= 64)
    parallel_for(n, solve_state);
  else
    for (std::size_t x = 0; x < n; ++x) solve_state(x);
  for (std::size_t x = 0; x < n; ++x) out.value += mu[x] * out.games[x].value;
  return out;
}

inline HamiltonianResult hamiltonian(const KolmogorovModel& model, double t,
                                     const SimplexVector& mu, const Vec& w) {
  const std::size_t nu = model.controls_u.size(), nv = model.controls_v.size();
  std::vector<Matrix> rates(nu * nv);
  for (std::size_t iu = 0; iu < nu; ++iu)
    for (std::size_t iv = 0; iv < nv; ++iv) rates[iu * nv + iv] = model.rate(t, mu, iu, iv);
  return hamiltonian(model, mu, w, rates);
}

// Value function of the finite mean-field game, exposed through evaluation
// and a per-state directional gradient (defined up to an additive constant).
class ValueField {
 public:
  virtual ~ValueField() = default;
  virtual double value(double t, const SimplexVector& mu) const = 0;
  virtual Vec gradient(double t, const SimplexVector& mu) const = 0;
  virtual LatticePtr lattice() const = 0;
  virtual double horizon() const = 0;
};

// phi(t, mu) = sum_x w_x(t) mu_x, valid when rates ignore the law and the
// terminal cost is linear. w solves the decoupled backward system.
class LinearValueField final : public ValueField {
 public:
  LinearValueField(LatticePtr lat, std::vector<double> times, std::vector<Vec> weights,
                   double residual)
      : lattice_(std::move(lat)),
        times_(std::move(times)),
        weights_(std::move(weights)),
        residual_(residual) {
    if (times_.size() != weights_.size() || times_.size() < 2)
      throw InvalidInput("LinearValueField: malformed time grid");
  }

  double value(double t, const SimplexVector& mu) const override {
    if (!same_lattice(mu.lattice(), lattice_))
      throw InvalidInput("LinearValueField: law lives on a different lattice");
    Vec w = weights_at(t);
    double acc = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) acc += w[x] * mu[x];
    return acc;
  }

  Vec gradient(double t, const SimplexVector&) const override { return weights_at(t); }
  LatticePtr lattice() const override { return lattice_; }
  double horizon() const override { return times_.back(); }

  Vec weights_at(double t) const {
    if (t <= times_.front()) return weights_.front();
    if (t >= times_.back()) return weights_.back();
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times_.begin());
    double a = times_[j - 1], b = times_[j];
    double lam = (t - a) / (b - a);
    Vec out(weights_[j].size());
    for (std::size_t x = 0; x < out.size(); ++x)
      out[x] = (1.0 - lam) * weights_[j - 1][x] + lam * weights_[j][x];
    return out;
  }

  double residual() const { return residual_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec>& weights_grid() const { return weights_; }

 private:
  LatticePtr lattice_;
  std::vector<double> times_;
  std::vector<Vec> weights_;
  double residual_;
};

namespace detail {

inline Vec state_values(const KolmogorovModel& model, double t, const SimplexVector& mu,
                        const Vec& w) {
  auto h = hamiltonian(model, t, mu, w);
  Vec vals(h.games.size());
  for (std::size_t x = 0; x < vals.size(); ++x) vals[x] = h.games[x].value;
  return vals;
}

// One backward solve of dw/dt = -val(t, w), w(T) = c, with `steps` RK4 steps.
inline std::vector<Vec> backward_weights(const KolmogorovModel& model, const Vec& terminal,
                                         const SimplexVector& mu_probe, std::size_t steps) {
  const double dt = model.horizon / static_cast<double>(steps);
  std::vector<Vec> w(steps + 1);
  w[steps] = terminal;
  Vec cur = terminal;
  const std::size_t n = cur.size();
  auto axpy = [n](const Vec& base, double c, const Vec& dir) {
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + c * dir[i];
    return out;
  };
  for (std::size_t k = steps; k-- > 0;) {
    double t1 = model.horizon * static_cast<double>(k + 1) / static_cast<double>(steps);
    // integrate from t1 down to t1 - dt; d w / d(-t) = val
    Vec k1 = state_values(model, t1, mu_probe, cur);
    Vec k2 = state_values(model, t1 - 0.5 * dt, mu_probe, axpy(cur, 0.5 * dt, k1));
    Vec k3 = state_values(model, t1 - 0.5 * dt, mu_probe, axpy(cur, 0.5 * dt, k2));
    Vec k4 = state_values(model, t1 - dt, mu_probe, axpy(cur, dt, k3));
    for (std::size_t i = 0; i < n; ++i)
      cur[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    w[k] = cur;
  }
  return w;
}

}  // namespace detail

// Backward solver for the decoupled weight system. Requires rates that do
// not depend on the law (declared and spot-checked) and a linear terminal
// cost; refuses otherwise. Step size refined until the step-halving
// discrepancy is at most 1e-6.
inline LinearValueField solve_linear_value(const KolmogorovModel& model, const TerminalCost& cost,
                                           double dt = 0.0) {
  if (!cost.linear)
    throw InvalidInput("solve_linear_value: terminal cost is not linear; use solve_grid");
  if (model.lipschitz_mu != 0.0)
    throw InvalidInput(
        "solve_linear_value: rates declare law dependence; use solve_grid or a split model");
  const std::size_t n = model.n_states();
  auto uniform = SimplexVector::uniform(model.lattice);
  {
    // spot check: the generator must not move when the law moves
    Rng probe(0x9d5u);
    auto other = SimplexVector(model.lattice, probe.simplex_point(n));
    for (double t : {0.0, 0.5 * model.horizon})
      for (std::size_t iu = 0; iu < model.controls_u.size(); ++iu)
        for (std::size_t iv = 0; iv < model.controls_v.size(); ++iv) {
          Matrix qa = model.rate(t, uniform, iu, iv);
          Matrix qb = model.rate(t, other, iu, iv);
          for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y)
              if (std::fabs(qa(x, y) - qb(x, y)) > 1e-12)
                throw InvalidInput("solve_linear_value: rates depend on the law");
        }
  }

  Vec terminal(n);
  for (std::size_t x = 0; x < n; ++x) terminal[x] = cost.linear->c(model.lattice->points()[x]);

  double target = dt > 0.0 ? dt : 0.25 / std::max(4.0, model.rate_bound);
  auto steps = static_cast<std::size_t>(std::ceil(model.horizon / target - 1e-12));
  steps = std::max<std::size_t>(steps, 2);

  std::vector<Vec> coarse = detail::backward_weights(model, terminal, uniform, steps);
  double residual = std::numeric_limits<double>::infinity();
  std::vector<Vec> fine;
  for (int refine = 0; refine < 6; ++refine) {
    fine = detail::backward_weights(model, terminal, uniform, 2 * steps);
    residual = 0.0;
    for (std::size_t k = 0; k <= steps; ++k)
      for (std::size_t x = 0; x < n; ++x)
        residual = std::max(residual, std::fabs(coarse[k][x] - fine[2 * k][x]));
    if (residual <= 1e-6) break;
    steps *= 2;
    coarse = std::move(fine);
    fine.clear();
  }
  if (residual > 1e-6)
    throw ContractError("solve_linear_value: could not reach the 1e-6 residual target");

  const std::size_t fsteps = fine.size() - 1;
  std::vector<double> times(fsteps + 1);
  for (std::size_t k = 0; k <= fsteps; ++k)
    times[k] = model.horizon * static_cast<double>(k) / static_cast<double>(fsteps);
  return LinearValueField(model.lattice, std::move(times), std::move(fine), residual);
}

// Value on the discretized probability simplex for 2- or 3-state models.
class GridValueField final : public ValueField {
 public:
  GridValueField(LatticePtr lat, std::size_t resolution, std::vector<double> times,
                 std::vector<Vec> slices)
      : lattice_(std::move(lat)),
        m_(resolution),
        times_(std::move(times)),
        slices_(std::move(slices)) {
    n_ = lattice_->size();
    if (n_ != 2 && n_ != 3) throw InvalidInput("GridValueField: needs 2 or 3 states");
  }

  double value(double t, const SimplexVector& mu) const override {
    if (!same_lattice(mu.lattice(), lattice_))
      throw InvalidInput("GridValueField: law lives on a different lattice");
    Vec coords(n_);
    for (std::size_t i = 0; i < n_; ++i) coords[i] = mu[i];
    if (t <= times_.front()) return interp(slices_.front(), coords);
    if (t >= times_.back()) return interp(slices_.back(), coords);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times_.begin());
    double lam = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
    return (1.0 - lam) * interp(slices_[j - 1], coords) + lam * interp(slices_[j], coords);
  }

  Vec gradient(double t, const SimplexVector& mu) const override {
    // finite difference toward each vertex, one grid cell of travel
    Vec g(n_);
    double base = value(t, mu);
    double step = 1.0 / static_cast<double>(m_);
    for (std::size_t y = 0; y < n_; ++y) {
      Vec mix(n_);
      for (std::size_t i = 0; i < n_; ++i)
        mix[i] = (1.0 - step) * mu[i] + (i == y ? step : 0.0);
      g[y] = (interp_at(t, mix) - base) / step;
    }
    return g;
  }

  LatticePtr lattice() const override { return lattice_; }
  double horizon() const override { return times_.back(); }

  std::size_t resolution() const { return m_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vec>& slices() const { return slices_; }

  // barycentric-linear interpolation over the simplex grid
  double interp(const Vec& slice, const Vec& mu) const {
    const double m = static_cast<double>(m_);
    if (n_ == 2) {
      double a = std::clamp(mu[0], 0.0, 1.0) * m;
      auto i = std::min(static_cast<std::size_t>(a), m_ - 1);
      double f = a - static_cast<double>(i);
      return (1.0 - f) * slice[i] + f * slice[i + 1];
    }
    double a = std::clamp(mu[0], 0.0, 1.0) * m;
    double b = std::clamp(mu[1], 0.0, 1.0) * m;
    auto i = std::min(static_cast<std::size_t>(a), m_ - 1);
    auto j = std::min(static_cast<std::size_t>(b), m_ - 1);
    double f = a - static_cast<double>(i), g = b - static_cast<double>(j);
    double acc = 0.0, wsum = 0.0;
    auto add = [&](std::size_t ii, std::size_t jj, double w) {
      if (w <= 1e-12) return;
      if (ii + jj > m_) {
        if (w > 1e-9) throw ContractError("GridValueField: interpolation left the simplex");
        return;
      }
      acc += w * slice[node_index(ii, jj)];
      wsum += w;
    };
    if (f + g <= 1.0) {
      add(i, j, 1.0 - f - g);
      add(i + 1, j, f);
      add(i, j + 1, g);
    } else {
      add(i + 1, j + 1, f + g - 1.0);
      add(i, j + 1, 1.0 - f);
      add(i + 1, j, 1.0 - g);
    }
    if (wsum <= 0.0) throw ContractError("GridValueField: empty interpolation stencil");
    return acc / wsum;
  }

  std::size_t node_index(std::size_t i, std::size_t j) const {
    // row i holds m+1-i nodes
    return i * (m_ + 1) - i * (i - 1) / 2 + j;
  }

  std::size_t node_count() const {
    return n_ == 2 ? m_ + 1 : (m_ + 1) * (m_ + 2) / 2;
  }

  Vec node_coords(std::size_t flat) const {
    const double m = static_cast<double>(m_);
    if (n_ == 2) return {static_cast<double>(flat) / m, 1.0 - static_cast<double>(flat) / m};
    std::size_t i = 0;
    while (node_index(i + 1, 0) <= flat) ++i;
    std::size_t j = flat - node_index(i, 0);
    double a = static_cast<double>(i) / m, b = static_cast<double>(j) / m;
    return {a, b, 1.0 - a - b};
  }

 private:
  double interp_at(double t, const Vec& coords) const {
    if (t <= times_.front()) return interp(slices_.front(), coords);
    if (t >= times_.back()) return interp(slices_.back(), coords);
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times_.begin());
    double lam = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
    return (1.0 - lam) * interp(slices_[j - 1], coords) + lam * interp(slices_[j], coords);
  }

  LatticePtr lattice_;
  std::size_t m_, n_ = 0;
  std::vector<double> times_;
  std::vector<Vec> slices_;
};

struct GridOptions {
  std::size_t resolution = 100;
  double dt = 0.0;
};

namespace detail {

// Euler step mu -> mu + tau * mu Q under per-state mixtures, from cached
// per-control-pair rate matrices.
inline Vec mixture_advance(const std::vector<Matrix>& rates, std::size_t nu, std::size_t nv,
                           const Matrix& wu, const Matrix& wv, const Vec& mu, double tau) {
  const std::size_t n = mu.size();
  Vec out = mu;
  for (std::size_t x = 0; x < n; ++x) {
    if (mu[x] == 0.0) continue;
    for (std::size_t iu = 0; iu < nu; ++iu) {
      double cu = wu(x, iu);
      if (cu == 0.0) continue;
      for (std::size_t iv = 0; iv < nv; ++iv) {
        double c = cu * wv(x, iv);
        if (c == 0.0) continue;
        const double* row = rates[iu * nv + iv].row(x);
        double scale = c * mu[x] * tau;
        for (std::size_t y = 0; y < n; ++y) out[y] += scale * row[y];
      }
    }
  }
  double mass = 0.0;
  for (auto& w : out) {
    if (w < 0.0) {
      if (w < -1e-9) throw ContractError("grid solver: Euler step left the simplex");
      w = 0.0;
    }
    mass += w;
  }
  for (auto& w : out) w /= mass;
  return out;
}

}  // namespace detail

// Semi-Lagrangian backward scheme: at each node, one Euler advance per
// candidate mixture pair and a min-max over the candidates. First player
// candidates are the pure controls plus the per-state LP saddle mixture;
// likewise for the second player.
inline GridValueField solve_grid(const KolmogorovModel& model, const TerminalCost& cost,
                                 const GridOptions& opts = {}) {
  const std::size_t n = model.n_states();
  if (n > 3)
    throw InvalidInput("solve_grid: more than 3 states; use solve_linear_value");
  if (opts.resolution < 2) throw InvalidInput("solve_grid: resolution too small");
  const std::size_t nu = model.controls_u.size(), nv = model.controls_v.size();
  double target = opts.dt > 0.0 ? opts.dt : 0.25 / std::max(4.0, model.rate_bound);
  if (target * model.rate_bound > 0.5)
    throw InvalidInput("solve_grid: time step too large for the rate bound");
  auto steps = static_cast<std::size_t>(std::ceil(model.horizon / target - 1e-12));
  steps = std::max<std::size_t>(steps, 1);
  const double tau = model.horizon / static_cast<double>(steps);

  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    times[k] = model.horizon * static_cast<double>(k) / static_cast<double>(steps);

  GridValueField scratch(model.lattice, opts.resolution, {0.0, model.horizon},
                         {Vec(1, 0.0), Vec(1, 0.0)});
  const std::size_t nodes = scratch.node_count();

  std::vector<Vec> node_mu(nodes);
  for (std::size_t a = 0; a < nodes; ++a) node_mu[a] = scratch.node_coords(a);

  std::vector<Vec> slices(steps + 1);
  slices[steps].resize(nodes);
  for (std::size_t a = 0; a < nodes; ++a)
    slices[steps][a] = cost.g(embed(SimplexVector(model.lattice, node_mu[a])));

  // state-independent pure feedback matrices, built once
  auto pure_rows = [n](std::size_t count, std::size_t idx) {
    Matrix w(n, count);
    for (std::size_t x = 0; x < n; ++x) w(x, idx) = 1.0;
    return w;
  };
  std::vector<Matrix> pures_u, pures_v;
  for (std::size_t iu = 0; iu < nu; ++iu) pures_u.push_back(pure_rows(nu, iu));
  for (std::size_t iv = 0; iv < nv; ++iv) pures_v.push_back(pure_rows(nv, iv));

  for (std::size_t k = steps; k-- > 0;) {
    const double t = times[k];
    const Vec& next = slices[k + 1];
    slices[k].resize(nodes);
    auto work = [&](std::size_t a) {
      SimplexVector mu(model.lattice, node_mu[a]);
      std::vector<Matrix> rates(nu * nv);
      for (std::size_t iu = 0; iu < nu; ++iu)
        for (std::size_t iv = 0; iv < nv; ++iv) rates[iu * nv + iv] = model.rate(t, mu, iu, iv);

      // gradient of the next slice toward each vertex, one cell of travel
      const double cell = 1.0 / static_cast<double>(opts.resolution);
      double base = scratch.interp(next, node_mu[a]);
      Vec w(n);
      for (std::size_t y = 0; y < n; ++y) {
        Vec mix(n);
        for (std::size_t i = 0; i < n; ++i)
          mix[i] = (1.0 - cell) * node_mu[a][i] + (i == y ? cell : 0.0);
        w[y] = (scratch.interp(next, mix) - base) / cell;
      }
      // per-state saddle mixtures for the candidate sets
      Matrix mix_u(n, nu), mix_v(n, nv);
      for (std::size_t x = 0; x < n; ++x) {
        Matrix pay(nu, nv);
        for (std::size_t iu = 0; iu < nu; ++iu)
          for (std::size_t iv = 0; iv < nv; ++iv) {
            const double* row = rates[iu * nv + iv].row(x);
            double acc = 0.0;
            for (std::size_t y = 0; y < n; ++y)
              if (y != x && row[y] != 0.0) acc += row[y] * (w[y] - w[x]);
            pay(iu, iv) = acc;
          }
        auto game = solve_matrix_game(pay);
        for (std::size_t iu = 0; iu < nu; ++iu) mix_u(x, iu) = game.mixed_u[iu];
        for (std::size_t iv = 0; iv < nv; ++iv) mix_v(x, iv) = game.mixed_v[iv];
      }

      double best_u = std::numeric_limits<double>::infinity();
      for (std::size_t cu = 0; cu <= nu; ++cu) {
        const Matrix& wu = cu < nu ? pures_u[cu] : mix_u;
        double worst_v = -std::numeric_limits<double>::infinity();
        for (std::size_t cv = 0; cv <= nv; ++cv) {
          const Matrix& wv = cv < nv ? pures_v[cv] : mix_v;
          Vec adv = detail::mixture_advance(rates, nu, nv, wu, wv, node_mu[a], tau);
          worst_v = std::max(worst_v, scratch.interp(next, adv));
        }
        best_u = std::min(best_u, worst_v);
      }
      slices[k][a] = best_u;
    };
    if (nodes >= 256)
      parallel_for(nodes, work);
    else
      for (std::size_t a = 0; a < nodes; ++a) work(a);
  }
  return GridValueField(model.lattice, opts.resolution, std::move(times), std::move(slices));
}

inline Feedback minimax_feedback(const KolmogorovModel& model,
                                 std::shared_ptr<const ValueField> field) {
  if (!field) throw InvalidInput("minimax_feedback: null value field");
  return [model, field](double t, const SimplexVector& mu) {
    auto h = hamiltonian(model, t, mu, field->gradient(t, mu));
    Matrix w(model.n_states(), model.controls_u.size());
    for (std::size_t x = 0; x < h.games.size(); ++x)
      for (std::size_t iu = 0; iu < model.controls_u.size(); ++iu)
        w(x, iu) = h.games[x].mixed_u[iu];
    return w;
  };
}

inline Feedback maximin_feedback(const KolmogorovModel& model,
                                 std::shared_ptr<const ValueField> field) {
  if (!field) throw InvalidInput("maximin_feedback: null value field");
  return [model, field](double t, const SimplexVector& mu) {
    auto h = hamiltonian(model, t, mu, field->gradient(t, mu));
    Matrix w(model.n_states(), model.controls_v.size());
    for (std::size_t x = 0; x < h.games.size(); ++x)
      for (std::size_t iv = 0; iv < model.controls_v.size(); ++iv)
        w(x, iv) = h.games[x].mixed_v[iv];
    return w;
  };
}

struct ValueCheckOptions {
  std::size_t samples = 8;      // number of (s, mu*) tuples; each runs several adversaries
  double horizon_step = 0.05;   // length of each constructive integration window
  double tau = 2e-4;            // feedback refresh step
  double tolerance = 1e-6;      // base tolerance before the measured integration slack
  double extra_slack = 0.0;     // additional allowance for fields with solver error
  std::uint64_t seed = 0x5eedu;
};

struct ValueCheckReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_terminal = std::numeric_limits<double>::infinity();
  double worst_drift = -std::numeric_limits<double>::infinity();
  double worst_excess = -std::numeric_limits<double>::infinity();
  bool pass = false;
  std::vector<std::string> notes;
};

namespace detail {

// Integrates the law from s to r. One side refreshes its saddle mixture from
// the field's gradient every tau; the other plays `opponent`. Returns the
// field increment and the measured switching slack
// sum_k 4 Lambda tau |w_{k+1} - w_k|_inf.
inline std::pair<double, double> constructive_drift(const ValueField& phi,
                                                    const KolmogorovModel& model, double s,
                                                    double r, const SimplexVector& mu0,
                                                    bool own_side_is_u, const Feedback& opponent,
                                                    double tau) {
  auto steps = static_cast<std::size_t>(std::ceil((r - s) / tau - 1e-12));
  steps = std::max<std::size_t>(steps, 1);
  const double dt = (r - s) / static_cast<double>(steps);
  const std::size_t n = model.n_states();
  Vec cur(n);
  for (std::size_t i = 0; i < n; ++i) cur[i] = mu0[i];
  double start = phi.value(s, mu0);
  double slip = 0.0;
  Vec prev_w;
  for (std::size_t k = 0; k < steps; ++k) {
    double t = s + static_cast<double>(k) * dt;
    SimplexVector mu(model.lattice, cur);
    Vec w = phi.gradient(t, mu);
    if (!prev_w.empty()) {
      double dw = 0.0;
      for (std::size_t i = 0; i < n; ++i) dw = std::max(dw, std::fabs(w[i] - prev_w[i]));
      slip += 4.0 * model.rate_bound * dt * dw;
    }
    prev_w = w;
    auto h = hamiltonian(model, t, mu, w);
    Matrix own(n, own_side_is_u ? model.controls_u.size() : model.controls_v.size());
    for (std::size_t x = 0; x < n; ++x) {
      const Vec& mixed = own_side_is_u ? h.games[x].mixed_u : h.games[x].mixed_v;
      for (std::size_t j = 0; j < mixed.size(); ++j) own(x, j) = mixed[j];
    }
    Matrix opp = opponent(t, mu);
    const Matrix& wu = own_side_is_u ? own : opp;
    const Matrix& wv = own_side_is_u ? opp : own;
    // midpoint rule with the mixtures frozen across the substep
    Matrix q1 = averaged_rates(model, t, mu, wu, wv);
    Vec khalf = row_times(cur, q1);
    Vec mid(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mid[i] = std::max(0.0, cur[i] + 0.5 * dt * khalf[i]);
      mass += mid[i];
    }
    for (auto& x : mid) x /= mass;
    SimplexVector mu_mid(model.lattice, mid);
    Matrix q2 = averaged_rates(model, t + 0.5 * dt, mu_mid, wu, wv);
    Vec kfull = row_times(mid, q2);
    mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cur[i] += dt * kfull[i];
      if (cur[i] < 0.0) {
        if (cur[i] < -1e-9) throw ContractError("constructive check: law left the simplex");
        cur[i] = 0.0;
      }
      mass += cur[i];
    }
    for (auto& x : cur) x /= mass;
  }
  double finish = phi.value(r, SimplexVector(model.lattice, cur));
  return {finish - start, slip};
}

inline ValueCheckReport check_value_side(const ValueField& phi, const KolmogorovModel& model,
                                         const TerminalCost& cost, bool supersolution,
                                         const ValueCheckOptions& opts) {
  if (!same_lattice(phi.lattice(), model.lattice))
    throw InvalidInput("value check: field and model lattices differ");
  ValueCheckReport rep;
  Rng rng(opts.seed);
  const std::size_t n = model.n_states();
  const double T = model.horizon;
  const double term_tol = opts.tolerance + opts.extra_slack;

  // (S1) terminal comparison on vertices, uniform, and random interior laws
  std::vector<SimplexVector> probes;
  probes.push_back(SimplexVector::uniform(model.lattice));
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 4); ++i)
    probes.push_back(SimplexVector::vertex(model.lattice, (i * n) / 4));
  for (std::size_t i = 0; i < opts.samples; ++i)
    probes.push_back(SimplexVector(model.lattice, rng.simplex_point(n)));
  for (const auto& mu : probes) {
    double slack = phi.value(T, mu) - cost.g(embed(mu));
    if (!supersolution) slack = -slack;
    rep.worst_terminal = std::min(rep.worst_terminal, slack);
    if (slack < -term_tol) {
      ++rep.violations;
      std::ostringstream os;
      os << "terminal comparison off by " << -slack;
      rep.notes.push_back(os.str());
    }
  }

  // (S2) constructive windows against a battery of opponents
  const std::size_t n_opp = supersolution ? model.controls_v.size() : model.controls_u.size();
  for (std::size_t sample = 0; sample < opts.samples; ++sample) {
    double span = std::min(opts.horizon_step, T);
    double s = rng.uniform(0.0, T - span);
    double r = s + span;
    auto mu0 = SimplexVector(model.lattice, rng.simplex_point(n));

    std::vector<Feedback> opponents;
    for (std::size_t j = 0; j < n_opp; ++j) opponents.push_back(pure_feedback(n, n_opp, j));
    opponents.push_back(constant_feedback(n, rng.simplex_point(n_opp)));
    {
      Matrix per_state(n, n_opp);
      for (std::size_t x = 0; x < n; ++x) {
        Vec row = rng.simplex_point(n_opp);
        for (std::size_t j = 0; j < n_opp; ++j) per_state(x, j) = row[j];
      }
      opponents.push_back([per_state](double, const SimplexVector&) { return per_state; });
    }

    for (const auto& opp : opponents) {
      auto [drift, slip] =
          detail::constructive_drift(phi, model, s, r, mu0, supersolution, opp, opts.tau);
      if (!supersolution) drift = -drift;
      double allowance = opts.tolerance + opts.extra_slack + slip;
      ++rep.samples;
      rep.worst_drift = std::max(rep.worst_drift, drift);
      rep.worst_excess = std::max(rep.worst_excess, drift - allowance);
      if (drift > allowance) {
        ++rep.violations;
        std::ostringstream os;
        os << "window [" << s << ", " << r << "]: field grew by " << drift
           << " against allowance " << allowance;
        rep.notes.push_back(os.str());
      }
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace detail

// (S1): phi(T, mu) >= terminal cost. (S2): the first player's refreshed
// saddle mixture keeps phi non-increasing along the law flow, whatever the
// second player does.
inline ValueCheckReport verify_supersolution(const ValueField& phi, const KolmogorovModel& model,
                                             const TerminalCost& cost,
                                             const ValueCheckOptions& opts = {}) {
  return detail::check_value_side(phi, model, cost, true, opts);
}

// Mirror image: phi(T, mu) <= terminal cost and the second player can keep
// phi non-decreasing.
inline ValueCheckReport verify_subsolution(const ValueField& phi, const KolmogorovModel& model,
                                           const TerminalCost& cost,
                                           const ValueCheckOptions& opts = {}) {
  return detail::check_value_side(phi, model, cost, false, opts);
}

}  // namespace mftg
