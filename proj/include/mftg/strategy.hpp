#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mftg/hj.hpp"

namespace mftg {

// Extremal controls: u steers the gap <ell(x,y), f> down against the worst v,
// v steers it up against the best u. Ties resolve to the earliest control in
// the list, so x = y always yields index 0.
inline std::size_t extremal_u_index(const GameDynamics& dyn, double t, const TorusPoint& x,
                                    const TorusPoint& y, const DiscreteMeasure& m) {
  Vec gap = ell(x, y);
  std::size_t best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t iu = 0; iu < dyn.controls_u.size(); ++iu) {
    double inner = -std::numeric_limits<double>::infinity();
    for (std::size_t iv = 0; iv < dyn.controls_v.size(); ++iv)
      inner = std::max(inner, dot(gap, dyn.velocity(t, x, m, iu, iv)));
    if (inner < best_val) {
      best_val = inner;
      best = iu;
    }
  }
  return best;
}

inline std::size_t extremal_v_index(const GameDynamics& dyn, double t, const TorusPoint& x,
                                    const TorusPoint& y, const DiscreteMeasure& m) {
  Vec gap = ell(x, y);
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t iv = 0; iv < dyn.controls_v.size(); ++iv) {
    double inner = std::numeric_limits<double>::infinity();
    for (std::size_t iu = 0; iu < dyn.controls_u.size(); ++iu)
      inner = std::min(inner, dot(gap, dyn.velocity(t, x, m, iu, iv)));
    if (inner > best_val) {
      best_val = inner;
      best = iv;
    }
  }
  return best;
}

inline Control extremal_u(const GameDynamics& dyn, double t, const TorusPoint& x,
                          const TorusPoint& y, const DiscreteMeasure& m) {
  return dyn.controls_u[extremal_u_index(dyn, t, x, y, m)];
}

inline Control extremal_v(const GameDynamics& dyn, double t, const TorusPoint& x,
                          const TorusPoint& y, const DiscreteMeasure& m) {
  return dyn.controls_v[extremal_v_index(dyn, t, x, y, m)];
}

// Distribution over (position, control) pairs handed to the particle system.
// The first marginal reproduces the conditioning measure exactly.
struct ControlAtom {
  TorusPoint point;
  std::size_t control;  // index into the owning control list
  double weight;
};

struct ControlDistribution {
  std::vector<ControlAtom> pairs;

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : pairs) s += p.weight;
    return s;
  }

  DiscreteMeasure first_marginal() const {
    std::vector<WeightedAtom> atoms;
    atoms.reserve(pairs.size());
    for (const auto& p : pairs) atoms.push_back({p.point, p.weight});
    return DiscreteMeasure(std::move(atoms));
  }
};

struct StrategyOptions {
  double tau = 2e-4;        // guide ODE substep; the feedback refresh interval
  double tolerance = 1e-6;  // fixed part of the per-step non-increase allowance
  double extra_slack = 0.0; // widened for value fields with their own interpolation error
};

// One partition step of guide bookkeeping, kept for diagnostics.
struct GuideStepRecord {
  std::size_t k = 0;
  double t0 = 0.0, t1 = 0.0;
  double phi_start = 0.0, phi_end = 0.0;
  double slip = 0.0;        // measured feedback-switch allowance
  std::size_t groups = 0;   // distinct (state, control) pair equations integrated
};

struct StrategyTraceRow {
  double t = 0.0;
  double guide_gap = 0.0;   // ||mu(t_k) - eta(t_k)||_2
  double w2_to_eta = 0.0;   // W2(m_k, embedded eta(t_k))
  double phi = 0.0;         // phi+(t_k, mu(t_k))
};

// Stepwise strategy with memory for the first player. Two auxiliary chain
// laws are maintained: mu follows the value-preserving feedback against the
// disintegrated second-player controls read off the optimal plan, and eta
// re-aggregates the per-pair laws started from the plan's lattice states.
// One instance drives one run; copy a fresh prototype to rerun.
class ExtremalShiftStrategy {
 public:
  ExtremalShiftStrategy(KolmogorovModel model, std::shared_ptr<const ValueField> phi,
                        std::vector<double> partition, StrategyOptions opts = {})
      : model_(std::move(model)), phi_(std::move(phi)), partition_(std::move(partition)),
        opts_(opts) {
    if (!model_.dynamics)
      throw InvalidInput("ExtremalShiftStrategy: model carries no dynamics");
    if (!phi_) throw InvalidInput("ExtremalShiftStrategy: null value field");
    if (!same_lattice(phi_->lattice(), model_.lattice))
      throw InvalidInput("ExtremalShiftStrategy: value field on a different lattice");
    if (partition_.size() < 2)
      throw InvalidInput("ExtremalShiftStrategy: partition needs at least two times");
    for (std::size_t k = 0; k + 1 < partition_.size(); ++k)
      if (!(partition_[k] < partition_[k + 1]))
        throw InvalidInput("ExtremalShiftStrategy: partition not increasing");
    if (partition_.front() < 0.0 ||
        std::fabs(partition_.back() - model_.horizon) > 1e-9)
      throw InvalidInput("ExtremalShiftStrategy: partition must end at the horizon");
    if (!(opts_.tau > 0.0)) throw InvalidInput("ExtremalShiftStrategy: tau must be positive");
  }

  std::size_t steps_total() const { return partition_.size() - 1; }
  std::size_t steps_done() const { return cursor_; }
  const std::vector<double>& partition() const { return partition_; }
  const KolmogorovModel& model() const { return model_; }
  const ValueField& field() const { return *phi_; }

  void initialize(const DiscreteMeasure& m0) {
    if (initialized_) throw SequencingError("initialize: strategy already ran; copy a fresh one");
    if (m0.dim() != model_.lattice->dim())
      throw DimensionMismatch("initialize: measure dimension mismatch");
    auto proj = project(m0, model_.lattice);
    mu_.push_back(proj.coordinates);
    eta_.push_back(proj.coordinates);
    initialized_ = true;
    cursor_ = 0;
    stage_is_advance_ = false;
  }

  // alpha_k: each optimal-plan pair (x*, ybar*) contributes mass at
  // (x*, u_hat(t_k, x*, ybar*, m_k)). Must be followed by advance_guides(k).
  ControlDistribution step_first_player(std::size_t k, const DiscreteMeasure& m_k) {
    require_stage(k, false, "step_first_player");
    const double tk = partition_[k];
    const auto& dyn = *model_.dynamics;

    auto eta_embedded = embed(eta_[k]);
    auto w = wasserstein(2, m_k, eta_embedded);
    if (!w.certified)
      throw ContractError("step_first_player: transport plan failed certification");
    // embed drops zero states; recover lattice indices for the plan's columns
    std::vector<std::size_t> support;
    support.reserve(eta_embedded.size());
    for (std::size_t x = 0; x < eta_[k].size(); ++x)
      if (eta_[k][x] > 0.0) support.push_back(x);

    ControlDistribution alpha;
    alpha.pairs.reserve(w.plan->entries().size());
    for (const auto& e : w.plan->entries()) {
      const TorusPoint& xs = m_k.point(e.i);
      const TorusPoint& yb = model_.lattice->points()[support[e.j]];
      alpha.pairs.push_back({xs, extremal_u_index(dyn, tk, xs, yb, m_k), e.mass});
    }

    trace_.push_back({tk, guide_gap(k), w.value, phi_->value(tk, mu_[k])});
    plans_.push_back(w.plan);
    plan_support_ = std::move(support);
    m_hist_.push_back(m_k);
    alphas_.push_back(alpha);
    stage_is_advance_ = true;
    return alpha;
  }

  // Advances both guides to t_{k+1}: mu under the value-preserving feedback
  // and the frozen disintegrated second-player rows, eta as the plan-weighted
  // average of per-pair laws whose own state row plays the extremal control.
  void advance_guides(std::size_t k, const DiscreteMeasure& m_k) {
    require_stage(k, true, "advance_guides");
    if (!same_measure(m_k, m_hist_[k]))
      throw InvalidInput("advance_guides: measure differs from the step_first_player call");
    const double t0 = partition_[k], t1 = partition_[k + 1];
    const auto& dyn = *model_.dynamics;
    const std::size_t n = model_.n_states();
    const std::size_t nu = model_.controls_u.size(), nv = model_.controls_v.size();

    // theta rows: disintegration of (p2, v_hat)#plan over the eta support;
    // states never charged by the plan get the uniform row
    Matrix theta(n, nv, 0.0);
    Vec charged(n, 0.0);
    // merged pair equations: (lattice state, v index) -> plan mass
    std::map<std::pair<std::size_t, std::size_t>, double> group_mass;
    for (const auto& e : plans_[k]->entries()) {
      const TorusPoint& xs = m_hist_[k].point(e.i);
      const std::size_t yb = plan_support_[e.j];
      std::size_t iv = extremal_v_index(dyn, t0, xs, model_.lattice->points()[yb], m_hist_[k]);
      theta(yb, iv) += e.mass;
      charged[yb] += e.mass;
      group_mass[{yb, iv}] += e.mass;
    }
    for (std::size_t x = 0; x < n; ++x) {
      if (charged[x] > 0.0) {
        for (std::size_t v = 0; v < nv; ++v) theta(x, v) /= charged[x];
      } else {
        for (std::size_t v = 0; v < nv; ++v) theta(x, v) = 1.0 / static_cast<double>(nv);
      }
    }

    struct Group {
      std::size_t state, control;
      double mass;
      Vec law;
    };
    std::vector<Group> groups;
    groups.reserve(group_mass.size());
    for (const auto& [key, mass] : group_mass) {
      Vec start(n, 0.0);
      start[key.first] = 1.0;
      groups.push_back({key.first, key.second, mass, std::move(start)});
    }

    const double span = t1 - t0;
    auto nsub = static_cast<std::size_t>(std::ceil(span / opts_.tau - 1e-12));
    nsub = std::max<std::size_t>(nsub, 1);
    const double dt = span / static_cast<double>(nsub);

    Vec mu_cur = coords_of(mu_[k]);
    std::vector<Matrix> qs(nu * nv);
    double slip = 0.0;
    Vec prev_w;
    const double phi_start = phi_->value(t0, mu_[k]);

    for (std::size_t s = 0; s < nsub; ++s) {
      const double t = t0 + static_cast<double>(s) * dt;
      SimplexVector mu_sv(model_.lattice, mu_cur);
      Vec w = phi_->gradient(t, mu_sv);
      if (!prev_w.empty()) {
        double dw = 0.0;
        for (std::size_t x = 0; x < n; ++x) dw = std::max(dw, std::fabs(w[x] - prev_w[x]));
        slip += 4.0 * model_.rate_bound * dt * dw;
      }
      prev_w = w;

      fill_rates(qs, t, mu_sv);
      auto h = hamiltonian(model_, mu_sv, w, qs);
      Matrix gu(n, nu);
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t u = 0; u < nu; ++u) gu(x, u) = h.games[x].mixed_u[u];

      // stage one at (t, mu)
      Matrix base = mix_rates(qs, gu, theta);
      std::vector<Vec> mod_rows(groups.size());
      for (std::size_t g = 0; g < groups.size(); ++g)
        mod_rows[g] = mixed_row(qs, gu, groups[g].state, groups[g].control);

      Vec mu_half = half_step(mu_cur, base, 0.5 * dt);
      std::vector<Vec> eta_half(groups.size());
      for (std::size_t g = 0; g < groups.size(); ++g)
        eta_half[g] = half_step_modified(groups[g].law, base, mod_rows[g], groups[g].state,
                                         0.5 * dt);

      // stage two at (t + dt/2, mu_half), same frozen feedback
      SimplexVector mu_half_sv(model_.lattice, mu_half);
      fill_rates(qs, t + 0.5 * dt, mu_half_sv);
      Matrix base2 = mix_rates(qs, gu, theta);
      Vec next = advance(mu_cur, mu_half, base2, dt, "guide mu");
      for (std::size_t g = 0; g < groups.size(); ++g) {
        Vec row2 = mixed_row(qs, gu, groups[g].state, groups[g].control);
        Vec flow = row_times(eta_half[g], base2);
        adjust_row(flow, eta_half[g], base2, row2, groups[g].state);
        groups[g].law = advance_with_flow(groups[g].law, flow, dt, "guide eta");
      }
      mu_cur = std::move(next);
    }

    Vec eta_next(n, 0.0);
    for (const auto& g : groups)
      for (std::size_t x = 0; x < n; ++x) eta_next[x] += g.mass * g.law[x];

    SimplexVector mu_new(model_.lattice, mu_cur);
    const double phi_end = phi_->value(t1, mu_new);
    const double allowance = opts_.tolerance + opts_.extra_slack + slip;
    if (phi_end > phi_start + allowance) {
      std::ostringstream os;
      os << "advance_guides: supersolution defect at step " << k << ": phi+ rose from "
         << phi_start << " to " << phi_end << " (allowance " << allowance << ") at mu(t_k) = [";
      for (std::size_t x = 0; x < n; ++x) os << (x ? " " : "") << mu_[k][x];
      os << "]";
      throw ContractError(os.str());
    }

    records_.push_back({k, t0, t1, phi_start, phi_end, slip, groups.size()});
    mu_.push_back(std::move(mu_new));
    eta_.push_back(SimplexVector(model_.lattice, std::move(eta_next)));
    stage_is_advance_ = false;
    ++cursor_;
  }

  const SimplexVector& guide_mu(std::size_t k) const { return mu_.at(k); }
  const SimplexVector& guide_eta(std::size_t k) const { return eta_.at(k); }
  std::shared_ptr<const TransportPlan> plan(std::size_t k) const { return plans_.at(k); }
  const ControlDistribution& alpha(std::size_t k) const { return alphas_.at(k); }
  const DiscreteMeasure& measured(std::size_t k) const { return m_hist_.at(k); }
  const std::vector<GuideStepRecord>& records() const { return records_; }
  const std::vector<StrategyTraceRow>& trace() const { return trace_; }

  double guide_gap(std::size_t k) const {
    double s = 0.0;
    for (std::size_t x = 0; x < model_.n_states(); ++x) {
      double d = mu_.at(k)[x] - eta_.at(k)[x];
      s += d * d;
    }
    return std::sqrt(s);
  }

 private:
  void require_stage(std::size_t k, bool advance, const char* who) const {
    if (!initialized_) throw SequencingError(std::string(who) + ": strategy not initialized");
    if (stage_is_advance_ != advance)
      throw SequencingError(std::string(who) + (advance
                                ? ": no pending plan; call step_first_player first"
                                : ": pending plan; call advance_guides first"));
    if (k != cursor_) {
      std::ostringstream os;
      os << who << ": expected step " << cursor_ << ", got " << k;
      throw SequencingError(os.str());
    }
    if (cursor_ >= steps_total())
      throw SequencingError(std::string(who) + ": partition exhausted");
  }

  static bool same_measure(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a.point(i) == b.point(i)) || a.weight(i) != b.weight(i)) return false;
    return true;
  }

  static Vec coords_of(const SimplexVector& mu) {
    Vec out(mu.size());
    for (std::size_t x = 0; x < mu.size(); ++x) out[x] = mu[x];
    return out;
  }

  void fill_rates(std::vector<Matrix>& qs, double t, const SimplexVector& mu) const {
    const std::size_t nu = model_.controls_u.size(), nv = model_.controls_v.size();
    for (std::size_t iu = 0; iu < nu; ++iu)
      for (std::size_t iv = 0; iv < nv; ++iv) qs[iu * nv + iv] = model_.rate(t, mu, iu, iv);
  }

  // generator averaged over gu rows and theta rows
  Matrix mix_rates(const std::vector<Matrix>& qs, const Matrix& gu, const Matrix& theta) const {
    const std::size_t n = model_.n_states();
    const std::size_t nu = model_.controls_u.size(), nv = model_.controls_v.size();
    Matrix out(n, n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      double* orow = out.row(x);
      for (std::size_t iu = 0; iu < nu; ++iu) {
        const double wu = gu(x, iu);
        if (wu == 0.0) continue;
        for (std::size_t iv = 0; iv < nv; ++iv) {
          const double wv = theta(x, iv);
          if (wv == 0.0) continue;
          const double* qrow = qs[iu * nv + iv].row(x);
          const double c = wu * wv;
          for (std::size_t y = 0; y < n; ++y) orow[y] += c * qrow[y];
        }
      }
    }
    return out;
  }

  // one generator row with the second player pinned to a single control
  Vec mixed_row(const std::vector<Matrix>& qs, const Matrix& gu, std::size_t state,
                std::size_t iv) const {
    const std::size_t n = model_.n_states();
    const std::size_t nu = model_.controls_u.size(), nv = model_.controls_v.size();
    Vec row(n, 0.0);
    for (std::size_t iu = 0; iu < nu; ++iu) {
      const double wu = gu(state, iu);
      if (wu == 0.0) continue;
      const double* qrow = qs[iu * nv + iv].row(state);
      for (std::size_t y = 0; y < n; ++y) row[y] += wu * qrow[y];
    }
    return row;
  }

  static Vec half_step(const Vec& y, const Matrix& rates, double h) {
    Vec flow = row_times(y, rates);
    Vec out(y.size());
    for (std::size_t x = 0; x < y.size(); ++x) out[x] = std::max(0.0, y[x] + h * flow[x]);
    return out;
  }

  Vec half_step_modified(const Vec& y, const Matrix& base, const Vec& mod_row,
                         std::size_t state, double h) const {
    Vec flow = row_times(y, base);
    adjust_row(flow, y, base, mod_row, state);
    Vec out(y.size());
    for (std::size_t x = 0; x < y.size(); ++x) out[x] = std::max(0.0, y[x] + h * flow[x]);
    return out;
  }

  // replace the contribution of one generator row inside y * base
  static void adjust_row(Vec& flow, const Vec& y, const Matrix& base, const Vec& mod_row,
                         std::size_t state) {
    const double ys = y[state];
    if (ys == 0.0) return;
    const double* brow = base.row(state);
    for (std::size_t x = 0; x < flow.size(); ++x) flow[x] += ys * (mod_row[x] - brow[x]);
  }

  Vec advance(const Vec& y, const Vec& mid, const Matrix& rates, double dt,
              const char* what) const {
    Vec flow = row_times(mid, rates);
    return advance_with_flow(y, flow, dt, what);
  }

  Vec advance_with_flow(const Vec& y, const Vec& flow, double dt, const char* what) const {
    Vec out(y.size());
    double mass = 0.0;
    for (std::size_t x = 0; x < y.size(); ++x) {
      double v = y[x] + dt * flow[x];
      if (v < 0.0) {
        if (v < -1e-9) {
          std::ostringstream os;
          os << what << " left the simplex: component " << x << " = " << v;
          throw ContractError(os.str());
        }
        v = 0.0;
      }
      out[x] = v;
      mass += v;
    }
    if (std::fabs(mass - 1.0) > 1e-8)
      throw ContractError(std::string(what) + " lost probability mass");
    for (auto& v : out) v /= mass;
    return out;
  }

  KolmogorovModel model_;
  std::shared_ptr<const ValueField> phi_;
  std::vector<double> partition_;
  StrategyOptions opts_;

  bool initialized_ = false;
  bool stage_is_advance_ = false;
  std::size_t cursor_ = 0;
  std::vector<SimplexVector> mu_, eta_;
  std::vector<std::shared_ptr<const TransportPlan>> plans_;
  std::vector<std::size_t> plan_support_;
  std::vector<ControlDistribution> alphas_;
  std::vector<DiscreteMeasure> m_hist_;
  std::vector<GuideStepRecord> records_;
  std::vector<StrategyTraceRow> trace_;
};

}  // namespace mftg
