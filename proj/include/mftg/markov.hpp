#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/dynamics.hpp"
#include "mftg/linalg.hpp"
#include "mftg/measures.hpp"

namespace mftg {

// Comparison parameter certified by the regular-grid generator construction:
// epsilon(h) = sqrt(h) * max(sqrt(R) * d^(1/4), d^(1/4) / sqrt(2)).
// The second branch keeps the covering radius sqrt(d) h / 2 below epsilon
// for every h < 2 / sqrt(d).
inline double epsilon_for_lattice(double h, std::size_t dim, double bound_R) {
  if (h <= 0.0) throw InvalidInput("epsilon_for_lattice: h must be positive");
  const double droot = std::pow(static_cast<double>(dim), 0.25);
  return std::sqrt(h) * std::max(std::sqrt(bound_R) * droot, droot / std::sqrt(2.0));
}

// Finite-state generator family Q(t, mu, u, v) approximating a controlled
// flow on the torus. Rows sum to zero, off-diagonal entries are rates.
struct KolmogorovModel {
  using RateFn = std::function<Matrix(double, const SimplexVector&, std::size_t, std::size_t)>;
  using PartRateFn = std::function<Matrix(double, const SimplexVector&, std::size_t)>;

  LatticePtr lattice;
  std::shared_ptr<const GameDynamics> dynamics;  // null for hand-built chains
  std::vector<Control> controls_u, controls_v;
  double horizon = 1.0;
  double epsilon = 0.0;       // certified approximation parameter
  double h = 0.0;             // grid pitch when built on a regular lattice
  double rate_bound = 0.0;    // max total outflow of any state
  double lipschitz_mu = 0.0;  // entrywise rate change per unit W2 between measures
  RateFn rate;
  // optional split Q = Q_u(t,mu,u) + Q_v(t,mu,v) for separated velocity fields
  PartRateFn rate_u, rate_v;

  bool separated() const { return static_cast<bool>(rate_u) && static_cast<bool>(rate_v); }
  std::size_t n_states() const { return lattice->size(); }
};

namespace detail {

// Neighbor bookkeeping for a regular grid: flat index layout has the last
// coordinate least significant, matching Lattice::regular ordering.
struct GridStencil {
  LatticePtr lattice;
  std::size_t dim = 0, k = 0, n = 0;
  double h = 0.0;
  std::vector<std::size_t> up, down;  // n * dim, neighbor in +/- h e_c

  static std::shared_ptr<const GridStencil> make(std::size_t dim, std::size_t k) {
    auto st = std::make_shared<GridStencil>();
    st->lattice = Lattice::regular(dim, k);
    st->dim = dim;
    st->k = k;
    st->n = st->lattice->size();
    st->h = 1.0 / static_cast<double>(k);
    st->up.resize(st->n * dim);
    st->down.resize(st->n * dim);
    std::vector<std::size_t> stride(dim, 1);
    for (std::size_t c = dim; c-- > 1;) stride[c - 1] = stride[c] * k;
    for (std::size_t s = 0; s < st->n; ++s) {
      std::size_t rem = s;
      for (std::size_t c = 0; c < dim; ++c) {
        std::size_t digit = rem / stride[c];
        rem %= stride[c];
        std::size_t upd = (digit + 1) % k, dnd = (digit + k - 1) % k;
        st->up[s * dim + c] = s + (upd - digit) * stride[c];
        st->down[s * dim + c] = s + (dnd - digit) * stride[c];
      }
    }
    return st;
  }
};

template <typename VelocityAt>
Matrix rates_from_velocity(const GridStencil& st, double t, const SimplexVector& mu,
                           VelocityAt&& vel) {
  DiscreteMeasure m = embed(mu);
  Matrix q(st.n, st.n);
  for (std::size_t s = 0; s < st.n; ++s) {
    Vec f = vel(t, s, m);
    double out = 0.0;
    for (std::size_t c = 0; c < st.dim; ++c) {
      if (f[c] == 0.0) continue;
      double r = std::fabs(f[c]) / st.h;
      std::size_t tgt = f[c] > 0.0 ? st.up[s * st.dim + c] : st.down[s * st.dim + c];
      q(s, tgt) += r;
      out += r;
    }
    q(s, s) = -out;
  }
  return q;
}

inline std::size_t grid_denominator(double h) {
  if (!(h > 0.0) || h >= 0.5)
    throw InvalidInput("lattice chain: need 0 < h < 1/2");
  double kd = 1.0 / h;
  auto k = static_cast<std::size_t>(std::llround(kd));
  if (k < 3 || std::fabs(kd - static_cast<double>(k)) > 1e-9 * kd)
    throw InvalidInput("lattice chain: 1/h must be an integer");
  return k;
}

}  // namespace detail

// Nearest-neighbor generator on the regular grid with pitch h: each velocity
// component f_c moves mass to the adjacent state in direction sgn(f_c) e_c at
// rate |f_c| / h, which reproduces the drift exactly and bounds the second
// moment by h |f|_1.
inline KolmogorovModel build_lattice_chain(std::shared_ptr<const GameDynamics> dyn, double h) {
  if (!dyn) throw InvalidInput("build_lattice_chain: null dynamics");
  const std::size_t k = detail::grid_denominator(h);
  auto st = detail::GridStencil::make(dyn->dim, k);

  KolmogorovModel model;
  model.lattice = st->lattice;
  model.dynamics = dyn;
  model.controls_u = dyn->controls_u;
  model.controls_v = dyn->controls_v;
  model.horizon = dyn->horizon;
  model.h = st->h;
  model.epsilon = epsilon_for_lattice(st->h, dyn->dim, dyn->bound_R);
  const double sq_d = std::sqrt(static_cast<double>(dyn->dim));
  model.rate_bound = sq_d * dyn->bound_R / st->h;
  model.lipschitz_mu = sq_d * dyn->lipschitz_L / st->h;
  model.rate = [st, dyn](double t, const SimplexVector& mu, std::size_t iu, std::size_t iv) {
    return detail::rates_from_velocity(
        *st, t, mu, [&](double tt, std::size_t s, const DiscreteMeasure& m) {
          return dyn->velocity(tt, st->lattice->points()[s], m, iu, iv);
        });
  };
  return model;
}

// Same construction applied to each part of a separated velocity field, so
// that Q(t,mu,u,v) = Q_u(t,mu,u) + Q_v(t,mu,v) holds exactly.
inline KolmogorovModel build_split_chain(std::shared_ptr<const GameDynamics> dyn, double h) {
  if (!dyn) throw InvalidInput("build_split_chain: null dynamics");
  if (!dyn->separated())
    throw InvalidInput("build_split_chain: dynamics lacks a separated velocity field");
  KolmogorovModel model = build_lattice_chain(dyn, h);
  const std::size_t k = detail::grid_denominator(h);
  auto st = detail::GridStencil::make(dyn->dim, k);
  model.rate_u = [st, dyn](double t, const SimplexVector& mu, std::size_t iu) {
    return detail::rates_from_velocity(
        *st, t, mu, [&](double tt, std::size_t s, const DiscreteMeasure& m) {
          return dyn->f_u(tt, st->lattice->points()[s], m, dyn->controls_u.at(iu));
        });
  };
  model.rate_v = [st, dyn](double t, const SimplexVector& mu, std::size_t iv) {
    return detail::rates_from_velocity(
        *st, t, mu, [&](double tt, std::size_t s, const DiscreteMeasure& m) {
          return dyn->f_v(tt, st->lattice->points()[s], m, dyn->controls_v.at(iv));
        });
  };
  model.rate = [ru = model.rate_u, rv = model.rate_v](double t, const SimplexVector& mu,
                                                      std::size_t iu, std::size_t iv) {
    Matrix a = ru(t, mu, iu);
    Matrix b = rv(t, mu, iv);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) += b(i, j);
    return a;
  };
  return model;
}

struct EpsilonCertificate {
  double epsilon = 0.0;
  double covering = 0.0;       // lattice covering radius
  double worst_offdiag = 0.0;  // most negative off-diagonal rate seen
  double worst_row_sum = 0.0;  // largest |row sum|
  double drift_defect = 0.0;   // sup |f - sum_y ell(y,x) Q_xy|
  double second_moment = 0.0;  // sup_x sum_y |y-x|^2 Q_xy
  double rate_outflow = 0.0;   // max |Q_xx| observed
  double mu_ratio = 0.0;       // observed rate change per unit W2
  double split_defect = 0.0;   // |Q - Q_u - Q_v| for separated models
  bool pass = false;
  std::string detail;          // first failed check, empty when pass
};

// Samples times, measures and control pairs and audits every structural and
// quantitative requirement the comparison argument relies on.
inline EpsilonCertificate certify_epsilon(const KolmogorovModel& model, std::size_t mu_samples,
                                          std::uint64_t seed) {
  if (!model.rate) throw InvalidInput("certify_epsilon: model has no rate function");
  if (!model.dynamics)
    throw InvalidInput("certify_epsilon: drift audit needs the underlying dynamics");
  const auto& lat = *model.lattice;
  const std::size_t n = lat.size();
  Rng rng(seed);

  EpsilonCertificate cert;
  cert.epsilon = model.epsilon;
  cert.covering = lat.covering_radius();

  std::vector<SimplexVector> mus;
  mus.push_back(SimplexVector::uniform(model.lattice));
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 4); ++i)
    mus.push_back(SimplexVector::vertex(model.lattice, (i * n) / 4));
  for (std::size_t i = 0; i < mu_samples; ++i)
    mus.push_back(SimplexVector(model.lattice, rng.simplex_point(n)));
  const std::vector<double> times = {0.0, 0.5 * model.horizon, 0.97 * model.horizon};

  // displacement table reused across samples
  std::vector<Vec> disp(n * n);
  std::vector<double> dist2(n * n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) {
      disp[x * n + y] = ell(lat.points()[y], lat.points()[x]);
      double d2 = 0.0;
      for (double c : disp[x * n + y]) d2 += c * c;
      dist2[x * n + y] = d2;
    }

  std::vector<Matrix> first_mu_rates;  // snapshots at mus[0] for the (M3) audit
  for (double t : times)
    for (std::size_t im = 0; im < mus.size(); ++im) {
      const auto& mu = mus[im];
      DiscreteMeasure m = embed(mu);
      for (std::size_t iu = 0; iu < model.controls_u.size(); ++iu)
        for (std::size_t iv = 0; iv < model.controls_v.size(); ++iv) {
          Matrix q = model.rate(t, mu, iu, iv);
          if (q.rows() != n || q.cols() != n)
            throw ContractError("certify_epsilon: rate matrix of wrong shape");
          if (im == 0) first_mu_rates.push_back(q);
          for (std::size_t x = 0; x < n; ++x) {
            double row = 0.0, sm = 0.0;
            Vec drift(lat.dim(), 0.0);
            for (std::size_t y = 0; y < n; ++y) {
              double r = q(x, y);
              row += r;
              if (y == x) continue;
              if (r < cert.worst_offdiag) cert.worst_offdiag = r;
              if (r == 0.0) continue;
              sm += dist2[x * n + y] * r;
              const Vec& dv = disp[x * n + y];
              for (std::size_t c = 0; c < drift.size(); ++c) drift[c] += dv[c] * r;
            }
            cert.worst_row_sum = std::max(cert.worst_row_sum, std::fabs(row));
            cert.second_moment = std::max(cert.second_moment, sm);
            cert.rate_outflow = std::max(cert.rate_outflow, std::fabs(q(x, x)));
            Vec f = model.dynamics->velocity(t, lat.points()[x], m, iu, iv);
            for (std::size_t c = 0; c < drift.size(); ++c) drift[c] -= f[c];
            cert.drift_defect = std::max(cert.drift_defect, norm2(drift));
          }
          if (model.separated()) {
            Matrix qu = model.rate_u(t, mu, iu);
            Matrix qv = model.rate_v(t, mu, iv);
            for (std::size_t x = 0; x < n; ++x)
              for (std::size_t y = 0; y < n; ++y)
                cert.split_defect = std::max(cert.split_defect,
                                             std::fabs(q(x, y) - qu(x, y) - qv(x, y)));
          }
        }
    }

  // measure sensitivity against the first sampled measure
  const std::size_t pairs = model.controls_u.size() * model.controls_v.size();
  for (std::size_t im = 1; im < mus.size(); ++im) {
    double w2 = wasserstein(2, embed(mus[0]), embed(mus[im])).value;
    if (w2 <= 1e-9) continue;
    for (std::size_t it = 0; it < times.size(); ++it)
      for (std::size_t iu = 0; iu < model.controls_u.size(); ++iu)
        for (std::size_t iv = 0; iv < model.controls_v.size(); ++iv) {
          Matrix q = model.rate(times[it], mus[im], iu, iv);
          const Matrix& q0 =
              first_mu_rates[it * pairs + iu * model.controls_v.size() + iv];
          double diff = 0.0;
          for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y)
              diff = std::max(diff, std::fabs(q(x, y) - q0(x, y)));
          cert.mu_ratio = std::max(cert.mu_ratio, diff / w2);
        }
  }

  auto fail = [&cert](const std::string& why) {
    if (cert.detail.empty()) cert.detail = why;
  };
  const double row_tol = 1e-10 * std::max(1.0, model.rate_bound);
  std::ostringstream os;
  if (cert.covering > cert.epsilon + 1e-12) {
    os << "covering radius " << cert.covering << " exceeds epsilon " << cert.epsilon;
    fail(os.str());
  }
  if (cert.worst_offdiag < -1e-12) fail("negative off-diagonal rate");
  if (cert.worst_row_sum > row_tol) fail("generator rows do not sum to zero");
  if (cert.drift_defect > cert.epsilon + 1e-12) fail("drift defect above epsilon");
  if (cert.second_moment > cert.epsilon * cert.epsilon + 1e-12)
    fail("second moment above epsilon^2");
  if (model.rate_bound > 0.0 && cert.rate_outflow > model.rate_bound + 1e-9)
    fail("outflow above declared rate bound");
  if (cert.mu_ratio > model.lipschitz_mu * (1.0 + 1e-9) + 1e-9)
    fail("measure sensitivity above declared constant");
  if (model.separated() && cert.split_defect > row_tol)
    fail("split parts do not reassemble the generator");
  cert.pass = cert.detail.empty();
  return cert;
}

}  // namespace mftg
