#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mftg/measures.hpp"
#include "mftg/rng.hpp"

namespace mftg {

using Control = Vec;

// Controlled mean-field dynamics dx/dt = f(t, x, m, u, v) on the torus.
// Control sets are finite ordered lists; ordering is part of the contract
// because tie rules downstream pick the earliest element.
struct GameDynamics {
  using Velocity = std::function<Vec(double, const TorusPoint&, const DiscreteMeasure&,
                                     const Control&, const Control&)>;
  using PartVelocity = std::function<Vec(double, const TorusPoint&, const DiscreteMeasure&,
                                         const Control&)>;

  std::string name;
  std::size_t dim = 1;
  double horizon = 1.0;
  double bound_R = 0.0;     // declared sup norm of f (for split forms, of |f1| + |f2|)
  double lipschitz_L = 0.0; // declared constant in |x1-x2| + W2(m1, m2)
  std::vector<Control> controls_u, controls_v;
  Velocity f;
  // Optional separated structure f = f_u(t,x,m,u) + f_v(t,x,m,v).
  PartVelocity f_u, f_v;

  bool separated() const { return static_cast<bool>(f_u) && static_cast<bool>(f_v); }

  Vec velocity(double t, const TorusPoint& x, const DiscreteMeasure& m, std::size_t iu,
               std::size_t iv) const {
    if (iu >= controls_u.size() || iv >= controls_v.size())
      throw InvalidInput("GameDynamics: control index out of range");
    Vec out = f(t, x, m, controls_u[iu], controls_v[iv]);
    if (out.size() != dim) throw ContractError("GameDynamics: velocity of wrong dimension");
    return out;
  }
};

// Terminal payoff g with its continuity modulus; the optional linear form
// g(m) = integral of c dm unlocks the fast value solver.
struct TerminalCost {
  std::function<double(const DiscreteMeasure&)> g;
  std::function<double(double)> modulus;
  struct Linear {
    std::function<double(const TorusPoint&)> c;
    double lipschitz = 0.0;
  };
  std::optional<Linear> linear;
};

namespace detail {

inline DiscreteMeasure random_test_measure(Rng& rng, std::size_t dim,
                                           std::size_t max_atoms = 5) {
  std::size_t n = 1 + rng.index(max_atoms);
  auto w = rng.simplex_point(n);
  std::vector<WeightedAtom> atoms;
  for (std::size_t i = 0; i < n; ++i) {
    Vec c(dim);
    for (auto& x : c) x = rng.uniform();
    atoms.push_back({TorusPoint(std::move(c)), w[i]});
  }
  return DiscreteMeasure(std::move(atoms));
}

}  // namespace detail

struct IsaacsReport {
  double max_gap = 0.0;       // worst |minmax - maxmin| over samples
  double worst_minmax = 0.0;
  double worst_maxmin = 0.0;
  std::string worst_sample;
  bool holds(double tol = 1e-9) const { return max_gap <= tol; }
};

// Samples directions w and states (t, x, m) and compares the two orders of
// optimizing <w, f> over the finite control sets.
inline IsaacsReport check_isaacs(const GameDynamics& dyn, std::size_t samples,
                                 std::uint64_t seed) {
  Rng rng(seed);
  IsaacsReport rep;
  for (std::size_t s = 0; s < samples; ++s) {
    double t = rng.uniform(0.0, dyn.horizon);
    Vec xc(dyn.dim);
    for (auto& c : xc) c = rng.uniform();
    TorusPoint x(std::move(xc));
    DiscreteMeasure m = detail::random_test_measure(rng, dyn.dim);
    Vec w(dyn.dim);
    for (auto& c : w) c = rng.uniform(-1.0, 1.0);

    const std::size_t nu = dyn.controls_u.size(), nv = dyn.controls_v.size();
    Matrix pay(nu, nv);
    for (std::size_t iu = 0; iu < nu; ++iu)
      for (std::size_t iv = 0; iv < nv; ++iv)
        pay(iu, iv) = dot(w, dyn.velocity(t, x, m, iu, iv));
    double minmax = std::numeric_limits<double>::infinity();
    for (std::size_t iu = 0; iu < nu; ++iu) {
      double inner = -std::numeric_limits<double>::infinity();
      for (std::size_t iv = 0; iv < nv; ++iv) inner = std::max(inner, pay(iu, iv));
      minmax = std::min(minmax, inner);
    }
    double maxmin = -std::numeric_limits<double>::infinity();
    for (std::size_t iv = 0; iv < nv; ++iv) {
      double inner = std::numeric_limits<double>::infinity();
      for (std::size_t iu = 0; iu < nu; ++iu) inner = std::min(inner, pay(iu, iv));
      maxmin = std::max(maxmin, inner);
    }
    double gap = std::fabs(minmax - maxmin);
    if (gap > rep.max_gap) {
      rep.max_gap = gap;
      rep.worst_minmax = minmax;
      rep.worst_maxmin = maxmin;
      std::ostringstream os;
      os << "sample " << s << " at t=" << t;
      rep.worst_sample = os.str();
    }
  }
  return rep;
}

struct ConstantsReport {
  double r_observed = 0.0;
  double l_observed = 0.0;
  double r_declared = 0.0;
  double l_declared = 0.0;
  bool ok = false;
};

// Empirically checks the declared bound and Lipschitz constants on random
// argument tuples. Throws CertificationError naming the witness if a sampled
// value exceeds its declaration.
inline ConstantsReport certify_constants(const GameDynamics& dyn, std::size_t samples,
                                         std::uint64_t seed) {
  Rng rng(seed);
  ConstantsReport rep;
  rep.r_declared = dyn.bound_R;
  rep.l_declared = dyn.lipschitz_L;
  for (std::size_t s = 0; s < samples; ++s) {
    double t = rng.uniform(0.0, dyn.horizon);
    std::size_t iu = rng.index(dyn.controls_u.size());
    std::size_t iv = rng.index(dyn.controls_v.size());
    Vec c1(dyn.dim), c2(dyn.dim);
    for (auto& c : c1) c = rng.uniform();
    for (auto& c : c2) c = rng.uniform();
    TorusPoint x1(std::move(c1)), x2(std::move(c2));
    DiscreteMeasure m1 = detail::random_test_measure(rng, dyn.dim);
    DiscreteMeasure m2 = detail::random_test_measure(rng, dyn.dim);

    Vec fa = dyn.velocity(t, x1, m1, iu, iv);
    Vec fb = dyn.velocity(t, x2, m2, iu, iv);
    rep.r_observed = std::max({rep.r_observed, norm2(fa), norm2(fb)});
    if (rep.r_observed > dyn.bound_R + 1e-9) {
      std::ostringstream os;
      os << dyn.name << ": |f| = " << rep.r_observed << " exceeds declared R = " << dyn.bound_R
         << " at sample " << s;
      throw CertificationError(os.str());
    }
    Vec diff(dyn.dim);
    for (std::size_t i = 0; i < dyn.dim; ++i) diff[i] = fa[i] - fb[i];
    double num = norm2(diff);
    double den = torus_distance(x1, x2) + wasserstein(2, m1, m2).value;
    if (den > 1e-9) {
      double ratio = num / den;
      rep.l_observed = std::max(rep.l_observed, ratio);
      if (ratio > dyn.lipschitz_L + 1e-9) {
        std::ostringstream os;
        os << dyn.name << ": Lipschitz ratio " << ratio << " exceeds declared L = "
           << dyn.lipschitz_L << " at sample " << s;
        throw CertificationError(os.str());
      }
    }
  }
  rep.ok = true;
  return rep;
}

}  // namespace mftg
