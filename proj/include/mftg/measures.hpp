#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "mftg/torus.hpp"
#include "mftg/transport.hpp"

namespace mftg {

struct WeightedAtom {
  TorusPoint point;
  double weight;
};

// Finitely supported probability measure on the torus. Atoms are kept sorted
// lexicographically, duplicates merged, weights positive and renormalized.
class DiscreteMeasure {
 public:
  explicit DiscreteMeasure(std::vector<WeightedAtom> atoms) {
    if (atoms.empty()) throw InvalidInput("DiscreteMeasure: no atoms");
    const std::size_t d = atoms.front().point.dim();
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.point.dim() != d) throw DimensionMismatch("DiscreteMeasure: mixed dimensions");
      if (!std::isfinite(a.weight) || a.weight < 0.0)
        throw InvalidInput("DiscreteMeasure: bad weight");
      total += a.weight;
    }
    if (total <= 0.0) throw InvalidInput("DiscreteMeasure: zero total mass");
    if (std::fabs(total - 1.0) > 1e-6)
      throw InvalidInput("DiscreteMeasure: weights far from a probability vector");
    std::sort(atoms.begin(), atoms.end(),
              [](const WeightedAtom& a, const WeightedAtom& b) { return a.point < b.point; });
    for (auto& a : atoms) {
      a.weight /= total;
      if (a.weight == 0.0) continue;
      if (!atoms_.empty() && atoms_.back().point == a.point)
        atoms_.back().weight += a.weight;
      else
        atoms_.push_back(a);
    }
    if (atoms_.empty()) throw InvalidInput("DiscreteMeasure: all weights vanish");
  }

  static DiscreteMeasure dirac(TorusPoint x) {
    return DiscreteMeasure({WeightedAtom{std::move(x), 1.0}});
  }

  // Empirical measure of equally weighted particles.
  static DiscreteMeasure empirical(const std::vector<TorusPoint>& particles) {
    std::vector<WeightedAtom> atoms;
    atoms.reserve(particles.size());
    const double w = 1.0 / static_cast<double>(particles.size());
    for (const auto& p : particles) atoms.push_back({p, w});
    return DiscreteMeasure(std::move(atoms));
  }

  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return atoms_.front().point.dim(); }
  const std::vector<WeightedAtom>& atoms() const { return atoms_; }
  const TorusPoint& point(std::size_t i) const { return atoms_[i].point; }
  double weight(std::size_t i) const { return atoms_[i].weight; }

 private:
  DiscreteMeasure() = default;
  std::vector<WeightedAtom> atoms_;
};

// Ordered finite subset of the torus used as a chain state space.
class Lattice {
 public:
  explicit Lattice(std::vector<TorusPoint> pts) : points_(std::move(pts)) {
    if (points_.empty()) throw InvalidInput("Lattice: empty");
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
    if (points_.size() < 2) throw InvalidInput("Lattice: needs at least two points");
    const std::size_t d = points_.front().dim();
    for (const auto& p : points_)
      if (p.dim() != d) throw DimensionMismatch("Lattice: mixed dimensions");
    fineness_ = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i)
      for (std::size_t j = i + 1; j < points_.size(); ++j)
        fineness_ = std::min(fineness_, torus_distance(points_[i], points_[j]));
    estimate_covering();
  }

  // Regular grid hZ^d on the torus with h = 1/k, ordered lexicographically.
  static std::shared_ptr<const Lattice> regular(std::size_t dim, std::size_t k) {
    if (dim == 0 || k < 2) throw InvalidInput("Lattice::regular: need dim >= 1, k >= 2");
    std::size_t n = 1;
    for (std::size_t i = 0; i < dim; ++i) n *= k;
    const double h = 1.0 / static_cast<double>(k);
    std::vector<TorusPoint> pts;
    pts.reserve(n);
    for (std::size_t flat = 0; flat < n; ++flat) {
      Vec c(dim);
      std::size_t rem = flat;
      for (std::size_t i = dim; i > 0; --i) {
        c[i - 1] = static_cast<double>(rem % k) * h;
        rem /= k;
      }
      pts.emplace_back(std::move(c));
    }
    return std::shared_ptr<Lattice>(new Lattice(std::move(pts), dim, h));
  }

  const std::vector<TorusPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.front().dim(); }
  // Minimal pairwise distance d(S).
  double fineness() const { return fineness_; }
  // max over x of the distance to the nearest lattice point. Exact for
  // regular grids and for d = 1; a dense-sampling estimate otherwise.
  double covering_radius() const { return covering_; }
  bool covering_radius_exact() const { return covering_exact_; }

  // Index of the nearest lattice point, ties resolved by lattice order.
  std::size_t nearest(const TorusPoint& x) const {
    std::size_t best = 0;
    double bd = torus_distance_sq(x, points_[0]);
    for (std::size_t i = 1; i < points_.size(); ++i) {
      double d2 = torus_distance_sq(x, points_[i]);
      if (d2 < bd) {
        bd = d2;
        best = i;
      }
    }
    return best;
  }

  friend bool operator==(const Lattice& a, const Lattice& b) { return a.points_ == b.points_; }

 private:
  Lattice(std::vector<TorusPoint> pts, std::size_t dim, double h) : points_(std::move(pts)) {
    fineness_ = h;
    covering_ = 0.5 * h * std::sqrt(static_cast<double>(dim));
    covering_exact_ = true;
  }

  void estimate_covering() {
    const std::size_t d = points_.front().dim();
    if (d == 1) {
      // Exact: half of the largest gap between circular neighbors.
      double worst = 0.0;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        double a = points_[i][0];
        double b = (i + 1 < points_.size()) ? points_[i + 1][0] : points_[0][0] + 1.0;
        worst = std::max(worst, b - a);
      }
      covering_ = 0.5 * worst;
      covering_exact_ = true;
      return;
    }
    covering_exact_ = false;
    std::size_t grid = (d == 2) ? 96 : 24;
    std::vector<std::size_t> idx(d, 0);
    double worst = 0.0;
    while (true) {
      Vec c(d);
      for (std::size_t i = 0; i < d; ++i)
        c[i] = (static_cast<double>(idx[i]) + 0.5) / static_cast<double>(grid);
      TorusPoint x(std::move(c));
      worst = std::max(worst, torus_distance(x, points_[nearest(x)]));
      std::size_t pos = d;
      bool done = true;
      while (pos > 0) {
        --pos;
        if (++idx[pos] < grid) {
          done = false;
          break;
        }
        idx[pos] = 0;
      }
      if (done) break;
    }
    covering_ = worst;
  }

  std::vector<TorusPoint> points_;
  double fineness_ = 0.0;
  double covering_ = 0.0;
  bool covering_exact_ = false;
};

using LatticePtr = std::shared_ptr<const Lattice>;

inline bool same_lattice(const LatticePtr& a, const LatticePtr& b) {
  return a == b || (a && b && *a == *b);
}

// Probability vector over the points of a lattice.
class SimplexVector {
 public:
  SimplexVector(LatticePtr lattice, Vec values)
      : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (!lattice_) throw InvalidInput("SimplexVector: null lattice");
    if (values_.size() != lattice_->size())
      throw DimensionMismatch("SimplexVector: length != lattice size");
    double total = 0.0;
    for (auto& x : values_) {
      if (!std::isfinite(x)) throw InvalidInput("SimplexVector: non-finite entry");
      if (x < 0.0) {
        if (x < -1e-9) throw InvalidInput("SimplexVector: negative entry beyond tolerance");
        x = 0.0;
      }
      total += x;
    }
    if (std::fabs(total - 1.0) > 1e-6)
      throw InvalidInput("SimplexVector: mass far from 1");
    for (auto& x : values_) x /= total;
  }

  static SimplexVector vertex(LatticePtr lattice, std::size_t i) {
    Vec v(lattice->size(), 0.0);
    v.at(i) = 1.0;
    return SimplexVector(std::move(lattice), std::move(v));
  }

  static SimplexVector uniform(LatticePtr lattice) {
    Vec v(lattice->size(), 1.0 / static_cast<double>(lattice->size()));
    return SimplexVector(std::move(lattice), std::move(v));
  }

  const LatticePtr& lattice() const { return lattice_; }
  const Vec& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

 private:
  LatticePtr lattice_;
  Vec values_;
};

// mu as a measure: atoms at lattice points carrying positive weight.
inline DiscreteMeasure embed(const SimplexVector& mu) {
  std::vector<WeightedAtom> atoms;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu[i] > 0.0) atoms.push_back({mu.lattice()->points()[i], mu[i]});
  return DiscreteMeasure(std::move(atoms));
}

struct PlanEntry {
  std::size_t i, j;
  double mass;
};

// Coupling between two discrete measures; marginals are validated on
// construction to 1e-10.
class TransportPlan {
 public:
  TransportPlan(DiscreteMeasure first, DiscreteMeasure second, std::vector<PlanEntry> entries)
      : first_(std::move(first)), second_(std::move(second)), entries_(std::move(entries)) {
    Vec row(first_.size(), 0.0), col(second_.size(), 0.0);
    for (const auto& e : entries_) {
      if (e.i >= first_.size() || e.j >= second_.size())
        throw InvalidInput("TransportPlan: entry out of range");
      if (!(e.mass > 0.0)) throw InvalidInput("TransportPlan: nonpositive mass");
      row[e.i] += e.mass;
      col[e.j] += e.mass;
    }
    for (std::size_t i = 0; i < row.size(); ++i)
      if (std::fabs(row[i] - first_.weight(i)) > 1e-10)
        throw InvalidInput("TransportPlan: first marginal mismatch");
    for (std::size_t j = 0; j < col.size(); ++j)
      if (std::fabs(col[j] - second_.weight(j)) > 1e-10)
        throw InvalidInput("TransportPlan: second marginal mismatch");
    std::sort(entries_.begin(), entries_.end(), [](const PlanEntry& a, const PlanEntry& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
  }

  const DiscreteMeasure& first() const { return first_; }
  const DiscreteMeasure& second() const { return second_; }
  const std::vector<PlanEntry>& entries() const { return entries_; }

  double cost(int p) const {
    double s = 0.0;
    for (const auto& e : entries_) {
      double d = torus_distance(first_.point(e.i), second_.point(e.j));
      s += e.mass * (p == 1 ? d : d * d);
    }
    return s;
  }

 private:
  DiscreteMeasure first_, second_;
  std::vector<PlanEntry> entries_;
};

struct WassersteinResult {
  double value = 0.0;     // W_p
  double cost = 0.0;      // W_p^p
  double dual_gap = 0.0;
  bool certified = false;
  std::shared_ptr<const TransportPlan> plan;
};

// Exact p-Wasserstein distance (p in {1, 2}) with an optimal plan.
inline WassersteinResult wasserstein(int p, const DiscreteMeasure& m1,
                                     const DiscreteMeasure& m2) {
  if (p != 1 && p != 2) throw InvalidInput("wasserstein: p must be 1 or 2");
  if (m1.dim() != m2.dim()) throw DimensionMismatch("wasserstein: dimension mismatch");
  const std::size_t n1 = m1.size(), n2 = m2.size();
  Matrix cost(n1, n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      double d = torus_distance(m1.point(i), m2.point(j));
      cost(i, j) = (p == 1) ? d : d * d;
    }
  std::vector<double> a(n1), b(n2);
  for (std::size_t i = 0; i < n1; ++i) a[i] = m1.weight(i);
  for (std::size_t j = 0; j < n2; ++j) b[j] = m2.weight(j);
  TransportSolution sol = solve_transport(std::move(a), std::move(b), cost);

  WassersteinResult out;
  out.cost = sol.cost;
  out.value = (p == 1) ? sol.cost : std::sqrt(std::max(0.0, sol.cost));
  out.dual_gap = sol.dual_gap;
  out.certified = sol.worst_reduced >= -1e-9 && std::fabs(sol.dual_gap) <= 1e-9 &&
                  sol.worst_slack <= 1e-9;
  std::vector<PlanEntry> entries;
  entries.reserve(sol.flows.size());
  for (const auto& [i, j, f] : sol.flows) entries.push_back({i, j, f});
  out.plan = std::make_shared<TransportPlan>(m1, m2, std::move(entries));
  return out;
}

struct ProjectionResult {
  SimplexVector coordinates;
  double cost;  // W_2 distance between the input and its projection
};

// Nearest-lattice-point pushforward. The induced coupling is optimal among
// couplings whose second marginal lives on S, so the reported cost equals
// W_2(embed(result), m).
inline ProjectionResult project(const DiscreteMeasure& m, const LatticePtr& lattice) {
  if (m.dim() != lattice->dim()) throw DimensionMismatch("project: dimension mismatch");
  Vec values(lattice->size(), 0.0);
  double c2 = 0.0;
  for (const auto& a : m.atoms()) {
    std::size_t k = lattice->nearest(a.point);
    values[k] += a.weight;
    c2 += a.weight * torus_distance_sq(a.point, lattice->points()[k]);
  }
  return ProjectionResult{SimplexVector(lattice, std::move(values)), std::sqrt(c2)};
}

struct MetricComparison {
  double wp = 0.0;        // W_p(embed(mu1), embed(mu2))
  double wp_pow = 0.0;    // W_p^p
  double sum_abs_p = 0.0; // sum_i |mu2_i - mu1_i|^p
  double l1 = 0.0;
  double lower = 0.0;     // (d(S)^p / 2) * sum_abs_p
  double upper = 0.0;     // (dim^{p/2} / 2) * l1
  bool lower_ok = false;
  bool upper_ok = false;
};

// Checks the two-sided comparison between W_p and coordinate norms on a
// common lattice:  (d(S)^p/2) sum|dmu|^p  <=  W_p^p  <=  (dim^{p/2}/2) |dmu|_1.
inline MetricComparison metric_comparison(int p, const SimplexVector& mu1,
                                          const SimplexVector& mu2) {
  if (!same_lattice(mu1.lattice(), mu2.lattice()))
    throw InvalidInput("metric_comparison: measures live on different lattices");
  MetricComparison out;
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    double d = std::fabs(mu2[i] - mu1[i]);
    out.l1 += d;
    out.sum_abs_p += (p == 1) ? d : d * d;
  }
  if (out.l1 == 0.0) {
    out.lower_ok = out.upper_ok = true;
    return out;
  }
  auto w = wasserstein(p, embed(mu1), embed(mu2));
  out.wp = w.value;
  out.wp_pow = w.cost;
  const double ds = mu1.lattice()->fineness();
  const double dim = static_cast<double>(mu1.lattice()->dim());
  out.lower = 0.5 * (p == 1 ? ds : ds * ds) * out.sum_abs_p;
  out.upper = 0.5 * (p == 1 ? std::sqrt(dim) : dim) * out.l1;
  out.lower_ok = out.wp_pow >= out.lower - 1e-12;
  out.upper_ok = out.wp_pow <= out.upper + 1e-12;
  return out;
}

enum class PlanSide { first, second };

// Conditional measures of a plan given the atom on one side. Entry k of the
// result corresponds to atom k of that side's marginal.
inline std::vector<DiscreteMeasure> disintegrate(const TransportPlan& plan, PlanSide side) {
  const bool over_first = side == PlanSide::first;
  const DiscreteMeasure& base = over_first ? plan.first() : plan.second();
  const DiscreteMeasure& other = over_first ? plan.second() : plan.first();
  std::vector<std::vector<WeightedAtom>> groups(base.size());
  for (const auto& e : plan.entries()) {
    std::size_t k = over_first ? e.i : e.j;
    std::size_t o = over_first ? e.j : e.i;
    groups[k].push_back({other.point(o), e.mass / base.weight(k)});
  }
  std::vector<DiscreteMeasure> out;
  out.reserve(base.size());
  for (auto& g : groups) out.emplace_back(std::move(g));
  return out;
}

}  // namespace mftg
