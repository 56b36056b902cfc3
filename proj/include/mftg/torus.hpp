#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <string>

#include "mftg/linalg.hpp"

namespace mftg {

// Wraps a coordinate into [0, 1). Values like -1e-17 land on 1.0 after
// std::floor subtraction, so wrap again.
inline double wrap_unit(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;
  return y;
}

// Minimal representative of a coordinate difference, in [-1/2, 1/2].
// The antipodal tie (both +1/2 and -1/2 minimal) resolves to +1/2.
inline double wrap_half(double diff) {
  double y = diff - std::round(diff);
  if (y == -0.5) y = 0.5;
  return y;
}

// Point on the flat torus [0,1)^d with canonical coordinates.
class TorusPoint {
 public:
  explicit TorusPoint(Vec coords) : coords_(std::move(coords)) {
    for (auto& c : coords_) {
      if (!std::isfinite(c)) throw InvalidInput("TorusPoint: non-finite coordinate");
      c = wrap_unit(c);
    }
  }

  std::size_t dim() const { return coords_.size(); }
  const Vec& coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const TorusPoint& a, const TorusPoint& b) {
    return a.coords_ == b.coords_;
  }
  // Lexicographic order on canonical coordinates.
  friend std::strong_ordering operator<=>(const TorusPoint& a, const TorusPoint& b) {
    for (std::size_t i = 0; i < a.coords_.size() && i < b.coords_.size(); ++i) {
      if (a.coords_[i] < b.coords_[i]) return std::strong_ordering::less;
      if (a.coords_[i] > b.coords_[i]) return std::strong_ordering::greater;
    }
    return a.coords_.size() <=> b.coords_.size();
  }

 private:
  Vec coords_;
};

inline void require_same_dim(const TorusPoint& a, const TorusPoint& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("torus points of different dimension");
}

// ell(x, y): the minimal-norm representative of x - y, coordinatewise in
// [-1/2, 1/2]. For d = 1 the componentwise rule is exactly the minimal-norm
// rule; in higher d the Euclidean-minimal representative factors per
// coordinate, so they agree there too.
inline Vec ell(const TorusPoint& x, const TorusPoint& y) {
  require_same_dim(x, y);
  Vec d(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) d[i] = wrap_half(x[i] - y[i]);
  return d;
}

inline double torus_distance(const TorusPoint& x, const TorusPoint& y) {
  return norm2(ell(x, y));
}

inline double torus_distance_sq(const TorusPoint& x, const TorusPoint& y) {
  Vec d = ell(x, y);
  return dot(d, d);
}

// x shifted by a displacement vector, wrapped back to canonical coordinates.
inline TorusPoint translate(const TorusPoint& x, const Vec& v) {
  if (x.dim() != v.size()) throw DimensionMismatch("translate: size mismatch");
  Vec c(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) c[i] = x[i] + v[i];
  return TorusPoint(std::move(c));
}

}  // namespace mftg
