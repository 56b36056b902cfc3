#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mftg/rng.hpp"
#include "mftg/torus.hpp"

using namespace mftg;

namespace {

// Reference distance: minimum over all integer shifts in {-1,0,1}^d of the
// plain Euclidean norm of x - y + k.
double shift_oracle_distance(const TorusPoint& x, const TorusPoint& y) {
  const std::size_t d = x.dim();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < d; ++i) combos *= 3;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c;
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double k = static_cast<double>(static_cast<int>(rem % 3) - 1);
      rem /= 3;
      double diff = x[i] - y[i] + k;
      s += diff * diff;
    }
    best = std::min(best, s);
  }
  return std::sqrt(best);
}

TorusPoint random_point(Rng& rng, std::size_t d) {
  Vec c(d);
  for (auto& x : c) x = rng.uniform();
  return TorusPoint(std::move(c));
}

}  // namespace

TEST_CASE("coordinates are canonicalized into [0,1)") {
  CHECK(TorusPoint({1.25})[0] == Catch::Approx(0.25).margin(1e-15));
  CHECK(TorusPoint({-0.25})[0] == Catch::Approx(0.75).margin(1e-15));
  CHECK(TorusPoint({1.0})[0] == 0.0);
  CHECK(TorusPoint({0.0})[0] == 0.0);
  CHECK(TorusPoint({-3.5, 2.0})[1] == 0.0);
  CHECK(TorusPoint({-1e-17})[0] >= 0.0);
  CHECK(TorusPoint({-1e-17})[0] < 1.0);
  CHECK_THROWS_AS(TorusPoint({std::nan("")}), InvalidInput);
  CHECK_THROWS_AS(TorusPoint({std::numeric_limits<double>::infinity()}), InvalidInput);
}

TEST_CASE("displacement picks the short way around") {
  CHECK(torus_distance(TorusPoint({0.1}), TorusPoint({0.9})) == Catch::Approx(0.2).margin(1e-15));
  Vec l = ell(TorusPoint({0.1}), TorusPoint({0.9}));
  CHECK(l[0] == Catch::Approx(0.2).margin(1e-15));
  l = ell(TorusPoint({0.9}), TorusPoint({0.1}));
  CHECK(l[0] == Catch::Approx(-0.2).margin(1e-15));
}

TEST_CASE("antipodal coordinates take the +1/2 representative") {
  Vec l = ell(TorusPoint({0.25}), TorusPoint({0.75}));
  CHECK(l[0] == 0.5);
  l = ell(TorusPoint({0.75}), TorusPoint({0.25}));
  CHECK(l[0] == 0.5);
  l = ell(TorusPoint({0.0, 0.1}), TorusPoint({0.5, 0.3}));
  CHECK(l[0] == 0.5);
  CHECK(l[1] == Catch::Approx(-0.2).margin(1e-15));
}

TEST_CASE("distance agrees with the integer-shift oracle") {
  Rng rng(20240001);
  for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
    for (int it = 0; it < 400; ++it) {
      TorusPoint x = random_point(rng, d), y = random_point(rng, d);
      double ref = shift_oracle_distance(x, y);
      CHECK(torus_distance(x, y) == Catch::Approx(ref).margin(1e-13));
    }
  }
}

TEST_CASE("distance is a metric bounded by sqrt(d)/2") {
  Rng rng(20240002);
  for (int it = 0; it < 300; ++it) {
    TorusPoint x = random_point(rng, 2), y = random_point(rng, 2), z = random_point(rng, 2);
    double dxy = torus_distance(x, y);
    CHECK(dxy == Catch::Approx(torus_distance(y, x)).margin(1e-15));
    CHECK(dxy <= std::sqrt(2.0) / 2.0 + 1e-15);
    CHECK(dxy <= torus_distance(x, z) + torus_distance(z, y) + 1e-12);
    Vec l = ell(x, y);
    CHECK(std::fabs(l[0]) <= 0.5);
    CHECK(std::fabs(l[1]) <= 0.5);
    CHECK(torus_distance(x, y) == Catch::Approx(norm2(l)).margin(1e-15));
  }
  CHECK(torus_distance(TorusPoint({0.3, 0.3}), TorusPoint({0.3, 0.3})) == 0.0);
}

TEST_CASE("three-point expansion holds as an inequality, with equality iff the "
          "representative difference is itself minimal") {
  // General fact: |x-y|^2 - |y-z|^2 <= |x-z|^2 - 2 <l(x,z), l(y,z)>, because
  // l(x,z) - l(y,z) represents x - y but need not be its shortest
  // representative. Equality holds when it is.
  auto lhs_rhs = [](const TorusPoint& x, const TorusPoint& y, const TorusPoint& z) {
    double lhs = torus_distance_sq(x, y) - torus_distance_sq(y, z);
    Vec lxz = ell(x, z), lyz = ell(y, z);
    double rhs = torus_distance_sq(x, z) - 2.0 * dot(lxz, lyz);
    return std::pair<double, double>(lhs, rhs);
  };

  // Wrap case: l(x,z) - l(y,z) = 0.8 is not minimal, strict inequality.
  auto [lhs, rhs] = lhs_rhs(TorusPoint({0.4}), TorusPoint({0.6}), TorusPoint({0.0}));
  CHECK(lhs == Catch::Approx(-0.12).margin(1e-15));
  CHECK(rhs == Catch::Approx(0.48).margin(1e-15));

  Rng rng(20240003);
  int equal_cases = 0;
  for (int it = 0; it < 1000; ++it) {
    std::size_t d = 1 + it % 3;
    TorusPoint x = random_point(rng, d), y = random_point(rng, d), z = random_point(rng, d);
    auto [l, r] = lhs_rhs(x, y, z);
    CHECK(l <= r + 1e-12);
    Vec diff = ell(x, z);
    Vec lyz = ell(y, z);
    bool minimal = true;
    for (std::size_t i = 0; i < d; ++i) {
      diff[i] -= lyz[i];
      if (std::fabs(diff[i]) > 0.5) minimal = false;
    }
    if (minimal) {
      CHECK(l == Catch::Approx(r).margin(1e-12));
      ++equal_cases;
    }
  }
  CHECK(equal_cases > 100);
}

TEST_CASE("translate wraps back into the fundamental domain") {
  TorusPoint x({0.75, 0.5});
  TorusPoint y = translate(x, {0.5, -0.75});
  CHECK(y[0] == Catch::Approx(0.25).margin(1e-15));
  CHECK(y[1] == Catch::Approx(0.75).margin(1e-15));
  CHECK_THROWS_AS(translate(x, {0.1}), DimensionMismatch);
}
