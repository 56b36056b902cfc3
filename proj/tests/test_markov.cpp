#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "mftg/catalog.hpp"
#include "mftg/markov.hpp"

using namespace mftg;

namespace {

std::shared_ptr<const GameDynamics> shared_game(const std::string& name,
                                                const CatalogParams& p = {}) {
  return std::make_shared<GameDynamics>(make_game(name, p));
}

}  // namespace

TEST_CASE("comparison parameter closed form", "[markov]") {
  // R = 2, d = 1: epsilon = sqrt(2 h)
  CHECK(epsilon_for_lattice(1.0 / 16.0, 1, 2.0) ==
        Catch::Approx(0.35355339059327378).epsilon(1e-15));
  CHECK(epsilon_for_lattice(1.0 / 8.0, 1, 2.0) == Catch::Approx(0.5));
  // small drift bound: the covering branch takes over
  CHECK(epsilon_for_lattice(0.01, 1, 0.1) == Catch::Approx(0.1 / std::sqrt(2.0)));
  // dimension enters as d^(1/4)
  CHECK(epsilon_for_lattice(0.25, 2, 2.0) ==
        Catch::Approx(0.5 * std::sqrt(2.0) * std::pow(2.0, 0.25)));
  CHECK_THROWS_AS(epsilon_for_lattice(0.0, 1, 2.0), InvalidInput);
}

TEST_CASE("grid generator moves mass to the signed neighbor", "[markov]") {
  auto model = build_lattice_chain(shared_game("pursuit-1d"), 1.0 / 8.0);
  REQUIRE(model.n_states() == 8);
  CHECK(model.h == Catch::Approx(0.125));
  CHECK(model.epsilon == Catch::Approx(0.5));
  CHECK(model.rate_bound == Catch::Approx(16.0));

  auto mu = SimplexVector::uniform(model.lattice);
  // u = +1, v = +1: f = 2 everywhere, rate 16 to the upper neighbor
  Matrix q = model.rate(0.0, mu, 2, 2);
  for (std::size_t s = 0; s < 8; ++s) {
    CHECK(q(s, s) == Catch::Approx(-16.0));
    CHECK(q(s, (s + 1) % 8) == Catch::Approx(16.0));
    for (std::size_t y = 0; y < 8; ++y)
      if (y != s && y != (s + 1) % 8) CHECK(q(s, y) == 0.0);
  }

  // u = +1, v = -1: f = 0.4, rate 3.2 upward
  Matrix q2 = model.rate(0.3, mu, 2, 0);
  CHECK(q2(5, 6) == Catch::Approx(3.2));
  CHECK(q2(5, 5) == Catch::Approx(-3.2));

  // u = -1, v = +1: f = -0.4, downward with wrap at state 0
  Matrix q3 = model.rate(0.3, mu, 0, 2);
  CHECK(q3(0, 7) == Catch::Approx(3.2));
  CHECK(q3(0, 0) == Catch::Approx(-3.2));

  // both idle: zero generator
  Matrix q4 = model.rate(0.9, mu, 1, 1);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y) CHECK(q4(x, y) == 0.0);
}

TEST_CASE("planar generator splits rates per coordinate", "[markov]") {
  auto model = build_lattice_chain(shared_game("pursuit-2d"), 0.25);
  REQUIRE(model.n_states() == 16);
  auto mu = SimplexVector::uniform(model.lattice);
  // u = (1,0), v = (0,-1): f = (1.2, -0.8)
  Matrix q = model.rate(0.0, mu, 4, 1);
  for (std::size_t i0 = 0; i0 < 4; ++i0)
    for (std::size_t i1 = 0; i1 < 4; ++i1) {
      std::size_t s = i0 * 4 + i1;
      std::size_t up0 = ((i0 + 1) % 4) * 4 + i1;
      std::size_t dn1 = i0 * 4 + (i1 + 3) % 4;
      CHECK(q(s, up0) == Catch::Approx(4.8));
      CHECK(q(s, dn1) == Catch::Approx(3.2));
      CHECK(q(s, s) == Catch::Approx(-8.0));
    }
}

TEST_CASE("grid pitch preconditions", "[markov]") {
  auto dyn = shared_game("pursuit-1d");
  CHECK_THROWS_AS(build_lattice_chain(dyn, 0.3), InvalidInput);
  CHECK_THROWS_AS(build_lattice_chain(dyn, 0.5), InvalidInput);
  CHECK_THROWS_AS(build_lattice_chain(dyn, 0.6), InvalidInput);
  CHECK_THROWS_AS(build_lattice_chain(dyn, 0.0), InvalidInput);
  CHECK_THROWS_AS(build_lattice_chain(nullptr, 0.125), InvalidInput);
  CHECK_NOTHROW(build_lattice_chain(dyn, 1.0 / 3.0));
}

TEST_CASE("split generator reassembles and isolates the players", "[markov]") {
  auto model = build_split_chain(shared_game("crowd-averse-1d"), 0.125);
  REQUIRE(model.separated());
  auto mu = SimplexVector::uniform(model.lattice);
  Vec w(8, 0.0);
  w[0] = 0.5;
  w[3] = 0.25;
  w[6] = 0.25;
  auto skew = SimplexVector(model.lattice, w);

  for (std::size_t iu = 0; iu < 3; ++iu)
    for (std::size_t iv = 0; iv < 3; ++iv) {
      Matrix q = model.rate(0.4, skew, iu, iv);
      Matrix qu = model.rate_u(0.4, skew, iu);
      Matrix qv = model.rate_v(0.4, skew, iv);
      for (std::size_t x = 0; x < 8; ++x)
        for (std::size_t y = 0; y < 8; ++y)
          CHECK(q(x, y) == Catch::Approx(qu(x, y) + qv(x, y)).margin(1e-13));
    }

  // the second player's part carries no measure dependence
  Matrix a = model.rate_v(0.1, mu, 2);
  Matrix b = model.rate_v(0.1, skew, 2);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y) CHECK(a(x, y) == b(x, y));

  // but the first player's part does
  Matrix c = model.rate_u(0.1, mu, 2);
  Matrix d = model.rate_u(0.1, skew, 2);
  double diff = 0.0;
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y) diff = std::max(diff, std::fabs(c(x, y) - d(x, y)));
  CHECK(diff > 1e-3);

  auto plain = shared_game("pursuit-1d");
  auto no_parts = std::make_shared<GameDynamics>(*plain);
  no_parts->f_u = nullptr;
  CHECK_THROWS_AS(build_split_chain(no_parts, 0.125), InvalidInput);
}

TEST_CASE("epsilon certificate passes for built chains", "[markov]") {
  struct Case {
    const char* name;
    double h;
  };
  for (auto c : {Case{"pursuit-1d", 1.0 / 8.0}, Case{"pursuit-1d", 1.0 / 16.0},
                 Case{"crowd-averse-1d", 1.0 / 8.0}, Case{"pursuit-2d", 0.25}}) {
    auto model = build_lattice_chain(shared_game(c.name), c.h);
    auto cert = certify_epsilon(model, 6, 0xe95u);
    INFO(c.name << " h=" << c.h << ": " << cert.detail);
    CHECK(cert.pass);
    CHECK(cert.covering <= cert.epsilon);
    CHECK(cert.drift_defect <= 1e-12);
    CHECK(cert.second_moment <= cert.epsilon * cert.epsilon + 1e-12);
    CHECK(cert.worst_offdiag >= 0.0);
    CHECK(cert.rate_outflow <= model.rate_bound + 1e-9);
  }
}

TEST_CASE("epsilon certificate audits the split build", "[markov]") {
  auto model = build_split_chain(shared_game("crowd-averse-1d"), 1.0 / 8.0);
  auto cert = certify_epsilon(model, 5, 0x5e7u);
  INFO(cert.detail);
  CHECK(cert.pass);
  CHECK(cert.split_defect <= 1e-10 * model.rate_bound);
  // the crowd term moves rates when the measure moves
  CHECK(cert.mu_ratio > 1e-3);
  CHECK(cert.mu_ratio <= model.lipschitz_mu + 1e-9);
}

TEST_CASE("doctored models fail certification with a reason", "[markov]") {
  auto model = build_lattice_chain(shared_game("pursuit-1d"), 0.125);

  SECTION("epsilon too small for the covering radius") {
    auto bad = model;
    bad.epsilon = 0.01;  // covering radius is 1/16
    auto cert = certify_epsilon(bad, 2, 1u);
    CHECK_FALSE(cert.pass);
    CHECK(cert.detail.find("covering") != std::string::npos);
  }

  SECTION("rates that break the row-sum law") {
    auto bad = model;
    auto base = model.rate;
    bad.rate = [base](double t, const SimplexVector& mu, std::size_t iu, std::size_t iv) {
      Matrix q = base(t, mu, iu, iv);
      q(0, 1) += 1e-3;
      return q;
    };
    auto cert = certify_epsilon(bad, 2, 1u);
    CHECK_FALSE(cert.pass);
  }

  SECTION("understated measure sensitivity") {
    auto bad = build_lattice_chain(shared_game("crowd-averse-1d"), 0.125);
    bad.lipschitz_mu = 1e-6;
    auto cert = certify_epsilon(bad, 5, 2u);
    CHECK_FALSE(cert.pass);
    CHECK(cert.detail.find("sensitivity") != std::string::npos);
  }
}
