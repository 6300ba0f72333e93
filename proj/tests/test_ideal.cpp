#include <doctest.h>

#include <cmath>

#include "mathesis/ideal_engine.hpp"
#include "mathesis/polynomial.hpp"
#include "mathesis/rng.hpp"

using namespace mathesis;

namespace {

const PolyRing kXY{{"x", "y"}};

Polynomial poly(const std::string& text) { return parse_polynomial(text, kXY); }

Polynomial random_poly(RngStream& rng, std::size_t n_vars, int max_deg, int terms) {
  Polynomial p(n_vars);
  auto basis = monomial_basis(n_vars, max_deg);
  for (int t = 0; t < terms; ++t) {
    const Monomial& m = basis[rng.next_below(basis.size())];
    p.add_term(m, rng.uniform(-2.0, 2.0));
  }
  return p;
}

}  // namespace

TEST_CASE("polynomial arithmetic") {
  SUBCASE("difference of squares") {
    Polynomial prod = poly("x - y") * poly("x + y");
    CHECK(prod == poly("x^2 - y^2"));
    // Oracle: agreement at random evaluation points.
    RngStream rng(7);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> at{rng.uniform(-3, 3), rng.uniform(-3, 3)};
      double lhs = poly("x - y").eval(at) * poly("x + y").eval(at);
      CHECK(prod.eval(at) == doctest::Approx(lhs).epsilon(1e-12));
    }
  }
  SUBCASE("additive inverse cancels") {
    Polynomial p = poly("3*x^2*y - 1.5*y + 2");
    CHECK((p + p * -1.0).is_zero());
  }
  SUBCASE("coefficient norm") {
    CHECK(poly("x^2 - y^2").norm_sq() == doctest::Approx(2.0));
  }
  SUBCASE("text form round trips") {
    Polynomial p = poly("3*x^2*y - 1.5*y + 2");
    CHECK(parse_polynomial(polynomial_text(p, kXY), kXY) == p);
  }
  SUBCASE("derivative") {
    Polynomial d = poly("x^2*y").derivative(0);
    CHECK(d == poly("2*x*y"));
  }
}

TEST_CASE("monomial_basis") {
  auto b21 = monomial_basis(2, 1);
  REQUIRE(b21.size() == 3);
  CHECK(b21[0].total_degree() == 0);        // 1
  CHECK(b21[1].exps == std::vector<std::uint32_t>{1, 0});  // x
  CHECK(b21[2].exps == std::vector<std::uint32_t>{0, 1});  // y

  CHECK(monomial_basis(2, 2).size() == 6);  // C(4,2)
  auto b30 = monomial_basis(3, 0);
  REQUIRE(b30.size() == 1);
  CHECK(b30[0].total_degree() == 0);

  CHECK_THROWS_AS(monomial_basis(6, 12, 1000), CapacityError);
}

TEST_CASE("effective_degree_bound") {
  Polynomial h = poly("x^2");
  std::vector<Polynomial> f = {poly("x - y")};
  SUBCASE("formula with zero slack") {
    IdealOptions opt;
    opt.slack = 0;
    opt.degree_cap = 8;
    CHECK(effective_degree_bound(h, f, opt) == 3);
  }
  SUBCASE("cap binds") {
    IdealOptions opt;
    opt.slack = 2;
    opt.degree_cap = 2;
    CHECK(effective_degree_bound(h, f, opt) == 2);
  }
  SUBCASE("default slack of one") {
    IdealOptions opt;
    CHECK(effective_degree_bound(h, f, opt) == 4);
  }
}

TEST_CASE("solve_witness") {
  SUBCASE("difference of squares factorization") {
    WitnessSolution sol = solve_witness(poly("x^2 - y^2"), {poly("x - y")}, 1);
    CHECK(sol.energy < 1e-18);
    REQUIRE(sol.witnesses.size() == 1);
    // Oracle: symbolic factorization gives g1 = x + y exactly.
    Polynomial expect = poly("x + y");
    Polynomial diff = sol.witnesses[0] - expect;
    CHECK(diff.norm_sq() < 1e-16);
  }
  SUBCASE("degree obstruction keeps x out of <x^2>") {
    WitnessSolution sol = solve_witness(poly("x"), {poly("x^2")}, 3);
    CHECK(sol.energy > 0.5);  // the x coefficient is unreachable
    CHECK(sol.energy == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("zero hypothesis is trivially a member") {
    WitnessSolution sol = solve_witness(Polynomial(2), {poly("x - y")}, 2);
    CHECK(sol.energy == 0.0);
    for (const auto& g : sol.witnesses) CHECK(g.norm_sq() < 1e-20);
  }
}

TEST_CASE("radical_check") {
  SUBCASE("x is in the radical of <x^2> at power two") {
    auto res = radical_check(poly("x"), {poly("x^2")}, 3, 2);
    REQUIRE(res.has_value());
    CHECK(res->first == 2);
    // witness g = 1
    Polynomial one = Polynomial::constant(2, 1.0);
    CHECK((res->second.witnesses[0] - one).norm_sq() < 1e-16);
  }
  SUBCASE("members are found at power one") {
    auto res = radical_check(poly("x - y"), {poly("x - y")}, 3, 1);
    REQUIRE(res.has_value());
    CHECK(res->first == 1);
  }
  SUBCASE("units stay outside proper radicals") {
    auto res = radical_check(Polynomial::constant(2, 1.0), {poly("x")}, 4, 3);
    CHECK_FALSE(res.has_value());
  }
}

TEST_CASE("witness_energy_step") {
  Polynomial h = poly("x^2 - y^2");
  SUBCASE("empty basis gives the raw hypothesis norm") {
    auto [e0, e1] = witness_energy_step(h, {}, poly("x - y"), 1);
    CHECK(e0 == doctest::Approx(h.norm_sq()));
    CHECK(e1 < 1e-14);
  }
  SUBCASE("adding h itself zeroes the residual") {
    auto [e0, e1] = witness_energy_step(h, {poly("y")}, h, 2);
    CHECK(e1 < 1e-14);
    CHECK(e1 <= e0 + 1e-10);
  }
  SUBCASE("an irrelevant basis element changes nothing") {
    PolyRing ring3{{"x", "y", "w"}};
    Polynomial h3 = parse_polynomial("x^2 - y^2", ring3);
    auto [e0, e1] =
        witness_energy_step(h3, {parse_polynomial("x - y", ring3)},
                            parse_polynomial("w^3", ring3), 2);
    CHECK(std::abs(e0 - e1) < 1e-10);
  }
}

TEST_CASE("monotone span growth") {
  RngStream rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    Polynomial h = random_poly(rng, 2, 3, 4);
    std::vector<Polynomial> f;
    int s = 1 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < s; ++i) f.push_back(random_poly(rng, 2, 2, 3));
    Polynomial f_new = random_poly(rng, 2, 2, 3);
    if (f_new.is_zero()) continue;
    auto [e0, e1] = witness_energy_step(h, f, f_new, 3);
    CHECK(e1 <= e0 + 1e-10);
    CHECK(e0 >= 0.0);
    CHECK(e1 >= 0.0);
  }
}

TEST_CASE("exactness on constructed members") {
  RngStream rng(5678);
  for (int trial = 0; trial < 25; ++trial) {
    int bound = 2;
    std::vector<Polynomial> f;
    int s = 1 + static_cast<int>(rng.next_below(2));
    Polynomial h(2);
    for (int i = 0; i < s; ++i) {
      Polynomial fi = random_poly(rng, 2, 2, 3);
      Polynomial gi = random_poly(rng, 2, bound, 2);
      f.push_back(fi);
      h = h + gi * fi;
    }
    WitnessSolution sol = solve_witness(h, f, bound);
    CHECK(sol.energy < 1e-8);
    for (const auto& g : sol.witnesses) CHECK(g.degree() <= bound);
  }
}
