#include <random>

#include "doctest.h"
#include "fuzzclear/clearance_rules.hpp"
#include "fuzzclear/fuzzy_engine.hpp"
#include "oracle.hpp"

using namespace fuzzclear;
using MF = MembershipFunction;

TEST_SUITE("fuzzy_engine") {
  TEST_CASE("membership shapes evaluate piecewise-linearly") {
    CHECK(evaluate_mf(MF::triangle(0, 1, 2), 1.0) == 1.0);
    CHECK(evaluate_mf(MF::triangle(0, 1, 2), 0.5) == 0.5);
    CHECK(evaluate_mf(MF::trapezoid(0, 0, 25, 75), 50.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(evaluate_mf(MF::triangle(0, 1, 2), -0.1) == 0.0);
    CHECK(evaluate_mf(MF::triangle(0, 1, 2), 2.1) == 0.0);
    CHECK(evaluate_mf(MF::crisp_below(0.5), 0.49) == 1.0);
    CHECK(evaluate_mf(MF::crisp_below(0.5), 0.5) == 0.0);
    CHECK(evaluate_mf(MF::crisp_at_or_above(0.5), 0.5) == 1.0);
    // Shoulders: flat top reaches the domain edge.
    CHECK(evaluate_mf(MF::trapezoid(0, 0, 25, 75), 0.0) == 1.0);
    CHECK(evaluate_mf(MF::trapezoid(100, 200, 300, 300), 300.0) == 1.0);
  }

  TEST_CASE("malformed parameter order is rejected at construction") {
    CHECK_THROWS_AS(MF::triangle(2, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(MF::trapezoid(0, 2, 1, 3), std::invalid_argument);
    CHECK_THROWS_AS(MF::triangle(0, std::nan(""), 1), std::invalid_argument);
    CHECK_THROWS_AS(MF::from_params("triangle", {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(MF::from_params("bell", {1, 2, 3}), std::invalid_argument);
  }

  TEST_CASE("membership stays in [0,1] and matches the oracle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-50.0, 150.0);
    for (int i = 0; i < 2000; ++i) {
      double p[4] = {u(rng), u(rng), u(rng), u(rng)};
      std::sort(p, p + 4);
      const auto trap = MF::trapezoid(p[0], p[1], p[2], p[3]);
      const auto tri = MF::triangle(p[0], p[1], p[3]);
      const double x = u(rng);
      const double mt = trap(x);
      CHECK(mt >= 0.0);
      CHECK(mt <= 1.0);
      CHECK(mt == doctest::Approx(oracle::trap(x, p[0], p[1], p[2], p[3])).epsilon(1e-12));
      CHECK(tri(x) == doctest::Approx(oracle::tri(x, p[0], p[1], p[3])).epsilon(1e-12));
    }
  }

  TEST_CASE("single always-on rule returns its consequent") {
    InputVariable a{"a", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    InputVariable b{"b", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    TskSystem sys("one", a, b, {{"on", "on", Consequent::constant(7.0)}}, 0, 10);
    for (double x : {0.0, 0.3, 1.0, -5.0, 9.0}) CHECK(sys.infer(x, 0.4) == 7.0);
  }

  TEST_CASE("equal firing strengths average the consequents") {
    InputVariable a{"a", 0, 2, {{"lo", MF::triangle(0, 0, 2)}, {"hi", MF::triangle(0, 2, 2)}}};
    InputVariable b{"b", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    TskSystem sys("two", a, b,
                  {{"lo", "on", Consequent::constant(0.0)}, {"hi", "on", Consequent::constant(1.0)}}, 0, 1);
    CHECK(sys.infer(1.0, 0.5) == 0.5);
  }

  TEST_CASE("wildcard antecedent fires with membership one") {
    InputVariable a{"a", 0, 1, {{"x", MF::crisp_below(0.5)}, {"y", MF::crisp_at_or_above(0.5)}}};
    InputVariable b{"b", 0, 10, {{"lo", MF::triangle(0, 0, 10)}}};
    TskSystem sys("w", a, b, {{"x", std::nullopt, Consequent::constant(3.0)},
                              {"y", "lo", {1.0, 0.0, 1.0, 0.0}}}, 0, 100);
    CHECK(sys.infer(0.2, 7.0) == 3.0);
    CHECK(sys.infer(0.8, 4.0) == doctest::Approx(5.0));
  }

  TEST_CASE("inputs and outputs are clamped to their ranges") {
    InputVariable a{"a", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    InputVariable b{"b", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    TskSystem sys("lin", a, b, {{"on", "on", {0.0, 10.0, 0.0, 0.0}}}, 0, 5);
    const auto d = sys.infer_detail(3.0, 0.5);
    CHECK(d.x1 == 1.0);
    CHECK(d.raw == 10.0);
    CHECK(d.output == 5.0);
  }

  TEST_CASE("reciprocal consequent is guarded at zero") {
    Consequent c{0.0, 0.0, 0.0, 0.1};
    CHECK(c(0.0, 0.0) == doctest::Approx(0.1 / Consequent::kReciprocalGuard));
    CHECK(c(2.0, 0.0) == doctest::Approx(0.05));
  }

  TEST_CASE("a rule-base hole reports the offending inputs") {
    InputVariable a{"a", 0, 10, {{"lo", MF::triangle(0, 0, 3)}}};
    InputVariable b{"b", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    TskSystem sys("holey", a, b, {{"lo", "on", Consequent::constant(1.0)}}, 0, 1);
    try {
      sys.infer(8.0, 0.5);
      FAIL("expected a hole");
    } catch (const RuleBaseHole& h) {
      CHECK(h.x1 == 8.0);
      CHECK(h.x2 == 0.5);
    }
  }

  TEST_CASE("construction validates labels and ranges") {
    InputVariable a{"a", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    InputVariable b{"b", 0, 1, {{"on", MF::trapezoid(0, 0, 1, 1)}}};
    CHECK_THROWS_AS(TskSystem("bad", a, b, {{"off", "on", Consequent::constant(1)}}, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(TskSystem("bad", a, b, {{"on", "on", Consequent::constant(1)}}, 1, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(TskSystem("bad", a, b, {}, 0, 1), std::invalid_argument);
    TskSystem ok("ok", a, b, {{"on", "on", Consequent::constant(1)}}, 0, 1);
    CHECK_THROWS_AS(ok.with_membership("a", "nope", MF::triangle(0, 1, 2)), std::out_of_range);
    CHECK_THROWS_AS(ok.with_membership("zz", "on", MF::triangle(0, 1, 2)), std::out_of_range);
  }

  TEST_CASE("shipped subsystems have no holes over a random sweep") {
    const TskSystem systems[] = {make_radius_subsystem(), make_urgency_subsystem(),
                                 make_activation_subsystem()};
    std::mt19937_64 rng(11);
    for (const auto& s : systems) {
      std::uniform_real_distribution<double> u1(s.first().lo, s.first().hi);
      std::uniform_real_distribution<double> u2(s.second().lo, s.second().hi);
      int holes = 0;
      for (int i = 0; i < 10000; ++i) {
        try {
          const double y = s.infer(u1(rng), u2(rng));
          CHECK((y >= s.out_lo() && y <= s.out_hi()));
        } catch (const RuleBaseHole&) {
          ++holes;
        }
      }
      CHECK_MESSAGE(holes == 0, s.name());
    }
  }

  TEST_CASE("continuity of graded subsystems") {
    // Lipschitz bound: consequent spread times the sum of the steepest
    // membership slopes, plus the largest consequent slope.
    const TskSystem systems[] = {make_urgency_subsystem(), make_activation_subsystem()};
    std::mt19937_64 rng(5);
    const double h = 1e-6;
    for (const auto& s : systems) {
      double slope = 0.0;
      for (const auto& t : s.first().terms) slope = std::max(slope, t.mf.max_slope());
      for (const auto& t : s.second().terms) slope = std::max(slope, t.mf.max_slope());
      const double spread = 20.0;  // generous bound on |consequent| differences
      std::uniform_real_distribution<double> u1(s.first().lo + 1, s.first().hi - 1);
      std::uniform_real_distribution<double> u2(s.second().lo + 0.01, s.second().hi - 0.01);
      for (int i = 0; i < 20; ++i) {
        const double x1 = u1(rng), x2 = u2(rng);
        const double y = s.infer(x1, x2);
        const double bound = h * (4.0 * spread * slope + 10.0) * 10.0;
        CHECK(std::abs(s.infer(x1 + h, x2) - y) <= bound);
        CHECK(std::abs(s.infer(x1, x2 + h) - y) <= bound);
      }
    }
  }
}
