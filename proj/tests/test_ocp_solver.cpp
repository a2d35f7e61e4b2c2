#include <random>

#include "doctest.h"
#include "fuzzclear/ocp_solver.hpp"
#include "oracle.hpp"

using namespace fuzzclear;

namespace {

OcpProblem runway_problem() {
  OcpProblem p;
  p.initial = {Vec3::Zero(), Vec3(80, 0, 0)};
  p.goal = Vec3(15000, 0, 1000);
  return p;
}

DecisionVector coast(int nodes, double tf) { return {ControlNodes(nodes, Vec3::Zero()), tf}; }

DecisionVector random_decision(std::mt19937_64& rng, int nodes) {
  std::uniform_real_distribution<double> ua(-2.0, 2.0), ut(100.0, 300.0);
  DecisionVector z;
  for (int j = 0; j < nodes; ++j) z.controls.emplace_back(ua(rng), ua(rng), ua(rng));
  z.t_final = ut(rng);
  return z;
}

// Per-sample loop re-summation of the obstacle penalty, independent of the
// library's cost routine.
double obstacle_penalty_oracle(const OcpProblem& p, const Trajectory& traj, double tf) {
  const std::size_t n = traj.size() - 1;
  double sum = 0.0;
  for (const auto& zone : p.zones) {
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = tf * static_cast<double>(k) / static_cast<double>(n);
      const double dx = traj[k].position.x() - (zone.center.x() + zone.velocity.x() * t);
      const double dy = traj[k].position.y() - (zone.center.y() + zone.velocity.y() * t);
      const double dz = traj[k].position.z() - (zone.center.z() + zone.velocity.z() * t);
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      const double depth = std::max(0.0, zone.radius - d);
      sum += (tf / static_cast<double>(n)) * depth * depth;
    }
  }
  return p.weights.obstacle * sum;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace

TEST_SUITE("ocp_solver") {
  TEST_CASE("decision vector round trip") {
    std::mt19937_64 rng(1);
    const auto z = random_decision(rng, 25);
    const auto flat = z.flatten();
    CHECK(flat.size() == 76);
    const auto back = DecisionVector::unflatten(flat);
    CHECK(back.t_final == z.t_final);
    for (std::size_t j = 0; j < z.controls.size(); ++j) CHECK(back.controls[j] == z.controls[j]);
  }

  TEST_CASE("ballistic and constant-acceleration integration") {
    const AircraftModel m;
    auto traj = integrate(m, {Vec3::Zero(), Vec3(80, 0, 0)}, ControlNodes(5, Vec3::Zero()), 10, 10);
    CHECK(traj.size() == 11);
    CHECK((traj.back().position - Vec3(800, 0, 0)).norm() <= 1e-12);

    traj = integrate(m, {}, ControlNodes(5, Vec3(1, 0, 0)), 10, 7);
    CHECK((traj.back().position - Vec3(50, 0, 0)).norm() <= 1e-12);
    CHECK((traj.back().velocity - Vec3(10, 0, 0)).norm() <= 1e-12);
  }

  TEST_CASE("RK4 is exact for constant controls") {
    const AircraftModel m;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2.5, 2.5), up(-1000, 1000), uv(-100, 100);
    for (int trial = 0; trial < 20; ++trial) {
      const std::array<double, 3> a{u(rng), u(rng), u(rng)}, p0{up(rng), up(rng), up(rng)},
          v0{uv(rng), uv(rng), uv(rng)};
      const double tf = 50.0 + trial * 10.0;
      const auto traj = integrate(m, {Vec3(p0[0], p0[1], p0[2]), Vec3(v0[0], v0[1], v0[2])},
                                  ControlNodes(25, Vec3(a[0], a[1], a[2])), tf, 100);
      double worst = 0.0;
      for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto ref = oracle::constant_accel(p0, v0, a, tf * static_cast<double>(k) / 100.0);
        worst = std::max(worst, (traj[k].position - Vec3(ref.p[0], ref.p[1], ref.p[2])).norm());
      }
      CHECK(worst <= 1e-9);
    }
  }

  TEST_CASE("controls are interpolated and clamped to the acceleration ball") {
    ControlNodes nodes{Vec3(0, 0, 0), Vec3(2, 0, 0)};
    CHECK(control_at(nodes, 0.5, 5.0) == Vec3(1, 0, 0));
    ControlNodes big{Vec3(30, 40, 0), Vec3(30, 40, 0)};
    CHECK((control_at(big, 0.3, 5.0) - Vec3(3, 4, 0)).norm() <= 1e-15);
  }

  TEST_CASE("non-finite states raise a divergence error") {
    const AircraftModel m;
    CHECK_THROWS_AS(integrate(m, {Vec3::Zero(), Vec3(1e307, 0, 0)}, ControlNodes(3, Vec3::Zero()), 600, 10),
                    DivergenceError);
  }

  TEST_CASE("cost of an exact reach is the final time") {
    OcpProblem p = runway_problem();
    p.goal = Vec3(80 * 100, 0, 0);
    const auto c = evaluate_cost(p, coast(25, 100));
    CHECK(c.time == 100.0);
    CHECK(c.obstacle == 0.0);
    CHECK(c.bounds == 0.0);
    CHECK(c.terminal <= 1e-18);
    CHECK(c.total == c.time + c.obstacle + c.terminal + c.bounds);
  }

  TEST_CASE("tF outside its bounds is projected") {
    OcpProblem p = runway_problem();
    CHECK(evaluate_cost(p, coast(25, 5)).time == 60.0);
    CHECK(evaluate_cost(p, coast(25, 5000)).time == 600.0);
  }

  TEST_CASE("a path through an active zone is penalized") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(4000, 0, 0), Vec3::Zero(), 500.0, 1}};
    const auto c = evaluate_cost(p, coast(25, 100));
    CHECK(c.obstacle > 0.0);
    // Sample-by-sample check that samples are actually inside the zone.
    const auto traj = integrate(p.model, p.initial, coast(25, 100).controls, 100, 100);
    int inside = 0;
    for (const auto& s : traj) inside += (s.position - p.zones[0].center).norm() < 500.0;
    CHECK(inside > 0);

    // Moving zone whose propagated center sits on the path midway.
    p.zones = {{Vec3(4000, -2000, 0), Vec3(0, 40, 0), 300.0, 2}};
    CHECK(evaluate_cost(p, coast(25, 100)).obstacle > 0.0);
  }

  TEST_CASE("penalty is positive whenever some sample is strictly inside") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    OcpProblem p = runway_problem();
    for (int i = 0; i < 50; ++i) {
      const auto z = random_decision(rng, 25);
      const auto traj = integrate(p.model, p.initial, z.controls, z.t_final, 100);
      const auto& s = traj[static_cast<std::size_t>(u(rng) * 100)];
      p.zones = {{s.position + Vec3(1, 0, 0) * u(rng) * 10, Vec3::Zero(), 20.0 + 100 * u(rng), 1}};
      CHECK(evaluate_cost(p, z).obstacle > 0.0);
    }
  }

  TEST_CASE("obstacle penalty matches the loop re-summation") {
    std::mt19937_64 rng(12);
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(6000, 100, 300), Vec3::Zero(), 1000.0, 1}, {Vec3(9000, 0, 0), Vec3(-20, 5, 1), 800.0, 2}};
    for (int i = 0; i < 10; ++i) {
      const auto z = random_decision(rng, 25);
      const auto traj = integrate(p.model, p.initial, z.controls, z.t_final, 100);
      const double ref = obstacle_penalty_oracle(p, traj, z.t_final);
      const double got = evaluate_cost(p, z).obstacle;
      CHECK(std::abs(got - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
  }

  TEST_CASE("obstacle penalty is linear in its weight") {
    std::mt19937_64 rng(13);
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(6000, 0, 0), Vec3::Zero(), 1500.0, 1}};
    const auto z = random_decision(rng, 25);
    const double base = evaluate_cost(p, z).obstacle;
    p.weights.obstacle *= 2.0;
    CHECK(evaluate_cost(p, z).obstacle == 2.0 * base);
  }

  TEST_CASE("bounds penalty is the quadratic hinge on speed and climb rate") {
    OcpProblem p = runway_problem();
    p.initial.velocity = Vec3(150, 0, 20);
    const auto z = coast(25, 100);
    const double speed = p.initial.velocity.norm();
    const double per_sample = std::pow(speed - 120.0, 2) + std::pow(20.0 - 15.0, 2);
    const double expected = p.weights.bounds * 101 * 1.0 * per_sample;
    CHECK(evaluate_cost(p, z).bounds == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("gradient: finite differences agree across step sizes") {
    std::mt19937_64 rng(21);
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(8000, 0, 300), Vec3(-10, 0, 0), 1200.0, 1}};
    for (int i = 0; i < 10; ++i) {
      const auto z = random_decision(rng, 25);
      const auto g5 = gradient_fd(p, z, 1e-5);
      const auto g6 = gradient_fd(p, z, 1e-6);
      const auto g7 = gradient_fd(p, z, 1e-7);
      CHECK(rel_err(g5, g6) <= 1e-3);
      CHECK(rel_err(g7, g6) <= 1e-3);
    }
  }

  TEST_CASE("gradient: adjoint matches finite differences") {
    std::mt19937_64 rng(22);
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(8000, 0, 300), Vec3(-10, 0, 0), 1200.0, 1}, {Vec3(5000, 500, 0), Vec3::Zero(), 700.0, 2}};
    for (int i = 0; i < 10; ++i) {
      const auto z = random_decision(rng, 25);
      CHECK(rel_err(gradient(p, z), gradient_fd(p, z)) <= 1e-4);
    }
  }

  TEST_CASE("gradient: dJ/dtF is one when penalties vanish") {
    OcpProblem p = runway_problem();
    p.weights.terminal = 0.0;
    const auto g = gradient(p, coast(25, 100));
    CHECK(g(75) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.head(75).norm() == 0.0);
  }

  TEST_CASE("gradient: a step along -g lowers a ballistic miss") {
    OcpProblem p = runway_problem();
    const auto z = coast(25, 150);
    const auto g = gradient(p, z);
    const double before = evaluate_cost(p, z).total;
    bool decreased = false;
    for (double s = 1e-3; s > 1e-12 && !decreased; s *= 0.5) {
      decreased = evaluate_cost(p, DecisionVector::unflatten(z.flatten() - s * g)).total < before;
    }
    CHECK(decreased);
  }

  TEST_CASE("solve: empty sky") {
    const OcpProblem p = runway_problem();
    const auto sol = solve(p);
    CHECK(sol.converged);
    CHECK(sol.cost.obstacle == 0.0);
    CHECK(sol.t_final() >= p.t_min);
    CHECK(sol.t_final() <= p.t_max);
    CHECK(sol.trajectory.size() == 101);
    CHECK(sol.trajectory.front().position == p.initial.position);
    CHECK(sol.trajectory.front().velocity == p.initial.velocity);
    CHECK((sol.trajectory.back().position - p.goal).norm() < 1.0);
    CHECK(sol.cost.total == sol.cost.time + sol.cost.obstacle + sol.cost.terminal + sol.cost.bounds);
  }

  TEST_CASE("solve: one static zone in virtual-hard mode") {
    OcpProblem p = runway_problem();
    p.weights.obstacle = CostWeights::kVirtualHard;
    p.zones = {{Vec3(7500, 0, 500), Vec3::Zero(), 1000.0, 1}};
    const auto sol = solve(p);
    CHECK_FALSE(sol.failed());
    CHECK(min_separation(sol, p.zones)[0] >= 0.95 * 1000.0);
  }

  TEST_CASE("solve: warm start from the previous solution") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(7500, 0, 500), Vec3::Zero(), 1000.0, 1}};
    const auto cold = solve(p);
    const auto warm = solve(p, cold.decision);
    CAPTURE(cold.iterations);
    CAPTURE(warm.iterations);
    CHECK(warm.iterations <= 0.1 * cold.iterations);
    CHECK(warm.cost.total <= cold.cost.total);
  }

  TEST_CASE("solve: deterministic") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(9000, 60, 550), Vec3(-15, 0, 0), 635.0, 1}};
    const auto a = solve(p);
    const auto b = solve(p);
    CHECK(a.cost.total == b.cost.total);
    CHECK(a.cost.obstacle == b.cost.obstacle);
    CHECK(a.iterations == b.iterations);
    CHECK(a.decision.flatten() == b.decision.flatten());
  }

  TEST_CASE("solve: accepted steps never raise the cost") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(7500, 0, 500), Vec3::Zero(), 1000.0, 1}};
    const double start = evaluate_cost(p, cold_start(p)).total;
    double prev = start;
    for (int iters : {1, 2, 5, 10, 20, 40}) {
      SolverOptions o;
      o.max_iterations = iters;
      const double c = solve(p, std::nullopt, o).cost.total;
      CHECK(c <= prev);
      prev = c;
    }
  }

  TEST_CASE("solve: violation depth does not grow with the weight") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3(7500, 0, 500), Vec3::Zero(), 1000.0, 1}};
    double prev = std::numeric_limits<double>::infinity();
    for (double w : {1e2, 1e4, 1e6}) {
      p.weights.obstacle = w;
      const auto sol = solve(p);
      const double depth = std::max(0.0, 1000.0 - min_separation(sol, p.zones)[0]);
      CAPTURE(w);
      CHECK(depth <= prev + 1e-6);
      prev = depth;
    }
  }

  TEST_CASE("solve: divergence is reported, not thrown") {
    OcpProblem p = runway_problem();
    p.initial.velocity = Vec3(1e307, 0, 0);
    OcpSolution sol;
    CHECK_NOTHROW(sol = solve(p));
    CHECK(sol.failed());
    CHECK_FALSE(sol.converged);
    CHECK_FALSE(sol.diagnostic.empty());
  }

  TEST_CASE("time shift trims the elapsed part of the plan") {
    DecisionVector z;
    for (int j = 0; j < 11; ++j) z.controls.emplace_back(j, 0, 0);
    z.t_final = 100;
    const auto s = time_shift(z, 10, 60);
    CHECK(s.t_final == 90);
    CHECK(s.controls.size() == 11);
    // Old node value at normalized time (10 + 9 j) / 100 is that times 10.
    for (int j = 0; j < 11; ++j) CHECK(s.controls[j].x() == doctest::Approx((10 + 9.0 * j) / 10.0));
    CHECK(time_shift(z, 50, 60).t_final == 60);
  }

  TEST_CASE("min separation of far and crossing zones") {
    OcpProblem p = runway_problem();
    OcpSolution sol;
    sol.decision = coast(25, 100);
    sol.trajectory = integrate(p.model, p.initial, sol.decision.controls, 100, 100);
    const std::vector<Zone> zones{{Vec3(0, 5000, 0), Vec3::Zero(), 100, 1},
                                  {Vec3(4000, 0, 0), Vec3::Zero(), 100, 2}};
    const auto d = min_separation(sol, zones);
    CHECK(d[0] == doctest::Approx(5000.0));
    CHECK(d[1] <= 1e-9);
  }

  TEST_CASE("state along a plan matches the analytic motion") {
    const OcpProblem p = runway_problem();
    OcpSolution sol;
    sol.decision = {ControlNodes(25, Vec3(1, 0.5, 0)), 100};
    sol.trajectory = integrate(p.model, p.initial, sol.decision.controls, 100, 100);
    for (double t : {0.0, 37.0, 37.5, 99.99}) {
      const auto ref = oracle::constant_accel({0, 0, 0}, {80, 0, 0}, {1, 0.5, 0}, t);
      const auto s = state_at(p.model, sol, t);
      CHECK((s.position - Vec3(ref.p[0], ref.p[1], ref.p[2])).norm() <= 1e-9);
      CHECK((s.velocity - Vec3(ref.v[0], ref.v[1], ref.v[2])).norm() <= 1e-9);
    }
    CHECK(state_at(p.model, sol, 500).position == sol.trajectory.back().position);
  }

  TEST_CASE("malformed problems are rejected") {
    OcpProblem p = runway_problem();
    p.zones = {{Vec3::Zero(), Vec3::Zero(), -1.0, 1}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = runway_problem();
    p.grid.integration_steps = 10;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = runway_problem();
    p.t_min = 700;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = runway_problem();
    p.model.v_min = 200;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}
