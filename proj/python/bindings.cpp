#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fuzzclear/cli.hpp"
#include "fuzzclear/scenario.hpp"

namespace py = pybind11;
using namespace fuzzclear;

namespace {

Eigen::MatrixXd positions(const Trajectory& traj) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(traj.size()), 6);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    m.row(r).head<3>() = traj[k].position.transpose();
    m.row(r).tail<3>() = traj[k].velocity.transpose();
  }
  return m;
}

Eigen::MatrixXd nodes(const ControlNodes& u) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(u.size()), 3);
  for (std::size_t j = 0; j < u.size(); ++j) m.row(static_cast<Eigen::Index>(j)) = u[j].transpose();
  return m;
}

ControlNodes to_nodes(const Eigen::MatrixXd& m) {
  if (m.cols() != 3) throw std::invalid_argument("controls must have shape (n, 3)");
  ControlNodes u;
  for (Eigen::Index j = 0; j < m.rows(); ++j) u.push_back(m.row(j).transpose());
  return u;
}

py::dict cost_dict(const CostBreakdown& c) {
  py::dict d;
  d["time"] = c.time;
  d["obstacle"] = c.obstacle;
  d["terminal"] = c.terminal;
  d["bounds"] = c.bounds;
  d["total"] = c.total;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fuzzy clearance rules, trajectory solver and replanner";

  py::enum_<ObstacleType>(m, "ObstacleType")
      .value("AIR_VEHICLE", ObstacleType::AirVehicle)
      .value("BIRD", ObstacleType::Bird);

  py::class_<OwnshipState>(m, "OwnshipState")
      .def(py::init([](const Vec3& p, const Vec3& v) { return OwnshipState{p, v}; }),
           py::arg("position"), py::arg("velocity"))
      .def_readwrite("position", &OwnshipState::position)
      .def_readwrite("velocity", &OwnshipState::velocity);

  py::class_<ObstacleObservation>(m, "Obstacle")
      .def(py::init([](int id, ObstacleType type, double size, const Vec3& p, const Vec3& v) {
             return ObstacleObservation{id, type, size, p, v};
           }),
           py::arg("id"), py::arg("type"), py::arg("size"), py::arg("position"),
           py::arg("velocity") = Vec3::Zero())
      .def_readwrite("id", &ObstacleObservation::id)
      .def_readwrite("type", &ObstacleObservation::type)
      .def_readwrite("size", &ObstacleObservation::size)
      .def_readwrite("position", &ObstacleObservation::position)
      .def_readwrite("velocity", &ObstacleObservation::velocity);

  py::class_<ClearanceDecision>(m, "ClearanceDecision")
      .def_readonly("obstacle_id", &ClearanceDecision::obstacle_id)
      .def_readonly("distance", &ClearanceDecision::distance)
      .def_readonly("closing_rate", &ClearanceDecision::closing_rate)
      .def_readonly("radius", &ClearanceDecision::radius)
      .def_readonly("urgency", &ClearanceDecision::urgency)
      .def_readonly("activation_level", &ClearanceDecision::activation_level)
      .def_readonly("active", &ClearanceDecision::active)
      .def_readonly("visible", &ClearanceDecision::visible);

  m.def("radius_subsystem", &radius_subsystem, py::arg("type"), py::arg("size"));
  m.def("urgency_subsystem", &urgency_subsystem, py::arg("distance"), py::arg("closing_rate"));
  m.def("activation_subsystem", &activation_subsystem, py::arg("radius"), py::arg("urgency"));
  m.def("flock_radius_bound", &flock_radius_bound, py::arg("n_targets"), py::arg("segregation"),
        py::arg("density"));
  m.def("decide", py::overload_cast<const ObstacleObservation&, const OwnshipState&>(&decide),
        py::arg("obstacle"), py::arg("ownship"));
  m.def(
      "classify",
      [](int id, ObstacleType type, double size, double d, double cr) {
        return ClearanceRules{}.classify(id, type, size, d, cr);
      },
      py::arg("id"), py::arg("type"), py::arg("size"), py::arg("distance"), py::arg("closing_rate"));

  py::class_<Zone>(m, "Zone")
      .def(py::init([](const Vec3& c, double r, const Vec3& v, int id) { return Zone{c, v, r, id}; }),
           py::arg("center"), py::arg("radius"), py::arg("velocity") = Vec3::Zero(),
           py::arg("obstacle_id") = -1)
      .def_readwrite("center", &Zone::center)
      .def_readwrite("velocity", &Zone::velocity)
      .def_readwrite("radius", &Zone::radius)
      .def_readwrite("obstacle_id", &Zone::obstacle_id);

  py::class_<OcpProblem>(m, "OcpProblem")
      .def(py::init([](const Vec3& p0, const Vec3& v0, const Vec3& goal, std::vector<Zone> zones,
                       double w_obstacle) {
             OcpProblem p;
             p.initial = {p0, v0};
             p.goal = goal;
             p.zones = std::move(zones);
             p.weights.obstacle = w_obstacle;
             return p;
           }),
           py::arg("position"), py::arg("velocity"), py::arg("goal"),
           py::arg("zones") = std::vector<Zone>{}, py::arg("w_obstacle") = CostWeights{}.obstacle)
      .def_readwrite("goal", &OcpProblem::goal)
      .def_readwrite("zones", &OcpProblem::zones)
      .def_readwrite("t_min", &OcpProblem::t_min)
      .def_readwrite("t_max", &OcpProblem::t_max)
      .def_property(
          "w_obstacle", [](const OcpProblem& p) { return p.weights.obstacle; },
          [](OcpProblem& p, double w) { p.weights.obstacle = w; });

  py::class_<DecisionVector>(m, "DecisionVector")
      .def(py::init([](const Eigen::MatrixXd& u, double tf) { return DecisionVector{to_nodes(u), tf}; }),
           py::arg("controls"), py::arg("t_final"))
      .def_property_readonly("controls", [](const DecisionVector& z) { return nodes(z.controls); })
      .def_readonly("t_final", &DecisionVector::t_final);

  py::class_<OcpSolution>(m, "OcpSolution")
      .def_readonly("decision", &OcpSolution::decision)
      .def_property_readonly("t_final", &OcpSolution::t_final)
      .def_property_readonly("controls", [](const OcpSolution& s) { return nodes(s.controls()); })
      .def_property_readonly("trajectory", [](const OcpSolution& s) { return positions(s.trajectory); },
                             "(n + 1, 6) array of position and velocity")
      .def_property_readonly("cost", [](const OcpSolution& s) { return cost_dict(s.cost); })
      .def_property_readonly("status", [](const OcpSolution& s) { return std::string(to_string(s.status)); })
      .def_readonly("converged", &OcpSolution::converged)
      .def_readonly("iterations", &OcpSolution::iterations)
      .def_readonly("wall_time", &OcpSolution::wall_time);

  m.def(
      "solve",
      [](const OcpProblem& p, const std::optional<DecisionVector>& warm) {
        py::gil_scoped_release release;
        return solve(p, warm);
      },
      py::arg("problem"), py::arg("warm_start") = py::none());
  m.def(
      "evaluate_cost",
      [](const OcpProblem& p, const DecisionVector& z) { return cost_dict(evaluate_cost(p, z)); },
      py::arg("problem"), py::arg("decision"));
  m.def("gradient", &gradient, py::arg("problem"), py::arg("decision"));
  m.def("min_separation", &min_separation, py::arg("solution"), py::arg("zones"));

  m.def(
      "validate_scenario",
      [](const std::string& text) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate(parse_scenario_unchecked(text))) out.emplace_back(v.code, v.message);
        return out;
      },
      py::arg("text"), "List of (code, message) violations");
  m.def(
      "normalize_scenario", [](const std::string& text) { return emit(parse_scenario(text)); },
      py::arg("text"), "Parse, validate and re-emit a scenario with defaults filled in");

  m.def(
      "simulate",
      [](const std::string& text, std::optional<int> forced_resolve_every, std::optional<int> max_ticks) {
        const ScenarioFile file = parse_scenario(text);
        SimConfig cfg = make_config(file);
        if (forced_resolve_every) cfg.forced_resolve_every = *forced_resolve_every;
        if (max_ticks) cfg.max_ticks = *max_ticks;
        SimTrace trace;
        {
          py::gil_scoped_release release;
          trace = run(file.scenario, cfg);
        }
        py::dict d;
        d["solves"] = trace.solve_count();
        d["degraded"] = trace.degraded_count();
        d["goal_miss"] = trace.goal_miss(file.scenario.goal);
        std::vector<int> resolved;
        Eigen::MatrixXd ownship(static_cast<Eigen::Index>(trace.records.size()), 6);
        for (std::size_t k = 0; k < trace.records.size(); ++k) {
          const auto& r = trace.records[k];
          if (r.resolved) resolved.push_back(r.tick);
          ownship.row(static_cast<Eigen::Index>(k)) << r.ownship.position.transpose(),
              r.ownship.velocity.transpose();
        }
        d["resolved_ticks"] = resolved;
        d["ownship"] = ownship;
        py::dict sep;
        for (const auto& [id, dist] : realized_separation(trace)) sep[py::int_(id)] = dist;
        d["realized_separation"] = sep;
        return d;
      },
      py::arg("text"), py::arg("forced_resolve_every") = py::none(), py::arg("max_ticks") = py::none());

  m.def(
      "cli_main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int rc = cli_main(args, out, err);
        return py::make_tuple(rc, out.str(), err.str());
      },
      py::arg("args"), "Run the command line; returns (exit_code, stdout, stderr)");
}
