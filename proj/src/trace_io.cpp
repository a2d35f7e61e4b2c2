#include "fuzzclear/trace_io.hpp"

#include <array>
#include <charconv>

namespace fuzzclear {

std::string format_double(double x) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace {

void state_row(std::ostream& out, double t, const AircraftState& s) {
  out << format_double(t);
  for (int i = 0; i < 3; ++i) out << ',' << format_double(s.position(i));
  for (int i = 0; i < 3; ++i) out << ',' << format_double(s.velocity(i));
  out << '\n';
}

}  // namespace

void write_trajectory(std::ostream& out, const OcpSolution& solution) {
  out << kTrajectoryHeader << '\n';
  const auto& traj = solution.trajectory;
  const int n = static_cast<int>(traj.size()) - 1;
  for (int k = 0; k <= n; ++k) {
    state_row(out, n > 0 ? solution.t_final() * k / n : 0.0, traj[static_cast<std::size_t>(k)]);
  }
}

void write_trajectory(std::ostream& out, const SimTrace& trace) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : trace.records) state_row(out, r.time, r.ownship);
}

void write_cost(std::ostream& out, const SimTrace& trace) {
  out << kCostHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.tick << ',' << format_double(r.cost.time) << ',' << format_double(r.cost.obstacle) << ','
        << format_double(r.cost.terminal) << ',' << format_double(r.cost.bounds) << ','
        << format_double(r.cost.total) << ',' << (r.resolved ? 1 : 0) << ','
        << format_double(r.solver_wall_time) << '\n';
  }
}

std::string activation_row(int tick, const ClearanceDecision& d) {
  std::string row = std::to_string(tick) + ',' + std::to_string(d.obstacle_id);
  for (double v : {d.distance, d.closing_rate, d.radius, d.urgency, d.activation_level}) {
    row += ',' + format_double(v);
  }
  row += d.active ? ",1" : ",0";
  row += d.visible ? ",1" : ",0";
  return row;
}

void write_activation(std::ostream& out, const SimTrace& trace) {
  out << kActivationHeader << '\n';
  for (const auto& r : trace.records) {
    for (const auto& d : r.decisions) out << activation_row(r.tick, d) << '\n';
  }
}

}  // namespace fuzzclear
