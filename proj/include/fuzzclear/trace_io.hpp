#pragma once

// Comma-separated trace tables with a single header row. Doubles are written
// in shortest round-trip form; booleans as 0/1.

#include <ostream>
#include <string>

#include "fuzzclear/replanner.hpp"

namespace fuzzclear {

inline constexpr const char* kTrajectoryHeader = "t,x,y,z,vx,vy,vz";
inline constexpr const char* kCostHeader =
    "tick,time_cost,obstacle_penalty,terminal_penalty,bounds_penalty,total,resolved,solver_wall_time";
inline constexpr const char* kActivationHeader =
    "tick,obstacle_id,distance,closing_rate,radius,urgency,activation_level,active,visible";

std::string format_double(double x);

/// Planned trajectory samples of a single solve.
void write_trajectory(std::ostream& out, const OcpSolution& solution);
/// Realized ownship states, one row per tick.
void write_trajectory(std::ostream& out, const SimTrace& trace);
void write_cost(std::ostream& out, const SimTrace& trace);
void write_activation(std::ostream& out, const SimTrace& trace);

/// One activation-table row (no header, no newline).
std::string activation_row(int tick, const ClearanceDecision& d);

}  // namespace fuzzclear
