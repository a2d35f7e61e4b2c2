#pragma once

// Receding-horizon loop around the fuzzy clearance rules and the trajectory
// solver. Each tick advances the ownship along the current plan, moves the
// obstacles, classifies them, and re-solves only when the set of active
// clearance zones changes.

#include <map>
#include <optional>
#include <vector>

#include "fuzzclear/clearance_rules.hpp"
#include "fuzzclear/ocp_solver.hpp"

namespace fuzzclear {

struct Scenario {
  OwnshipState ownship;
  Vec3 goal = Vec3::Zero();
  std::vector<ObstacleObservation> obstacles;
};

struct SimConfig {
  double tick_interval = 1.0;            // s
  double radius_change_tolerance = 0.01;  // relative
  int forced_resolve_every = 0;           // ticks; 0 disables
  int max_ticks = 150;

  AircraftModel model;
  CostWeights weights;
  Discretization grid;
  double t_min = 60.0;
  double t_max = 600.0;
  SolverOptions solver;
  ClearanceRules rules;

  void validate() const;
};

/// Active clearance zones keyed by obstacle id, valued by radius.
struct ActiveSet {
  std::map<int, double> members;

  static ActiveSet from(const std::vector<ClearanceDecision>& decisions);
  bool contains(int id) const { return members.count(id) != 0; }
  std::size_t size() const { return members.size(); }
};

struct TickRecord {
  int tick = 0;
  double time = 0.0;
  OwnshipState ownship;
  std::vector<ObstacleObservation> obstacles;  // positions at this tick
  std::vector<ClearanceDecision> decisions;    // same order as obstacles
  CostBreakdown cost;                          // of the plan in force after the tick
  bool gate_open = false;
  bool resolved = false;
  bool degraded = false;
  double solver_wall_time = 0.0;
  int solver_iterations = 0;
  std::vector<int> constraint_ids;  // zones handed to the solver this tick
};

struct SimTrace {
  std::vector<TickRecord> records;
  std::vector<OcpSolution> plans;  // every plan adopted, in order

  int solve_count() const;
  int degraded_count() const;
  const TickRecord& final() const { return records.back(); }
  double goal_miss(const Vec3& goal) const { return (final().ownship.position - goal).norm(); }
};

std::vector<ObstacleObservation> propagate_obstacles(const std::vector<ObstacleObservation>& obstacles,
                                                     double dt);

bool needs_resolve(const ActiveSet& previous, const ActiveSet& current, const SimConfig& config,
                   int tick_index);

/// Zones for the solver built from the obstacles that are currently active.
std::vector<Zone> zones_for(const std::vector<ObstacleObservation>& obstacles,
                            const ActiveSet& active);

OcpProblem make_problem(const SimConfig& config, const OwnshipState& initial, const Vec3& goal,
                        std::vector<Zone> zones);

/// Mutable loop state carried between ticks.
struct SimState {
  int tick = 0;
  double time = 0.0;
  OwnshipState ownship;
  std::vector<ObstacleObservation> obstacles;
  ActiveSet active;           // set the current plan was solved against
  OcpSolution plan;
  double plan_start = 0.0;    // sim time of the plan's initial state
  bool arrived = false;
};

/// Initial classification and solve at t = 0. Throws std::runtime_error if
/// the solver fails.
std::pair<SimState, TickRecord> start(const Scenario& scenario, const SimConfig& config);

/// One tick of the loop. A re-solve plan takes effect from the next tick.
TickRecord step(SimState& state, const Vec3& goal, const SimConfig& config);

/// Tick 0 plus max_ticks - 1 steps, so the trace holds max_ticks records.
SimTrace run(const Scenario& scenario, const SimConfig& config);

/// Smallest ownship-obstacle distance over the run, keyed by obstacle id.
/// Between ticks both are taken to move in straight lines.
std::map<int, double> realized_separation(const SimTrace& trace);

}  // namespace fuzzclear
