#pragma once

// Minimum-time trajectory planning for a point-mass aircraft with soft
// spherical keep-out zones.
//
// Transcription is direct single shooting: the decision vector holds the
// acceleration at nControlNodes evenly spaced nodes (linearly interpolated,
// radially clamped to |a| <= aMax) plus the final time. States come from a
// fixed-step RK4 integration, so the dynamics hold by construction and every
// other requirement is a penalty:
//
//   J = tF
//     + wObstacle * sum_zones sum_k dt * max(0, R - |p_k - c(t_k)|)^2
//     + wTerminal * |p(tF) - goal|^2
//     + wBounds   * sum_k dt * (speed and vertical-rate hinges)^2
//
// Zone centers move at constant velocity over the horizon.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fuzzclear/clearance_rules.hpp"

namespace fuzzclear {

using AircraftState = OwnshipState;
using Trajectory = std::vector<AircraftState>;
using ControlNodes = std::vector<Vec3>;

struct AircraftModel {
  double a_max = 5.0;             // m/s^2
  double v_max = 120.0;           // m/s
  double v_min = 40.0;            // m/s
  double climb_rate_max = 15.0;   // m/s, applied to |vz|

  void validate() const;
};

struct Zone {
  Vec3 center = Vec3::Zero();    // at the start of the horizon
  Vec3 velocity = Vec3::Zero();
  double radius = 0.0;
  int obstacle_id = -1;

  Vec3 center_at(double t) const { return center + velocity * t; }
};

struct CostWeights {
  static constexpr double kVirtualHard = 1e6;

  double obstacle = 1e3;
  double terminal = 1e2;
  double bounds = 1e2;
};

struct Discretization {
  int control_nodes = 25;
  int integration_steps = 100;
};

struct OcpProblem {
  AircraftModel model;
  AircraftState initial;
  Vec3 goal = Vec3::Zero();
  std::vector<Zone> zones;
  CostWeights weights;
  double t_min = 60.0;
  double t_max = 600.0;
  Discretization grid;

  /// Throws std::invalid_argument on a malformed problem.
  void validate() const;
};

struct CostBreakdown {
  double time = 0.0;
  double obstacle = 0.0;
  double terminal = 0.0;
  double bounds = 0.0;
  double total = 0.0;
};

struct DecisionVector {
  ControlNodes controls;
  double t_final = 0.0;

  Eigen::VectorXd flatten() const;
  static DecisionVector unflatten(const Eigen::VectorXd& z);
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interpolated, clamped control at normalized time s in [0, 1].
Vec3 control_at(const ControlNodes& nodes, double s, double a_max);

/// nSteps + 1 states at times k tF / nSteps. Throws DivergenceError if a
/// state becomes non-finite.
Trajectory integrate(const AircraftModel& model, const AircraftState& initial,
                     const ControlNodes& controls, double t_final, int n_steps);

/// tF is projected into [t_min, t_max] before evaluation.
CostBreakdown evaluate_cost(const OcpProblem& problem, const DecisionVector& z);
CostBreakdown evaluate_cost(const OcpProblem& problem, const DecisionVector& z,
                            const Trajectory& trajectory);

/// Exact gradient of the total cost (discrete adjoint of the RK4 recursion),
/// in flatten() order.
Eigen::VectorXd gradient(const OcpProblem& problem, const DecisionVector& z);

/// Central finite differences with step rel_step * (1 + |z_j|).
Eigen::VectorXd gradient_fd(const OcpProblem& problem, const DecisionVector& z,
                            double rel_step = 1e-6);

DecisionVector cold_start(const OcpProblem& problem);

/// Receding-horizon reuse: drops the first `elapsed` seconds of the plan and
/// resamples the remaining control profile on a fresh node grid.
DecisionVector time_shift(const DecisionVector& z, double elapsed, double t_floor);

struct SolverOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-4;  // relative to 1 + |J|
  double stall_tolerance = 1e-8;     // relative to 1 + |J|
  int stall_window = 5;
  int max_backtracks = 60;
  double armijo = 1e-4;
  // Levenberg-Marquardt damping added to the step model.
  double initial_damping = 1e-3;
  // A warm start is presumed near a minimizer and begins conservatively.
  double warm_start_damping = 1e4;
  double min_damping = 1e-9;
  double max_damping = 1e10;
  int model_iterations = 30;
  // Weight of the node-bound hinges inside the step model (not the cost).
  double bound_model_weight = 1e6;
};

enum class SolveStatus { Converged, Stalled, MaxIterations, LineSearchFailure, Failed };

std::string_view to_string(SolveStatus s);

struct OcpSolution {
  DecisionVector decision;
  Trajectory trajectory;
  CostBreakdown cost;
  SolveStatus status = SolveStatus::Failed;
  bool converged = false;
  int iterations = 0;
  double wall_time = 0.0;  // s
  std::string diagnostic;

  const ControlNodes& controls() const { return decision.controls; }
  double t_final() const { return decision.t_final; }
  bool failed() const { return status == SolveStatus::Failed; }
};

/// Damped Gauss-Newton on a hinge-aware piecewise-quadratic model of the
/// penalties, with Armijo backtracking and projection of tF into
/// [t_min, t_max] and of every node into the aMax ball. Stops on a small
/// free gradient, on a stalled cost over `stall_window` iterations, or at
/// `max_iterations`. Both of the first two count as converged.
/// Never throws for numerical trouble: divergence yields status Failed.
OcpSolution solve(const OcpProblem& problem,
                  const std::optional<DecisionVector>& warm_start = std::nullopt,
                  const SolverOptions& options = {});

/// Per-zone minimum distance between the trajectory samples and the zone
/// center propagated to each sample's time.
std::vector<double> min_separation(const OcpSolution& solution, const std::vector<Zone>& zones);

/// State along the plan at time t (clamped to [0, tF]).
AircraftState state_at(const AircraftModel& model, const OcpSolution& solution, double t);

}  // namespace fuzzclear
