#include "fuzzclear/replanner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fuzzclear {

void SimConfig::validate() const {
  if (!(tick_interval > 0.0)) throw std::invalid_argument("tick_interval must be > 0");
  if (!(radius_change_tolerance >= 0.0)) {
    throw std::invalid_argument("radius_change_tolerance must be >= 0");
  }
  if (forced_resolve_every < 0) throw std::invalid_argument("forced_resolve_every must be >= 0");
  if (max_ticks < 1) throw std::invalid_argument("max_ticks must be >= 1");
}

ActiveSet ActiveSet::from(const std::vector<ClearanceDecision>& decisions) {
  ActiveSet out;
  for (const auto& d : decisions) {
    if (d.active && d.visible) out.members[d.obstacle_id] = d.radius;
  }
  return out;
}

int SimTrace::solve_count() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [](const TickRecord& r) { return r.resolved; }));
}

int SimTrace::degraded_count() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [](const TickRecord& r) { return r.degraded; }));
}

std::vector<ObstacleObservation> propagate_obstacles(const std::vector<ObstacleObservation>& obstacles,
                                                     double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("propagate_obstacles: dt must be >= 0");
  std::vector<ObstacleObservation> out = obstacles;
  for (auto& o : out) o.position += o.velocity * dt;
  return out;
}

bool needs_resolve(const ActiveSet& previous, const ActiveSet& current, const SimConfig& config,
                   int tick_index) {
  if (config.forced_resolve_every > 0 && tick_index % config.forced_resolve_every == 0) return true;
  if (previous.members.size() != current.members.size()) return true;
  for (const auto& [id, r_now] : current.members) {
    const auto it = previous.members.find(id);
    if (it == previous.members.end()) return true;
    const double r_before = it->second;
    const double scale = std::max(std::abs(r_before), std::numeric_limits<double>::min());
    if (std::abs(r_now - r_before) / scale > config.radius_change_tolerance) return true;
  }
  return false;
}

std::vector<Zone> zones_for(const std::vector<ObstacleObservation>& obstacles,
                            const ActiveSet& active) {
  std::vector<Zone> zones;
  for (const auto& o : obstacles) {
    const auto it = active.members.find(o.id);
    if (it == active.members.end()) continue;
    zones.push_back({o.position, o.velocity, it->second, o.id});
  }
  return zones;
}

OcpProblem make_problem(const SimConfig& config, const OwnshipState& initial, const Vec3& goal,
                        std::vector<Zone> zones) {
  OcpProblem p;
  p.model = config.model;
  p.initial = initial;
  p.goal = goal;
  p.zones = std::move(zones);
  p.weights = config.weights;
  p.t_min = config.t_min;
  p.t_max = config.t_max;
  p.grid = config.grid;
  return p;
}

namespace {

std::vector<ClearanceDecision> classify_all(const SimConfig& config,
                                            const std::vector<ObstacleObservation>& obstacles,
                                            const OwnshipState& own) {
  std::vector<ClearanceDecision> out;
  out.reserve(obstacles.size());
  for (const auto& o : obstacles) out.push_back(config.rules.decide(o, own));
  return out;
}

std::vector<int> ids_of(const std::vector<Zone>& zones) {
  std::vector<int> ids;
  for (const auto& z : zones) ids.push_back(z.obstacle_id);
  return ids;
}

}  // namespace

std::pair<SimState, TickRecord> start(const Scenario& scenario, const SimConfig& config) {
  config.validate();
  SimState s;
  s.ownship = scenario.ownship;
  s.obstacles = scenario.obstacles;

  TickRecord rec;
  rec.ownship = s.ownship;
  rec.obstacles = s.obstacles;
  rec.decisions = classify_all(config, s.obstacles, s.ownship);
  s.active = ActiveSet::from(rec.decisions);

  auto zones = zones_for(s.obstacles, s.active);
  rec.constraint_ids = ids_of(zones);
  const OcpProblem problem = make_problem(config, s.ownship, scenario.goal, std::move(zones));
  s.plan = solve(problem, std::nullopt, config.solver);
  if (s.plan.failed()) {
    throw std::runtime_error("initial solve failed: " + s.plan.diagnostic);
  }
  rec.gate_open = true;
  rec.resolved = true;
  rec.solver_wall_time = s.plan.wall_time;
  rec.solver_iterations = s.plan.iterations;
  rec.cost = s.plan.cost;
  return {std::move(s), std::move(rec)};
}

TickRecord step(SimState& s, const Vec3& goal, const SimConfig& config) {
  const double dt = config.tick_interval;
  ++s.tick;
  s.time = s.tick * dt;

  // The plan ends at its final time; after that the ownship holds there.
  const double along = s.time - s.plan_start;
  if (along >= s.plan.t_final()) s.arrived = true;
  s.ownship = state_at(config.model, s.plan, along);
  s.obstacles = propagate_obstacles(s.obstacles, dt);

  TickRecord rec;
  rec.tick = s.tick;
  rec.time = s.time;
  rec.ownship = s.ownship;
  rec.obstacles = s.obstacles;
  rec.decisions = classify_all(config, s.obstacles, s.ownship);
  const ActiveSet current = ActiveSet::from(rec.decisions);
  rec.gate_open = needs_resolve(s.active, current, config, s.tick);

  if (rec.gate_open && !s.arrived) {
    auto zones = zones_for(s.obstacles, current);
    rec.constraint_ids = ids_of(zones);
    SimConfig local = config;
    // Close to the goal the remaining flight is shorter than both the
    // configured minimum and a tick.
    local.t_min = std::min(config.t_min, 0.01 * dt);
    const OcpProblem problem = make_problem(local, s.ownship, goal, std::move(zones));
    const DecisionVector warm = time_shift(s.plan.decision, along, local.t_min);
    OcpSolution next;
    try {
      next = solve(problem, warm, config.solver);
    } catch (const std::exception& e) {
      next.status = SolveStatus::Failed;
      next.diagnostic = e.what();
    }
    rec.solver_wall_time = next.wall_time;
    rec.solver_iterations = next.iterations;
    if (next.failed()) {
      rec.degraded = true;
    } else {
      rec.resolved = true;
      s.plan = std::move(next);
      s.plan_start = s.time;
      s.active = current;
    }
  }
  rec.cost = s.plan.cost;
  return rec;
}

SimTrace run(const Scenario& scenario, const SimConfig& config) {
  auto [state, first] = start(scenario, config);
  SimTrace trace;
  trace.records.reserve(static_cast<std::size_t>(config.max_ticks));
  trace.records.push_back(std::move(first));
  trace.plans.push_back(state.plan);
  for (int k = 1; k < config.max_ticks; ++k) {
    trace.records.push_back(step(state, scenario.goal, config));
    if (trace.records.back().resolved) trace.plans.push_back(state.plan);
  }
  return trace;
}

std::map<int, double> realized_separation(const SimTrace& trace) {
  std::map<int, double> out;
  const auto& recs = trace.records;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    for (std::size_t i = 0; i < recs[k].obstacles.size(); ++i) {
      const auto& o = recs[k].obstacles[i];
      const Vec3 r1 = o.position - recs[k].ownship.position;
      double d = r1.norm();
      if (k > 0) {
        // Closest approach on the straight relative segment since last tick.
        const Vec3 r0 = recs[k - 1].obstacles[i].position - recs[k - 1].ownship.position;
        const Vec3 dr = r1 - r0;
        const double len2 = dr.squaredNorm();
        const double u = len2 > 0.0 ? std::clamp(-r0.dot(dr) / len2, 0.0, 1.0) : 0.0;
        d = std::min(d, (r0 + u * dr).norm());
      }
      auto [it, inserted] = out.emplace(o.id, d);
      if (!inserted) it->second = std::min(it->second, d);
    }
  }
  return out;
}

}  // namespace fuzzclear
