#include "fuzzclear/clearance_rules.hpp"

#include <cmath>
#include <stdexcept>

namespace fuzzclear {

using MF = MembershipFunction;

std::string_view to_string(ObstacleType t) {
  return t == ObstacleType::AirVehicle ? "air_vehicle" : "bird";
}

ObstacleType parse_obstacle_type(std::string_view s) {
  if (s == "air_vehicle") return ObstacleType::AirVehicle;
  if (s == "bird") return ObstacleType::Bird;
  throw std::invalid_argument("unknown obstacle type '" + std::string(s) +
                              "' (expected air_vehicle or bird)");
}

Vec3 relative_position(const Vec3& ownship, const Vec3& object) { return object - ownship; }

double distance(const Vec3& rp) { return rp.norm(); }

std::optional<double> closing_rate(const Vec3& rp, const Vec3& rv, double d) {
  if (!(d > 0.0)) return std::nullopt;
  return rp.dot(rv) / d;
}

double flock_radius_bound(int n_targets, double segregation, double density) {
  if (n_targets < 1) throw std::invalid_argument("flock_radius_bound: n_targets must be >= 1");
  if (!(segregation > 0.0)) throw std::invalid_argument("flock_radius_bound: segregation must be > 0");
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("flock_radius_bound: density must lie in (0, 1]");
  }
  return 0.5 * segregation * std::cbrt(static_cast<double>(n_targets) / density);
}

double type_input(ObstacleType t) { return t == ObstacleType::AirVehicle ? 0.0 : 1.0; }

TskSystem make_radius_subsystem() {
  InputVariable type{"type", 0.0, 1.0,
                     {{"air_vehicle", MF::crisp_below(0.5)}, {"bird", MF::crisp_at_or_above(0.5)}}};
  InputVariable size{"size", 0.0, 300.0,
                     {{"small", MF::trapezoid(0, 0, 25, 75)},
                      {"medium", MF::triangle(25, 100, 175)},
                      {"large", MF::trapezoid(100, 200, 300, 300)}}};
  const double sep = SeparationConstants::kHorizontalSeparation;
  std::vector<TskRule> rules{
      {"air_vehicle", std::nullopt, Consequent::constant(sep)},
      {"bird", "small", {100.0, 0.0, 2.5, 0.0}},
      {"bird", "medium", {200.0, 0.0, 2.5, 0.0}},
      {"bird", "large", {300.0, 0.0, 2.5, 0.0}},
  };
  return {"radius", std::move(type), std::move(size), std::move(rules), 0.0, 6000.0};
}

TskSystem make_urgency_subsystem() {
  // Consequents read distance in km and closing rate in units of 100 m/s.
  InputVariable dist{"distance", 0.0, 6000.0,
                     {{"small", MF::trapezoid(0, 0, 500, 1500)},
                      {"medium", MF::triangle(500, 2000, 4000)},
                      {"large", MF::trapezoid(2000, 4500, 6000, 6000)}},
                     1000.0};
  InputVariable cr{"closing_rate", -300.0, 300.0,
                   {{"closing_fast", MF::trapezoid(-300, -300, -150, -90)},
                    {"closing_medium", MF::triangle(-120, -75, -30)},
                    {"closing_slow", MF::triangle(-60, -25, 5)},
                    {"further", MF::trapezoid(0, 20, 300, 300)}},
                   100.0};
  std::vector<TskRule> rules{
      {"large", "further", Consequent::constant(0.0)},
      {"large", "closing_slow", Consequent::constant(0.5)},
      {"large", "closing_medium", Consequent::constant(0.5)},
      {"large", "closing_fast", Consequent::constant(2.0)},
      {"medium", "further", {0.0, 0.5, 0.0, 0.0}},
      {"medium", "closing_slow", {2.0, 0.5, 0.0, 0.0}},
      {"medium", "closing_medium", {3.0, 0.5, 0.0, 0.0}},
      {"medium", "closing_fast", {4.0, 0.5, 0.0, 0.0}},
      {"small", "further", {1.5, 0.0, 0.0, 0.1}},
      {"small", "closing_slow", {4.0, 0.0, -2.5, 0.1}},
      {"small", "closing_medium", {4.5, 0.0, -3.0, 0.1}},
      {"small", "closing_fast", {5.0, 0.0, -5.0, 0.1}},
  };
  return {"urgency", std::move(dist), std::move(cr), std::move(rules), 0.0, 5.0};
}

TskSystem make_activation_subsystem() {
  InputVariable radius{"radius", 0.0, 6000.0,
                       {{"small", MF::trapezoid(0, 0, 200, 600)},
                        {"medium", MF::triangle(300, 1000, 3000)},
                        {"large", MF::trapezoid(1500, 4000, 6000, 6000)}}};
  InputVariable urgency{"urgency", 0.0, 5.0,
                        {{"low", MF::trapezoid(0, 0, 1, 2)},
                         {"medium", MF::triangle(1, 2.5, 4)},
                         {"high", MF::trapezoid(2.5, 4, 5, 5)}}};
  auto c = Consequent::constant;
  std::vector<TskRule> rules{
      {"small", "low", c(0)},    {"small", "medium", c(0)},  {"small", "high", c(1)},
      {"medium", "low", c(0)},   {"medium", "medium", c(1)}, {"medium", "high", c(1)},
      {"large", "low", c(0)},    {"large", "medium", c(1)},  {"large", "high", c(1)},
  };
  return {"activation", std::move(radius), std::move(urgency), std::move(rules), 0.0, 1.0};
}

ClearanceRules::ClearanceRules()
    : ClearanceRules(make_radius_subsystem(), make_urgency_subsystem(),
                     make_activation_subsystem()) {}

ClearanceRules::ClearanceRules(TskSystem radius, TskSystem urgency, TskSystem activation)
    : radius_(std::move(radius)), urgency_(std::move(urgency)), activation_(std::move(activation)) {}

double ClearanceRules::radius(ObstacleType type, double size) const {
  return radius_.infer(type_input(type), size);
}

double ClearanceRules::urgency(double d, double cr) const { return urgency_.infer(d, cr); }

double ClearanceRules::activation(double r, double u) const { return activation_.infer(r, u); }

ClearanceDecision ClearanceRules::classify(int id, ObstacleType type, double size, double d,
                                           double cr) const {
  ClearanceDecision out;
  out.obstacle_id = id;
  out.distance = d;
  out.closing_rate = cr;
  out.radius = radius(type, size);
  out.urgency = urgency(d, cr);
  out.activation_level = activation(out.radius, out.urgency);
  out.visible = d <= SeparationConstants::kRadarRange;
  out.active = out.visible && out.activation_level >= kActivationThreshold;
  return out;
}

ClearanceDecision ClearanceRules::decide(const ObstacleObservation& obs,
                                         const OwnshipState& own) const {
  const Vec3 rp = relative_position(own.position, obs.position);
  const Vec3 rv = obs.velocity - own.velocity;
  const double d = distance(rp);
  // Coincident positions: treat as maximal closure.
  const double cr = closing_rate(rp, rv, d).value_or(-rv.norm());
  return classify(obs.id, obs.type, obs.size, d, cr);
}

ClearanceRules ClearanceRules::with_membership(const std::string& subsystem,
                                               const std::string& variable,
                                               const std::string& label,
                                               const MembershipFunction& mf) const {
  ClearanceRules copy = *this;
  if (subsystem == "radius") {
    copy.radius_ = radius_.with_membership(variable, label, mf);
  } else if (subsystem == "urgency") {
    copy.urgency_ = urgency_.with_membership(variable, label, mf);
  } else if (subsystem == "activation") {
    copy.activation_ = activation_.with_membership(variable, label, mf);
  } else {
    throw std::out_of_range("unknown fuzzy subsystem '" + subsystem + "'");
  }
  return copy;
}

namespace {
const ClearanceRules& default_rules() {
  static const ClearanceRules rules;
  return rules;
}
}  // namespace

double radius_subsystem(ObstacleType type, double size) { return default_rules().radius(type, size); }
double urgency_subsystem(double d, double cr) { return default_rules().urgency(d, cr); }
double activation_subsystem(double r, double u) { return default_rules().activation(r, u); }
ClearanceDecision decide(const ObstacleObservation& obs, const OwnshipState& own) {
  return default_rules().decide(obs, own);
}

}  // namespace fuzzclear
