#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "fuzzclear/fuzzy_engine.hpp"

namespace fuzzclear {

using Vec3 = Eigen::Vector3d;

/// Separation figures from ATS surveillance minima and avian-radar limits.
/// Vertical minima are carried for reference; constraint zones are spheres.
struct SeparationConstants {
  static constexpr double kHorizontalSeparation = 5556.0;  // 3 NM, m
  static constexpr double kRadarRange = 6000.0;            // m
  static constexpr double kRunwayEndClearance = 1000.0;    // m
  static constexpr double kVerticalSepLow = 300.0;         // m, up to FL410
  static constexpr double kVerticalSepHigh = 600.0;        // m, above FL410
  static constexpr double kKeplerDensity = 0.7405;         // pi / (3 sqrt 2)
  static constexpr int kRadarTargetCapacity = 1000;
  static constexpr double kRadarSegregation = 50.0;        // m
  static constexpr double kBirdSizeMin = 1.0;              // m
  static constexpr double kBirdSizeMax = 277.0;            // m
};

enum class ObstacleType { AirVehicle, Bird };

std::string_view to_string(ObstacleType t);
/// Accepts "air_vehicle" or "bird"; throws std::invalid_argument otherwise.
ObstacleType parse_obstacle_type(std::string_view s);

struct ObstacleObservation {
  int id = 0;
  ObstacleType type = ObstacleType::AirVehicle;
  double size = 1.0;  // bounding radius of the object or flock, m
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct OwnshipState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct ClearanceDecision {
  int obstacle_id = 0;
  double distance = 0.0;      // m
  double closing_rate = 0.0;  // m/s, negative when closing
  double radius = 0.0;        // m
  double urgency = 0.0;       // [0, 5]
  double activation_level = 0.0;
  bool active = false;
  bool visible = false;
};

inline constexpr double kActivationThreshold = 0.5;

Vec3 relative_position(const Vec3& ownship, const Vec3& object);
double distance(const Vec3& relative_position);
/// Range rate (R_P . R_V) / D. Empty when D == 0 (degenerate geometry).
std::optional<double> closing_rate(const Vec3& relative_position, const Vec3& relative_velocity,
                                   double distance);

/// Radius of a ball holding n_targets resolvable targets at the given
/// segregation and packing density: (segregation / 2) (n / density)^(1/3).
double flock_radius_bound(int n_targets, double segregation, double density);

/// Type is encoded as a crisp input: 0 = air vehicle, 1 = bird.
double type_input(ObstacleType t);

TskSystem make_radius_subsystem();
TskSystem make_urgency_subsystem();
TskSystem make_activation_subsystem();

/// The three-stage clearance rule base. Immutable; copies are cheap enough
/// to hand one per thread.
class ClearanceRules {
 public:
  ClearanceRules();
  ClearanceRules(TskSystem radius, TskSystem urgency, TskSystem activation);

  double radius(ObstacleType type, double size) const;
  double urgency(double distance, double closing_rate) const;
  double activation(double radius, double urgency) const;

  /// Full pipeline from raw geometry.
  ClearanceDecision decide(const ObstacleObservation& obs, const OwnshipState& own) const;

  /// Pipeline from already-reduced range and range rate.
  ClearanceDecision classify(int id, ObstacleType type, double size, double distance,
                             double closing_rate) const;

  /// Copy with one membership function replaced. `subsystem` is one of
  /// "radius", "urgency", "activation".
  ClearanceRules with_membership(const std::string& subsystem, const std::string& variable,
                                 const std::string& label, const MembershipFunction& mf) const;

  const TskSystem& radius_system() const { return radius_; }
  const TskSystem& urgency_system() const { return urgency_; }
  const TskSystem& activation_system() const { return activation_; }

 private:
  TskSystem radius_;
  TskSystem urgency_;
  TskSystem activation_;
};

double radius_subsystem(ObstacleType type, double size);
double urgency_subsystem(double distance, double closing_rate);
double activation_subsystem(double radius, double urgency);
ClearanceDecision decide(const ObstacleObservation& obs, const OwnshipState& own);

}  // namespace fuzzclear
