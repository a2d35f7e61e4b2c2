#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuzzclear/replanner.hpp"

namespace fuzzclear {

struct MfOverride {
  std::string subsystem;
  std::string variable;
  std::string label;
  MembershipFunction mf;
};

struct ScenarioOverrides {
  std::optional<double> tick_interval;
  std::optional<int> max_ticks;
  std::optional<double> w_obstacle;
  std::optional<double> w_terminal;
  std::optional<int> n_control_nodes;
  std::optional<int> n_integration_steps;
  std::optional<double> t_min;
  std::optional<double> t_max;
  std::vector<MfOverride> mf_overrides;
};

struct ScenarioFile {
  Scenario scenario;
  Vec3 runway_end = Vec3::Zero();
  ScenarioOverrides config;
};

bool operator==(const ScenarioFile& a, const ScenarioFile& b);

/// Malformed input: bad JSON, unknown or missing keys, wrong types. The
/// message names the JSON path.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Violation {
  std::string code;  // RUNWAY_CLEARANCE, SPEED_BOUND, BIRD_SIZE, DUPLICATE_ID
  std::string message;
};

class ValidationError : public ScenarioError {
 public:
  explicit ValidationError(std::vector<Violation> v);
  std::vector<Violation> violations;
};

/// Schema checks only. `runway_end` defaults to the ownship position.
ScenarioFile parse_scenario_unchecked(const std::string& text);

/// Schema checks plus validate(); throws ValidationError on any violation.
ScenarioFile parse_scenario(const std::string& text);

std::vector<Violation> validate(const ScenarioFile& s,
                                const AircraftModel& model = AircraftModel{});

/// JSON text that parses back to an equal ScenarioFile.
std::string emit(const ScenarioFile& s);

/// `base` with the file's overrides applied, including membership functions.
SimConfig make_config(const ScenarioFile& s, SimConfig base = SimConfig{});

std::string read_file(const std::string& path);

}  // namespace fuzzclear
