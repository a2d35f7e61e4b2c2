#include "fuzzclear/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fuzzclear {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ScenarioError(path + ": " + what);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(path + "." + key, "unknown key");
  }
}

const json& required(const json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing required key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number, got " + std::string(j.type_name()));
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer, got " + std::string(j.type_name()));
  return j.get<int>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string, got " + std::string(j.type_name()));
  return j.get<std::string>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

ObstacleObservation parse_obstacle(const json& j, const std::string& path) {
  only_keys(j, path, {"id", "type", "size", "position", "velocity"});
  ObstacleObservation o;
  o.id = integer(required(j, path, "id"), path + ".id");
  const std::string type = string(required(j, path, "type"), path + ".type");
  try {
    o.type = parse_obstacle_type(type);
  } catch (const std::invalid_argument& e) {
    fail(path + ".type", e.what());
  }
  o.size = number(required(j, path, "size"), path + ".size");
  o.position = vec3(required(j, path, "position"), path + ".position");
  if (j.contains("velocity")) o.velocity = vec3(j["velocity"], path + ".velocity");
  return o;
}

std::vector<MfOverride> parse_mf_overrides(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  std::vector<MfOverride> out;
  ClearanceRules probe;
  for (const auto& [subsystem, vars] : j.items()) {
    const std::string p1 = path + "." + subsystem;
    if (!vars.is_object()) fail(p1, "expected an object");
    for (const auto& [variable, labels] : vars.items()) {
      const std::string p2 = p1 + "." + variable;
      if (!labels.is_object()) fail(p2, "expected an object");
      for (const auto& [label, mf_json] : labels.items()) {
        const std::string p3 = p2 + "." + label;
        only_keys(mf_json, p3, {"shape", "params"});
        const std::string shape = string(required(mf_json, p3, "shape"), p3 + ".shape");
        const json& params = required(mf_json, p3, "params");
        if (!params.is_array()) fail(p3 + ".params", "expected an array of numbers");
        std::vector<double> values;
        for (std::size_t i = 0; i < params.size(); ++i) {
          values.push_back(number(params[i], p3 + ".params[" + std::to_string(i) + "]"));
        }
        try {
          MfOverride o{subsystem, variable, label, MembershipFunction::from_params(shape, values)};
          probe = probe.with_membership(subsystem, variable, label, o.mf);
          out.push_back(std::move(o));
        } catch (const std::exception& e) {
          fail(p3, e.what());
        }
      }
    }
  }
  return out;
}

ScenarioOverrides parse_config(const json& j, const std::string& path) {
  only_keys(j, path,
            {"tick_interval", "max_ticks", "w_obstacle", "w_terminal", "n_control_nodes",
             "n_integration_steps", "t_min", "t_max", "mf_overrides"});
  ScenarioOverrides c;
  auto num = [&](const char* key, std::optional<double>& dst) {
    if (j.contains(key)) dst = number(j[key], path + "." + key);
  };
  auto whole = [&](const char* key, std::optional<int>& dst) {
    if (j.contains(key)) dst = integer(j[key], path + "." + key);
  };
  num("tick_interval", c.tick_interval);
  whole("max_ticks", c.max_ticks);
  num("w_obstacle", c.w_obstacle);
  num("w_terminal", c.w_terminal);
  whole("n_control_nodes", c.n_control_nodes);
  whole("n_integration_steps", c.n_integration_steps);
  num("t_min", c.t_min);
  num("t_max", c.t_max);
  if (j.contains("mf_overrides")) c.mf_overrides = parse_mf_overrides(j["mf_overrides"], path + ".mf_overrides");
  return c;
}

bool same_vec(const Vec3& a, const Vec3& b) { return a == b; }

}  // namespace

ValidationError::ValidationError(std::vector<Violation> v)
    : ScenarioError([&] {
        std::string msg = "scenario failed validation:";
        for (const auto& x : v) msg += "\n  " + x.code + ": " + x.message;
        return msg;
      }()),
      violations(std::move(v)) {}

bool operator==(const ScenarioFile& a, const ScenarioFile& b) {
  const auto& sa = a.scenario;
  const auto& sb = b.scenario;
  if (!same_vec(sa.ownship.position, sb.ownship.position) ||
      !same_vec(sa.ownship.velocity, sb.ownship.velocity) || !same_vec(sa.goal, sb.goal) ||
      !same_vec(a.runway_end, b.runway_end) || sa.obstacles.size() != sb.obstacles.size()) {
    return false;
  }
  for (std::size_t i = 0; i < sa.obstacles.size(); ++i) {
    const auto& x = sa.obstacles[i];
    const auto& y = sb.obstacles[i];
    if (x.id != y.id || x.type != y.type || x.size != y.size || !same_vec(x.position, y.position) ||
        !same_vec(x.velocity, y.velocity)) {
      return false;
    }
  }
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (ca.tick_interval != cb.tick_interval || ca.max_ticks != cb.max_ticks ||
      ca.w_obstacle != cb.w_obstacle || ca.w_terminal != cb.w_terminal ||
      ca.n_control_nodes != cb.n_control_nodes ||
      ca.n_integration_steps != cb.n_integration_steps || ca.t_min != cb.t_min ||
      ca.t_max != cb.t_max || ca.mf_overrides.size() != cb.mf_overrides.size()) {
    return false;
  }
  for (std::size_t i = 0; i < ca.mf_overrides.size(); ++i) {
    const auto& x = ca.mf_overrides[i];
    const auto& y = cb.mf_overrides[i];
    if (x.subsystem != y.subsystem || x.variable != y.variable || x.label != y.label ||
        x.mf.shape() != y.mf.shape() || x.mf.params() != y.mf.params()) {
      return false;
    }
  }
  return true;
}

ScenarioFile parse_scenario_unchecked(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("invalid JSON: ") + e.what());
  }
  const std::string root = "$";
  only_keys(j, root, {"ownship", "goal", "runway_end", "obstacles", "config"});

  ScenarioFile s;
  const json& own = required(j, root, "ownship");
  only_keys(own, "$.ownship", {"position", "velocity"});
  s.scenario.ownship.position = vec3(required(own, "$.ownship", "position"), "$.ownship.position");
  s.scenario.ownship.velocity = vec3(required(own, "$.ownship", "velocity"), "$.ownship.velocity");
  s.scenario.goal = vec3(required(j, root, "goal"), "$.goal");
  s.runway_end = j.contains("runway_end") ? vec3(j["runway_end"], "$.runway_end")
                                          : s.scenario.ownship.position;

  const json& obstacles = required(j, root, "obstacles");
  if (!obstacles.is_array()) fail("$.obstacles", "expected an array");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    s.scenario.obstacles.push_back(
        parse_obstacle(obstacles[i], "$.obstacles[" + std::to_string(i) + "]"));
  }
  if (j.contains("config")) s.config = parse_config(j["config"], "$.config");
  return s;
}

ScenarioFile parse_scenario(const std::string& text) {
  ScenarioFile s = parse_scenario_unchecked(text);
  auto violations = validate(s);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return s;
}

std::vector<Violation> validate(const ScenarioFile& s, const AircraftModel& model) {
  std::vector<Violation> out;
  const double speed = s.scenario.ownship.velocity.norm();
  if (speed > model.v_max) {
    std::ostringstream m;
    m << "ownship speed " << speed << " m/s exceeds vMax " << model.v_max << " m/s";
    out.push_back({"SPEED_BOUND", m.str()});
  }
  std::set<int> seen;
  for (const auto& o : s.scenario.obstacles) {
    if (!seen.insert(o.id).second) {
      out.push_back({"DUPLICATE_ID", "obstacle id " + std::to_string(o.id) + " appears more than once"});
    }
    const double d = (o.position - s.runway_end).norm();
    if (d < SeparationConstants::kRunwayEndClearance) {
      std::ostringstream m;
      m << "obstacle " << o.id << " is " << d << " m from the runway end (minimum "
        << SeparationConstants::kRunwayEndClearance << " m)";
      out.push_back({"RUNWAY_CLEARANCE", m.str()});
    }
    if (o.type == ObstacleType::Bird &&
        !(o.size >= SeparationConstants::kBirdSizeMin && o.size <= SeparationConstants::kBirdSizeMax)) {
      std::ostringstream m;
      m << "bird " << o.id << " size " << o.size << " m is outside [" << SeparationConstants::kBirdSizeMin
        << ", " << SeparationConstants::kBirdSizeMax << "] m";
      out.push_back({"BIRD_SIZE", m.str()});
    }
  }
  return out;
}

std::string emit(const ScenarioFile& s) {
  json j;
  j["ownship"] = {{"position", to_json(s.scenario.ownship.position)},
                  {"velocity", to_json(s.scenario.ownship.velocity)}};
  j["goal"] = to_json(s.scenario.goal);
  j["runway_end"] = to_json(s.runway_end);
  j["obstacles"] = json::array();
  for (const auto& o : s.scenario.obstacles) {
    j["obstacles"].push_back({{"id", o.id},
                              {"type", std::string(to_string(o.type))},
                              {"size", o.size},
                              {"position", to_json(o.position)},
                              {"velocity", to_json(o.velocity)}});
  }
  json c = json::object();
  const auto& cfg = s.config;
  if (cfg.tick_interval) c["tick_interval"] = *cfg.tick_interval;
  if (cfg.max_ticks) c["max_ticks"] = *cfg.max_ticks;
  if (cfg.w_obstacle) c["w_obstacle"] = *cfg.w_obstacle;
  if (cfg.w_terminal) c["w_terminal"] = *cfg.w_terminal;
  if (cfg.n_control_nodes) c["n_control_nodes"] = *cfg.n_control_nodes;
  if (cfg.n_integration_steps) c["n_integration_steps"] = *cfg.n_integration_steps;
  if (cfg.t_min) c["t_min"] = *cfg.t_min;
  if (cfg.t_max) c["t_max"] = *cfg.t_max;
  if (!cfg.mf_overrides.empty()) {
    json mf = json::object();
    for (const auto& o : cfg.mf_overrides) {
      mf[o.subsystem][o.variable][o.label] = {{"shape", o.mf.shape_name()}, {"params", o.mf.params()}};
    }
    c["mf_overrides"] = std::move(mf);
  }
  if (!c.empty()) j["config"] = std::move(c);
  return j.dump(2) + "\n";
}

SimConfig make_config(const ScenarioFile& s, SimConfig base) {
  const auto& c = s.config;
  if (c.tick_interval) base.tick_interval = *c.tick_interval;
  if (c.max_ticks) base.max_ticks = *c.max_ticks;
  if (c.w_obstacle) base.weights.obstacle = *c.w_obstacle;
  if (c.w_terminal) base.weights.terminal = *c.w_terminal;
  if (c.n_control_nodes) base.grid.control_nodes = *c.n_control_nodes;
  if (c.n_integration_steps) base.grid.integration_steps = *c.n_integration_steps;
  if (c.t_min) base.t_min = *c.t_min;
  if (c.t_max) base.t_max = *c.t_max;
  for (const auto& o : c.mf_overrides) {
    base.rules = base.rules.with_membership(o.subsystem, o.variable, o.label, o.mf);
  }
  base.validate();
  return base;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fuzzclear
