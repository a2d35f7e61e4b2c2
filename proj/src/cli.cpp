#include "fuzzclear/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "fuzzclear/scenario.hpp"
#include "fuzzclear/trace_io.hpp"

namespace fuzzclear {

namespace fs = std::filesystem;

std::string resolve_scenario_path(const std::string& name) {
  for (const fs::path& p : {fs::path(name), fs::path(name + ".json"),
                           fs::path("scenarios") / (name + ".json")}) {
    std::error_code ec;
    if (fs::is_regular_file(p, ec)) return p.string();
  }
  return name;
}

namespace {

struct Options {
  std::string scenario;
  std::string out_dir = ".";
  std::optional<double> w_obstacle;
  std::optional<int> force_every;
  std::optional<int> max_ticks;
  std::optional<long long> seed;  // accepted for scripting symmetry; the run is deterministic
  bool all_zones = false;

  std::string type = "air_vehicle";
  double size = 1.0;
  double d = 0.0;
  double cr = 0.0;
  int id = 0;
};

void add_scenario_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("scenario,--scenario", o.scenario, "Scenario file or name");
}

void add_run_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out_dir, "Directory for CSV output")->capture_default_str();
  cmd->add_option("--w-obstacle", o.w_obstacle, "Obstacle penalty weight");
  cmd->add_option("--seed", o.seed, "Reserved; has no effect");
}

// Returns an exit code when loading fails.
std::optional<int> load(const Options& o, ScenarioFile& file, std::ostream& err) {
  if (o.scenario.empty()) {
    err << "error: a scenario is required\n";
    return kExitUsage;
  }
  const std::string path = resolve_scenario_path(o.scenario);
  try {
    file = parse_scenario(read_file(path));
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations) err << v.code << ": " << v.message << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << '\n';
    return kExitValidation;
  }
  return std::nullopt;
}

std::optional<int> open_out(const std::string& dir, const std::string& name, std::ofstream& f,
                            std::ostream& err) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  f.open(fs::path(dir) / name);
  if (!f) {
    err << "error: cannot write " << (fs::path(dir) / name).string() << '\n';
    return kExitValidation;
  }
  return std::nullopt;
}

void print_cost(std::ostream& out, const CostBreakdown& c) {
  out << "time_cost " << format_double(c.time) << '\n'
      << "obstacle_penalty " << format_double(c.obstacle) << '\n'
      << "terminal_penalty " << format_double(c.terminal) << '\n'
      << "bounds_penalty " << format_double(c.bounds) << '\n'
      << "total " << format_double(c.total) << '\n';
}

int do_plan(const Options& o, std::ostream& out, std::ostream& err) {
  ScenarioFile file;
  if (auto rc = load(o, file, err)) return *rc;
  SimConfig cfg;
  try {
    cfg = make_config(file);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  if (o.w_obstacle) cfg.weights.obstacle = *o.w_obstacle;

  const auto& sc = file.scenario;
  ActiveSet zones_from;
  for (const auto& obs : sc.obstacles) {
    const auto d = cfg.rules.decide(obs, sc.ownship);
    if (o.all_zones || d.active) zones_from.members[obs.id] = d.radius;
  }
  OcpProblem problem = make_problem(cfg, sc.ownship, sc.goal, zones_for(sc.obstacles, zones_from));
  OcpSolution sol;
  try {
    sol = solve(problem, std::nullopt, cfg.solver);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  out << "status " << to_string(sol.status) << '\n'
      << "converged " << (sol.converged ? 1 : 0) << '\n'
      << "iterations " << sol.iterations << '\n'
      << "t_final " << format_double(sol.t_final()) << '\n'
      << "zones " << problem.zones.size() << '\n'
      << "wall_time " << format_double(sol.wall_time) << '\n';
  print_cost(out, sol.cost);
  if (sol.failed()) {
    err << "solver failure: " << sol.diagnostic << '\n';
    return kExitSolver;
  }
  std::ofstream f;
  if (auto rc = open_out(o.out_dir, "trajectory.csv", f, err)) return *rc;
  write_trajectory(f, sol);
  return kExitOk;
}

int do_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  ScenarioFile file;
  if (auto rc = load(o, file, err)) return *rc;
  SimConfig cfg;
  try {
    cfg = make_config(file);
    if (o.w_obstacle) cfg.weights.obstacle = *o.w_obstacle;
    if (o.force_every) cfg.forced_resolve_every = *o.force_every;
    if (o.max_ticks) cfg.max_ticks = *o.max_ticks;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  SimTrace trace;
  try {
    trace = run(file.scenario, cfg);
  } catch (const std::runtime_error& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
  const std::pair<const char*, void (*)(std::ostream&, const SimTrace&)> tables[] = {
      {"trajectory.csv", [](std::ostream& s, const SimTrace& t) { write_trajectory(s, t); }},
      {"cost.csv", write_cost},
      {"activation.csv", write_activation},
  };
  for (const auto& [name, writer] : tables) {
    std::ofstream f;
    if (auto rc = open_out(o.out_dir, name, f, err)) return *rc;
    writer(f, trace);
  }
  out << "ticks " << trace.records.size() << '\n'
      << "solves " << trace.solve_count() << '\n'
      << "degraded " << trace.degraded_count() << '\n'
      << "goal_miss " << format_double(trace.goal_miss(file.scenario.goal)) << '\n';
  return kExitOk;
}

int do_fuzzy_eval(const Options& o, std::ostream& out, std::ostream& err) {
  ObstacleType type;
  try {
    type = parse_obstacle_type(o.type);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const ClearanceRules rules;
  out << kActivationHeader << '\n'
      << activation_row(0, rules.classify(o.id, type, o.size, o.d, o.cr)) << '\n';
  return kExitOk;
}

int do_validate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.scenario.empty()) {
    err << "error: a scenario is required\n";
    return kExitUsage;
  }
  const std::string path = resolve_scenario_path(o.scenario);
  ScenarioFile file;
  try {
    file = parse_scenario_unchecked(read_file(path));
  } catch (const std::exception& e) {
    err << "error: " << path << ": " << e.what() << '\n';
    return kExitValidation;
  }
  const auto violations = validate(file);
  for (const auto& v : violations) err << v.code << ": " << v.message << '\n';
  if (!violations.empty()) return kExitValidation;
  out << "ok\n";
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fuzzy-gated clearance planning and replanning"};
  app.name("fuzzclear");
  app.require_subcommand(1);
  Options o;

  auto* plan = app.add_subcommand("plan", "Single solve; writes trajectory.csv");
  add_scenario_flags(plan, o);
  add_run_flags(plan, o);
  plan->add_flag("--all-zones", o.all_zones, "Constrain every obstacle, not only active ones");

  auto* sim = app.add_subcommand("simulate", "Replanning run; writes trajectory, cost and activation tables");
  add_scenario_flags(sim, o);
  add_run_flags(sim, o);
  sim->add_option("--force-resolve-every", o.force_every, "Re-solve every N ticks (0 = gated only)")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--max-ticks", o.max_ticks, "Number of ticks")->check(CLI::PositiveNumber);

  auto* fz = app.add_subcommand("fuzzy-eval", "Classify one obstacle; prints an activation row");
  fz->add_option("--type", o.type, "air_vehicle or bird")->capture_default_str();
  fz->add_option("--size", o.size, "Size, m")->capture_default_str();
  fz->add_option("--d", o.d, "Distance, m")->required();
  fz->add_option("--cr", o.cr, "Closing rate, m/s (negative when closing)")->required();
  fz->add_option("--id", o.id, "Obstacle id")->capture_default_str();

  auto* val = app.add_subcommand("validate", "Check a scenario; violations go to standard error");
  add_scenario_flags(val, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e, out, err) == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  if (*plan) return do_plan(o, out, err);
  if (*sim) return do_simulate(o, out, err);
  if (*fz) return do_fuzzy_eval(o, out, err);
  return do_validate(o, out, err);
}

}  // namespace fuzzclear
