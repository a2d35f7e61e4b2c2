import os
from pathlib import Path

import numpy as np
import pytest

import fuzzclear as fc

SCENARIOS = Path(os.environ.get("FUZZCLEAR_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))


def test_regulatory_constants():
    assert fc.radius_subsystem(fc.ObstacleType.AIR_VEHICLE, 30.0) == 5556.0
    assert abs(fc.flock_radius_bound(1000, 50.0, 0.7405) - 277.0) <= 1.0


def test_fuzzy_chain():
    assert fc.urgency_subsystem(2000.0, -75.0) == pytest.approx(4.0, abs=1e-12)
    assert fc.activation_subsystem(5556.0, 4.8) == 1.0
    d = fc.classify(1, fc.ObstacleType.AIR_VEHICLE, 30.0, 2000.0, -150.0)
    assert d.radius == 5556.0 and d.active and d.visible

    own = fc.OwnshipState(position=[0, 0, 0], velocity=[0, 0, 0])
    obs = fc.Obstacle(id=2, type=fc.ObstacleType.BIRD, size=50.0, position=[7000, 0, 0])
    far = fc.decide(obs, own)
    assert not far.visible and not far.active


def test_solve_and_cost():
    p = fc.OcpProblem(position=[0, 0, 0], velocity=[80, 0, 0], goal=[15000, 0, 1000])
    sol = fc.solve(p)
    assert sol.converged
    traj = np.asarray(sol.trajectory)
    assert traj.shape == (101, 6)
    assert np.linalg.norm(traj[-1, :3] - [15000, 0, 1000]) < 1.0
    assert sol.cost["obstacle"] == 0.0
    assert 60.0 <= sol.t_final <= 600.0

    z = fc.DecisionVector(np.zeros((25, 3)), 100.0)
    p.zones = [fc.Zone(center=[4000, 0, 0], radius=500.0)]
    assert fc.evaluate_cost(p, z)["obstacle"] > 0.0
    g = np.asarray(fc.gradient(p, z))
    assert g.shape == (76,) and np.all(np.isfinite(g))


def test_scenario_validation_and_simulation():
    bad = (SCENARIOS / "bad_scenario.json").read_text()
    codes = sorted(code for code, _ in fc.validate_scenario(bad))
    assert codes == ["BIRD_SIZE", "DUPLICATE_ID", "RUNWAY_CLEARANCE", "SPEED_BOUND"]

    text = (SCENARIOS / "empty_sky.json").read_text()
    assert fc.normalize_scenario(fc.normalize_scenario(text)) == fc.normalize_scenario(text)
    result = fc.simulate(text, max_ticks=20)
    assert result["solves"] == 1
    assert result["resolved_ticks"] == [0]
    assert np.asarray(result["ownship"]).shape == (20, 6)


def test_cli_entry():
    rc, out, _ = fc.cli_main(["fuzzy-eval", "--type", "bird", "--size", "10", "--d", "5000", "--cr", "50"])
    assert rc == 0
    header, row = out.strip().splitlines()
    assert header.startswith("tick,obstacle_id,distance")
    assert float(row.split(",")[4]) == pytest.approx(125.0)
    rc, _, _ = fc.cli_main(["validate", str(SCENARIOS / "bad_scenario.json")])
    assert rc == 1
