"""Fuzzy-gated clearance zones and minimum-time replanning."""

from ._core import (
    ClearanceDecision,
    DecisionVector,
    Obstacle,
    ObstacleType,
    OcpProblem,
    OcpSolution,
    OwnshipState,
    Zone,
    activation_subsystem,
    classify,
    cli_main,
    decide,
    evaluate_cost,
    flock_radius_bound,
    gradient,
    min_separation,
    normalize_scenario,
    radius_subsystem,
    simulate,
    solve,
    urgency_subsystem,
    validate_scenario,
)

__all__ = [name for name in dir() if not name.startswith("_")]
