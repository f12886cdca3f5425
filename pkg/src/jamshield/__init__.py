"""Joint trajectory, power and IRS phase design for a UAV receiving from a ground
node under jamming."""

from .ao import AoReport, AoState, PIPELINES, init_state, run_ao, run_pipeline
from .channel import evaluate_rate
from .scenario import (ConfigError, IrsGrid, Position3, Scenario, Trajectory, ValidationError,
                       line_trajectory, load_scenario, parse_scenario)

__version__ = "0.1.0"

__all__ = [
    "AoReport", "AoState", "PIPELINES", "init_state", "run_ao", "run_pipeline",
    "evaluate_rate", "ConfigError", "ValidationError", "IrsGrid", "Position3", "Scenario",
    "Trajectory", "line_trajectory", "load_scenario", "parse_scenario",
]
