"""Energy-efficiency optimization for UAV-assisted bistatic backscatter
networks."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, Infeasible, InvariantViolation,
                     SolverFailure, StartInfeasible, UavbcError, Unbounded)
from .metrics import (PowerProfile, Schedule, SolutionReport, Trajectory,
                      energy_efficiency, solution_report)
from .scenario import Scenario, generate_scenario

__all__ = [
    "ConfigurationError", "Infeasible", "InvariantViolation", "SolverFailure",
    "StartInfeasible", "UavbcError", "Unbounded",
    "PowerProfile", "Schedule", "SolutionReport", "Trajectory",
    "energy_efficiency", "solution_report",
    "Scenario", "generate_scenario",
]
