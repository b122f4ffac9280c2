"""Joint power and subcarrier allocation for downlink multicarrier NOMA.

An exact global solver built on monotonic optimization (outer polyblock
approximation with Dinkelbach boundary projections), a fast suboptimal
solver (big-M decomposition plus penalized successive convex
approximation), optimal orthogonal-access and random-pairing baselines,
a brute-force oracle for small instances, and a Monte-Carlo experiment
harness.
"""

from .baselines import BaselineKind, solve_oma, solve_random_pairing
from .model import (
    Allocation,
    FeasibilityReport,
    LiftedPower,
    PowerAllocation,
    ProblemInstance,
    SubcarrierAssignment,
    check_feasible,
    make_allocation,
    oma_rate,
    pair_rate,
    system_throughput,
)
from .oracle import OracleConfig, brute_force_solve
from .polyblock import solve_optimal, solve_optimal_run
from .scenario import ScenarioConfig, build_instance, instance_for_drop
from .sca import ScaConfig, default_eta, solve_sca, solve_sca_run

__all__ = [
    "Allocation",
    "BaselineKind",
    "FeasibilityReport",
    "LiftedPower",
    "OracleConfig",
    "PowerAllocation",
    "ProblemInstance",
    "ScaConfig",
    "ScenarioConfig",
    "SubcarrierAssignment",
    "brute_force_solve",
    "build_instance",
    "check_feasible",
    "default_eta",
    "instance_for_drop",
    "make_allocation",
    "oma_rate",
    "pair_rate",
    "solve_oma",
    "solve_optimal",
    "solve_optimal_run",
    "solve_random_pairing",
    "solve_sca",
    "solve_sca_run",
    "system_throughput",
]

__version__ = "0.1.0"
