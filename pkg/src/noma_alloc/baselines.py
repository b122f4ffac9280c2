"""Comparison schemes: optimal single-user allocation and random pairing."""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import sca
from .model import Allocation, ProblemInstance, SubcarrierAssignment, valid_pair_mask
from .polyblock import solve_optimal_run


class BaselineKind(Enum):
    OMA_OPTIMAL = "oma_optimal"
    RANDOM_PAIRING = "random_pairing"


def singleton_mask(instance: ProblemInstance) -> np.ndarray:
    """Pair mask admitting only m == n: the orthogonal-access special case."""
    k = instance.num_users
    eye = np.eye(k, dtype=bool)
    return np.broadcast_to(eye, (instance.num_subcarriers, k, k)).copy()


def solve_oma(
    instance: ProblemInstance,
    epsilon: float = 1e-3,
    *,
    max_vertices: int = 10_000,
) -> Allocation:
    """Exact allocation when every subcarrier serves at most one user.

    Runs the global solver with all two-user pairs masked out, so the
    result is truly optimal within the orthogonal policy space.
    """
    return solve_optimal_run(
        instance, epsilon, max_vertices=max_vertices, allowed=singleton_mask(instance)
    ).allocation


def solve_random_pairing(instance: ProblemInstance, seed: int) -> Allocation:
    """Uniformly draw one admissible pair per subcarrier, then optimize power.

    Singleton pairs take part in the draw; the power budget is split
    optimally across the drawn schedule, so only the pairing is random.
    """
    rng = np.random.default_rng(seed)
    mask = valid_pair_mask(instance)
    pairs = []
    for i in range(instance.num_subcarriers):
        options = np.argwhere(mask[i])
        m, n = map(int, options[rng.integers(len(options))])
        pairs.append((i, m, n))
    assignment = SubcarrierAssignment.from_pairs(
        instance.num_subcarriers, instance.num_users, pairs
    )
    return sca.optimize_powers(instance, assignment)
