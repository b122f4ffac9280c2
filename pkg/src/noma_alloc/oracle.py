"""Brute-force ground truth for small instances.

Every admissible assignment is enumerated; for each one the power
search exploits the problem structure exactly: rates on different
subcarriers couple only through the budget, so the search runs over
per-subcarrier budget fractions (an outer simplex grid, refined around
the incumbent) with an inner refined line search for the power split
inside each two-user pair.  Every evaluated point is feasible, so the
best value found is a certified lower bound on the optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .model import (
    LN2,
    Allocation,
    PowerAllocation,
    ProblemInstance,
    SubcarrierAssignment,
    make_allocation,
    valid_pair_mask,
)


@dataclass(frozen=True)
class OracleConfig:
    grid_levels: int = 15
    refinement_passes: int = 3
    zoom: float = 5.0
    max_subcarriers: int = 3
    max_users: int = 3

    def __post_init__(self) -> None:
        if self.grid_levels < 3 or self.refinement_passes < 1 or self.zoom <= 1:
            raise ValueError("degenerate oracle configuration")


class OracleRun(NamedTuple):
    allocation: Allocation
    evaluations: int
    gap_estimate: float


def enumerate_assignments(
    instance: ProblemInstance,
    config: OracleConfig | None = None,
    *,
    allowed: np.ndarray | None = None,
) -> list[SubcarrierAssignment]:
    """All assignments built from admissible pairs, one or none per subcarrier."""
    cfg = config or OracleConfig()
    _check_caps(instance, cfg)
    out = []
    for pairs in _assignment_keys(instance, allowed):
        out.append(
            SubcarrierAssignment.from_pairs(instance.num_subcarriers, instance.num_users, pairs)
        )
    return out


def _check_caps(instance: ProblemInstance, cfg: OracleConfig) -> None:
    if instance.num_subcarriers > cfg.max_subcarriers or instance.num_users > cfg.max_users:
        raise ValueError(
            f"instance ({instance.num_subcarriers} subcarriers, {instance.num_users} users) "
            f"exceeds oracle caps ({cfg.max_subcarriers}, {cfg.max_users})"
        )


def _assignment_keys(
    instance: ProblemInstance, allowed: np.ndarray | None
) -> Iterator[list[tuple[int, int, int]]]:
    mask = valid_pair_mask(instance)
    if allowed is not None:
        mask = mask & np.asarray(allowed, dtype=bool)
    per_sc = [
        [None] + [tuple(map(int, mn)) for mn in np.argwhere(mask[i])]
        for i in range(instance.num_subcarriers)
    ]
    for combo in itertools.product(*per_sc):
        yield [(i, mn[0], mn[1]) for i, mn in enumerate(combo) if mn is not None]


def _pair_rates(hm, hn, wm, wn, qv, budget):
    qu = budget - qv
    return wm * np.log2(1.0 + hm * qu / (hm * qv + 1.0)) + wn * np.log2(1.0 + hn * qv)


class _Counter:
    __slots__ = ("n",)

    def __init__(self) -> None:
        self.n = 0


def _best_split(hm, hn, wm, wn, budgets, levels, zoom, passes, count):
    """Vectorized refined search for the in-pair split at each budget.

    The strong user's share is searched as ``qv = budget * 10**t``: at
    high SNR the weak user's rate collapses once ``hm * qv`` passes 1,
    so the interesting splits span many decades and a linear grid would
    step right over them.  Zero power for the strong user is always a
    candidate.  Returns (best rate, best qv) per budget.
    """
    budgets = np.asarray(budgets, dtype=float)
    t_lo = np.full(budgets.shape, -9.0)
    t_hi = np.full(budgets.shape, 0.0)
    grid = np.linspace(0.0, 1.0, levels)
    best_rate = _pair_rates(hm, hn, wm, wn, np.zeros_like(budgets), budgets)
    count.n += budgets.size
    best_t = np.full(budgets.shape, -np.inf)  # -inf encodes qv = 0
    for _ in range(passes):
        t = t_lo[:, None] + (t_hi - t_lo)[:, None] * grid[None, :]
        qv = budgets[:, None] * 10.0**t
        rates = _pair_rates(hm, hn, wm, wn, qv, budgets[:, None])
        count.n += rates.size
        j = np.argmax(rates, axis=1)
        rows = np.arange(budgets.size)
        improved = rates[rows, j] > best_rate
        best_rate = np.where(improved, rates[rows, j], best_rate)
        best_t = np.where(improved, t[rows, j], best_t)
        width = (t_hi - t_lo) / zoom
        center = np.where(np.isfinite(best_t), best_t, t_lo)
        t_lo = np.maximum(center - width / 2, -12.0)
        t_hi = np.minimum(center + width / 2, 0.0)
    best_qv = np.where(np.isfinite(best_t), budgets * 10.0**best_t, 0.0)
    return best_rate, best_qv


def _budget_fractions(free_dims, levels, center, width):
    """Grid over budget fractions of the scheduled subcarriers.

    ``free_dims`` fractions vary on a grid, the last one absorbs the
    remainder; points with a negative remainder are dropped.
    """
    if free_dims == 0:
        return np.ones((1, 1))
    axes = []
    for d in range(free_dims):
        lo = max(0.0, center[d] - width / 2)
        hi = min(1.0, center[d] + width / 2)
        axes.append(np.linspace(lo, hi, levels))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, free_dims)
    rest = 1.0 - mesh.sum(axis=1)
    keep = rest >= -1e-12
    return np.column_stack([mesh[keep], np.maximum(rest[keep], 0.0)])


def _solve_assignment(
    instance: ProblemInstance,
    pairs: list[tuple[int, int, int]],
    cfg: OracleConfig,
    count: _Counter,
) -> tuple[float, np.ndarray, float]:
    """Best (objective, power matrix, final grid step) for one assignment."""
    p = np.zeros((instance.num_subcarriers, instance.num_users))
    if not pairs:
        return 0.0, p, 0.0
    g, w = instance.gains, instance.weights
    s_count = len(pairs)
    hm = np.array([g[i, m] for i, m, n in pairs])
    hn = np.array([g[i, n] for i, m, n in pairs])
    wm = np.array([w[m] for i, m, n in pairs])
    wn = np.array([w[n] for i, m, n in pairs])
    singleton = np.array([m == n for i, m, n in pairs])

    center = np.full(s_count, 1.0 / s_count)
    width = 1.0
    best = (-np.inf, None, None)  # objective, fractions, qv per pair
    step = 1.0
    for _ in range(cfg.refinement_passes):
        fracs = _budget_fractions(s_count - 1, cfg.grid_levels, center, width)
        budgets = instance.p_max * fracs  # (npoints, s_count)
        total = np.zeros(fracs.shape[0])
        qv_all = np.zeros_like(budgets)
        for j in range(s_count):
            b = budgets[:, j]
            if singleton[j]:
                rate = wm[j] * np.log2(1.0 + hm[j] * b)
                count.n += b.size
                qv = np.zeros_like(b)
            else:
                rate, qv = _best_split(
                    hm[j], hn[j], wm[j], wn[j], b,
                    cfg.grid_levels, cfg.zoom, cfg.refinement_passes, count,
                )
            total += rate
            qv_all[:, j] = qv
        jbest = int(np.argmax(total))
        if total[jbest] > best[0]:
            best = (float(total[jbest]), fracs[jbest].copy(), qv_all[jbest].copy())
        step = width / (cfg.grid_levels - 1)
        center = best[1][: max(s_count - 1, 1)]
        width /= cfg.zoom

    objective, fracs, qv = best
    for j, (i, m, n) in enumerate(pairs):
        b = instance.p_max * fracs[j]
        if m == n:
            p[i, m] = b
        else:
            p[i, m] = b - qv[j]
            p[i, n] = qv[j]
    return objective, p, step * instance.p_max


def brute_force_run(
    instance: ProblemInstance,
    config: OracleConfig | None = None,
    *,
    allowed: np.ndarray | None = None,
) -> OracleRun:
    """Exhaustive assignment enumeration with refined power grids."""
    cfg = config or OracleConfig()
    _check_caps(instance, cfg)
    count = _Counter()
    best_obj = -np.inf
    best_pairs: list[tuple[int, int, int]] = []
    best_p = np.zeros((instance.num_subcarriers, instance.num_users))
    max_step = 0.0
    for pairs in _assignment_keys(instance, allowed):
        obj, p, step = _solve_assignment(instance, pairs, cfg, count)
        if obj > best_obj:
            best_obj, best_pairs, best_p = obj, pairs, p
            max_step = step
    assignment = SubcarrierAssignment.from_pairs(
        instance.num_subcarriers, instance.num_users, best_pairs
    )
    allocation = make_allocation(instance, PowerAllocation(best_p), assignment)
    # Reported accuracy estimate: per-subcarrier rate slope (capped by the
    # log saturation at the winning budgets) times the final budget step,
    # plus a curvature term for the log-scale split resolution.
    gmax = float(instance.gains.max())
    sc_budget = best_p.sum(axis=1)
    outer_err = float(
        sum(min(gmax, 1.0 / b) * max_step / LN2 for b in sc_budget if b > 0.0)
    )
    dt = 9.0 / ((cfg.grid_levels - 1) * cfg.zoom ** (cfg.refinement_passes - 1))
    split_err = len(best_pairs) * (dt * np.log(10.0)) ** 2 / (2.0 * LN2)
    gap = outer_err + split_err
    return OracleRun(allocation, count.n, gap)


def brute_force_solve(
    instance: ProblemInstance,
    config: OracleConfig | None = None,
    *,
    allowed: np.ndarray | None = None,
) -> Allocation:
    """Certified-by-construction lower bound on the optimum (near-exact)."""
    return brute_force_run(instance, config, allowed=allowed).allocation
