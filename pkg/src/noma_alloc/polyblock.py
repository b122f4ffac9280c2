"""Globally optimal solver via monotonic optimization.

The problem is lifted into a space of per-slot rate factors
``z = [u_1 .. u_{D/2}, v_1 .. v_{D/2}]`` where the weighted throughput
becomes the increasing function ``sum(mu_d * log2(z_d))``.  An outer
polyblock approximation shrinks a vertex set toward the boundary of the
feasible region; each vertex is projected onto the boundary along its
ray by a Dinkelbach loop whose subproblems are linear programs.

The search additionally keeps, for every projection, the best feasible
schedule read off the projected point, so the returned allocation is a
true feasible incumbent even when the vertex budget runs out before the
boundary gap closes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import sca
from .model import (
    Allocation,
    LiftedPower,
    PowerAllocation,
    ProblemInstance,
    SubcarrierAssignment,
    coordinate_weights,
    gain_slots,
    make_allocation,
    recover,
    valid_pair_mask,
)
from .solvers import LinearProgram, SolverError, canonical_maximize

ACTIVATION_THRESHOLD = 1e-6  # a rate factor this far above 1 counts as scheduled

TRACE_FIELDS = ("k", "vertices", "upper_bound", "incumbent", "selected_gap")

# In-pair split fractions mixing linear and log scales; at high SNR the
# weak user tolerates only a sliver of interfering power.
_SPLIT_FRACTIONS = np.unique(
    np.concatenate([np.linspace(0.0, 1.0, 9), 10.0 ** np.linspace(-8.0, 0.0, 17)])
)


class ProjectionError(SolverError):
    """Dinkelbach loop failed to converge; carries the lambda trace."""

    def __init__(self, message: str, lambda_trace: Sequence[float]):
        super().__init__(f"{message} (lambda trace: {list(lambda_trace)})")
        self.lambda_trace = tuple(lambda_trace)


@dataclass(frozen=True)
class ProjectionResult:
    """Boundary projection of a vertex: ``phi = lambda * z`` (floored at 1)."""

    lambda_: float
    phi: np.ndarray
    lifted_power: LiftedPower
    dinkelbach_iterations: int
    residual: float
    lambda_trace: tuple[float, ...]


class PolyblockRun(NamedTuple):
    allocation: Allocation
    upper_bound: float
    relative_gap: float
    gap_closed: bool
    iterations: int
    projections: int


def initial_vertex(instance: ProblemInstance) -> np.ndarray:
    """Single vertex of the first enclosing polyblock.

    Every slot pretends it gets the whole power budget interference
    free, which dominates anything actually achievable.
    """
    hm, hn = gain_slots(instance)
    return np.concatenate([1.0 + hm * instance.p_max, 1.0 + hn * instance.p_max])


def build_dinkelbach_lp(
    instance: ProblemInstance, z: np.ndarray, lambda_n: float
) -> LinearProgram:
    """Parametric LP of one Dinkelbach step.

    Variables are the D slot powers plus the free auxiliary ``tau``;
    the D rows encode ``f_d - lambda * z_d * g_d >= tau`` and one more
    row the power budget.
    """
    if lambda_n < 0:
        raise ValueError("lambda must be nonnegative")
    z = np.asarray(z, dtype=float).reshape(-1)
    dim = instance.lifted_dim
    if z.size != dim:
        raise ValueError(f"vertex must have {dim} coordinates, got {z.size}")
    half = dim // 2
    hm, hn = gain_slots(instance)
    rows = np.zeros((dim + 1, dim + 1))
    bounds = np.empty(dim + 1)
    ar = np.arange(half)
    # u rows: tau - hm*pu - hm*(1 - lam*z_u)*pv <= 1 - lam*z_u
    rows[ar, ar] = -hm
    rows[ar, half + ar] = -hm * (1.0 - lambda_n * z[:half])
    rows[ar, dim] = 1.0
    bounds[:half] = 1.0 - lambda_n * z[:half]
    # v rows: tau - hn*pv <= 1 - lam*z_v
    rows[half + ar, half + ar] = -hn
    rows[half + ar, dim] = 1.0
    bounds[half : dim] = 1.0 - lambda_n * z[half:]
    rows[dim, :dim] = 1.0
    bounds[dim] = instance.p_max
    objective = np.zeros(dim + 1)
    objective[dim] = 1.0
    lower = np.zeros(dim + 1)
    lower[dim] = -np.inf
    return LinearProgram(objective, rows, bounds, lower_bounds=lower)


class _ProjectionContext:
    """Per-instance data shared by all projections of one solve.

    Without a mask every (i, m, n) triple takes part, matching the
    boundary-projection definition over the full coordinate space; the
    solver passes the admissible-pair mask to pin the rest.
    """

    def __init__(self, instance: ProblemInstance, mask: np.ndarray | None = None):
        self.instance = instance
        self.half = instance.lifted_dim // 2
        hm, hn = gain_slots(instance)
        k = instance.num_users
        if mask is None:
            m3 = np.ones((instance.num_subcarriers, k, k), dtype=bool)
        else:
            m3 = np.asarray(mask, dtype=bool).copy()
        self.mask3 = m3
        flat = m3.reshape(-1)
        self.active = np.flatnonzero(flat)  # triple indices, 0-based
        self.has_pinned = self.active.size < self.half
        self.hm = hm[self.active]
        self.hn = hn[self.active]
        mu = coordinate_weights(instance)
        self.wm = mu[: self.half][self.active]
        self.wn = mu[self.half :][self.active]
        self.i_of = self.active // (k * k)
        rest = self.active % (k * k)
        self.m_of = rest // k
        self.n_of = rest % k
        self.by_subcarrier = [
            np.flatnonzero(self.i_of == i) for i in range(instance.num_subcarriers)
        ]
        self._zero_step: tuple[np.ndarray, float] | None = None
        self._fill: list[int] | None = None

    def pair_value(self, j: int, budget: float) -> float:
        """Cheap estimate of what triple ``j`` earns from a power budget:
        best of a split grid that covers both linear and log scales."""
        hm, hn = self.hm[j], self.hn[j]
        wm, wn = self.wm[j], self.wn[j]
        if self.m_of[j] == self.n_of[j]:
            return float(wm * np.log2(1.0 + hm * budget))
        qv = budget * _SPLIT_FRACTIONS
        qu = budget - qv
        return float(
            np.max(wm * np.log2(1 + hm * qu / (hm * qv + 1)) + wn * np.log2(1 + hn * qv))
        )

    def fill_triples(self) -> list[int]:
        """Per-subcarrier default pair (position into ``active``) used to
        complete partial candidate schedules; chosen by the rate it would
        earn from an equal share of the budget."""
        if self._fill is None:
            share = self.instance.p_max / self.instance.num_subcarriers
            fill = []
            for pos in self.by_subcarrier:
                best_j, best_val = -1, -np.inf
                for j in pos:
                    val = self.pair_value(int(j), share)
                    if val > best_val + 1e-15:
                        best_j, best_val = int(j), val
                fill.append(best_j)
            self._fill = fill
        return self._fill

    def solve_step(self, z: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
        """One Dinkelbach LP, reduced to the admissible slots.

        The free auxiliary is shifted by its value at zero power so the
        simplex starts from a feasible slack basis.  At ``lam == 0`` the
        program does not depend on the vertex, so its solution is cached
        across projections.
        """
        if lam == 0.0 and self._zero_step is not None:
            return self._zero_step
        a = self.active.size
        zu = z[: self.half][self.active]
        zv = z[self.half :][self.active]
        ru = 1.0 - lam * zu
        rv = 1.0 - lam * zv
        shift = min(float(np.min(ru)), float(np.min(rv)), 1.0 - lam if self.has_pinned else np.inf)
        nrows = 2 * a + 1 + (1 if self.has_pinned else 0)
        nvars = 2 * a + 1
        rows = np.zeros((nrows, nvars))
        bounds = np.empty(nrows)
        ar = np.arange(a)
        rows[ar, ar] = -self.hm
        rows[ar, a + ar] = -self.hm * ru
        rows[ar, 2 * a] = 1.0
        bounds[:a] = ru - shift
        rows[a + ar, a + ar] = -self.hn
        rows[a + ar, 2 * a] = 1.0
        bounds[a : 2 * a] = rv - shift
        rows[2 * a, : 2 * a] = 1.0
        bounds[2 * a] = self.instance.p_max
        if self.has_pinned:
            rows[2 * a + 1, 2 * a] = 1.0
            bounds[2 * a + 1] = (1.0 - lam) - shift
        objective = np.zeros(nvars)
        objective[2 * a] = 1.0
        x = canonical_maximize(objective, rows, bounds)
        ptilde = np.zeros(self.instance.lifted_dim)
        ptilde[self.active] = np.maximum(x[:a], 0.0)
        ptilde[self.half + self.active] = np.maximum(x[a : 2 * a], 0.0)
        result = ptilde, shift + float(x[2 * a])
        if lam == 0.0:
            self._zero_step = result
        return result

    def min_ratio(self, z: np.ndarray, ptilde: np.ndarray) -> float:
        pu = ptilde[: self.half][self.active]
        pv = ptilde[self.half :][self.active]
        fu = 1.0 + self.hm * (pu + pv)
        gu = 1.0 + self.hm * pv
        fv = 1.0 + self.hn * pv
        zu = z[: self.half][self.active]
        zv = z[self.half :][self.active]
        lam = min(float(np.min(fu / (zu * gu))), float(np.min(fv / zv)))
        if self.has_pinned:
            lam = min(lam, 1.0)
        return lam


def project(
    instance: ProblemInstance,
    z: np.ndarray,
    delta: float = 1e-6,
    *,
    context: _ProjectionContext | None = None,
    max_iterations: int = 100,
) -> ProjectionResult:
    """Dinkelbach computation of ``lambda = max {b : b*z in Z}``.

    The lambda iterates increase strictly until the subproblem value
    drops to ``delta``; the returned lambda is attained by the returned
    slot powers, so ``phi`` is always feasible.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = np.asarray(z, dtype=float).reshape(-1)
    if np.any(z < 1.0 - 1e-12) or not np.all(np.isfinite(z)):
        raise ValueError("vertex coordinates must be finite and >= 1")
    ctx = context or _ProjectionContext(instance)

    # The subproblem value F(probe) is decreasing with root lambda*.  The
    # plain ratio update alone contracts only linearly when the z_d * g_d
    # spread is large, so probes are accelerated by a secant step through
    # the last two positive values, safeguarded by bisection once an
    # overshoot brackets the root.  Reported lambdas are achieved ratios,
    # so they stay monotone and always feasible.
    probe = 0.0
    best = -np.inf
    best_p: np.ndarray | None = None
    hi: float | None = None
    prev: tuple[float, float] | None = None
    trace = [0.0]
    # LP noise can push achieved ratios a hair past the true root, leaving
    # the subproblem value slightly negative at every remaining probe;
    # accept the scaled negative band instead of stalling on it.
    band = delta * (1.0 + float(np.max(z)))
    for n in range(1, max_iterations + 1):
        ptilde, tau = ctx.solve_step(z, probe)
        rho = ctx.min_ratio(z, ptilde)
        if rho > trace[-1]:
            trace.append(rho)
        if rho > best:
            best, best_p = rho, ptilde
        if -band <= tau <= delta:
            assert best_p is not None
            phi = np.maximum(best * z, 1.0)
            return ProjectionResult(best, phi, LiftedPower(best_p), n, tau, tuple(trace))
        if tau < 0.0:
            hi = probe if hi is None else min(hi, probe)
            probe = 0.5 * (best + hi)
            continue
        nxt = rho
        if prev is not None and prev[1] > tau:
            secant = probe + tau * (probe - prev[0]) / (prev[1] - tau)
            if hi is not None:
                secant = min(secant, best + 0.9 * (hi - best))
            nxt = max(nxt, secant)
        prev = (probe, tau)
        if hi is not None:
            nxt = min(nxt, best + 0.9 * (hi - best))
        probe = max(nxt, rho)
    raise ProjectionError(f"no convergence within {max_iterations} iterations", trace)


def generate_children(z: np.ndarray, phi: np.ndarray) -> list[np.ndarray]:
    """Replace a vertex by its D single-coordinate reductions onto phi.

    Coordinates that would fall below 1 are floored at 1; a child equals
    its parent exactly where the projection already touches the vertex.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.shape != z.shape:
        raise ValueError("phi and z must have matching shapes")
    if np.any(phi > z + 1e-9):
        raise ValueError("projection must not exceed the vertex")
    children = []
    for d in range(z.size):
        child = z.copy()
        child[d] = max(min(phi[d], z[d]), 1.0)
        children.append(child)
    return children


def select_best_vertex(
    instance: ProblemInstance,
    candidates: Sequence[tuple[np.ndarray, ProjectionResult]],
) -> int:
    """Index of the candidate whose projection scores the highest objective."""
    if not candidates:
        raise ValueError("no candidate vertices")
    mu = coordinate_weights(instance)
    scores = [float(mu @ np.log2(proj.phi)) for _, proj in candidates]
    return int(np.argmax(scores))


# ---------------------------------------------------------------------------
# Assignment recovery
# ---------------------------------------------------------------------------


def _pair_schedule(ctx: _ProjectionContext, phi: np.ndarray) -> list[int]:
    """Per-subcarrier best admissible triple with both factors above 1.

    Returns positions into ``ctx.active``; -1 marks an idle subcarrier.
    """
    u = phi[: ctx.half][ctx.active]
    v = phi[ctx.half :][ctx.active]
    eligible = (u > 1.0 + ACTIVATION_THRESHOLD) & (v > 1.0 + ACTIVATION_THRESHOLD)
    contrib = np.where(eligible, ctx.wm * np.log2(u) + ctx.wn * np.log2(v), -np.inf)
    kept = []
    for pos in ctx.by_subcarrier:
        if pos.size and np.isfinite(contrib[pos]).any():
            kept.append(int(pos[int(np.argmax(contrib[pos]))]))
        else:
            kept.append(-1)
    return kept


def _candidate_from_projection(
    ctx: _ProjectionContext, proj: ProjectionResult
) -> tuple[tuple[tuple[int, int, int], ...], float, np.ndarray]:
    """Feasible (assignment key, objective, power matrix) from one projection.

    Subcarriers the projection leaves idle are completed with the
    context's default pair at zero power: the raw objective is
    unchanged, but the later power re-optimization can then use them.
    """
    kept = _pair_schedule(ctx, proj.phi)
    fill = ctx.fill_triples()
    inst = ctx.instance
    ptilde = proj.lifted_power.values
    p = np.zeros((inst.num_subcarriers, inst.num_users))
    key = []
    for i, j in enumerate(kept):
        idle = j < 0
        if idle:
            j = fill[i]
            if j < 0:
                continue
        m, n = int(ctx.m_of[j]), int(ctx.n_of[j])
        key.append((i, m, n))
        if idle:
            continue
        qu = ptilde[ctx.active[j]]
        qv = ptilde[ctx.half + ctx.active[j]]
        if m == n:
            p[i, m] = qu + qv
        else:
            p[i, m] = qu
            p[i, n] = qv
    total = sum(p[i, m] if m == n else p[i, m] + p[i, n] for i, m, n in key)
    if total > inst.p_max:
        p *= inst.p_max / total
    obj = 0.0
    g, w = inst.gains, inst.weights
    for i, m, n in key:
        if m == n:
            obj += w[m] * np.log2(1.0 + g[i, m] * p[i, m])
        else:
            obj += w[m] * np.log2(1.0 + g[i, m] * p[i, m] / (g[i, m] * p[i, n] + 1.0))
            obj += w[n] * np.log2(1.0 + g[i, n] * p[i, n])
    return tuple(key), float(obj), p


def recover_assignment(
    instance: ProblemInstance,
    z_star: np.ndarray,
    lifted: LiftedPower,
    *,
    allowed: np.ndarray | None = None,
    reoptimize: bool = True,
) -> Allocation:
    """Read the schedule off a boundary point and rebuild a feasible allocation.

    A pair counts as scheduled when both of its rate factors exceed
    ``1 + 1e-6``; if several pairs activate on one subcarrier only the
    one with the largest weighted contribution survives, and the powers
    are re-optimized for the surviving binary schedule.
    """
    mask = valid_pair_mask(instance)
    if allowed is not None:
        mask &= np.asarray(allowed, dtype=bool)
    ctx = _ProjectionContext(instance, mask)
    z_star = np.asarray(z_star, dtype=float).reshape(-1)
    kept = _pair_schedule(ctx, z_star)
    pairs = [
        (i, int(ctx.m_of[j]), int(ctx.n_of[j])) for i, j in enumerate(kept) if j >= 0
    ]
    assignment = SubcarrierAssignment.from_pairs(
        instance.num_subcarriers, instance.num_users, pairs
    )
    powers = recover(instance, lifted, assignment)
    total = sum(
        powers.p[i, m] if m == n else powers.p[i, m] + powers.p[i, n] for i, m, n in pairs
    )
    if total > instance.p_max:
        powers = PowerAllocation(powers.p * (instance.p_max / total))
    if not reoptimize:
        return make_allocation(instance, powers, assignment)
    return sca.optimize_powers(instance, assignment, init=powers)


def _one_swap_polish(
    instance: ProblemInstance, ctx: _ProjectionContext, alloc: Allocation
) -> Allocation:
    """Deterministic local search on the incumbent schedule.

    Tries every admissible alternative pair on every subcarrier, fully
    re-optimizing powers per swap, until a sweep yields no improvement.
    Cheap with the waterfilling re-optimizer, and it rescues schedules
    whose single-subcarrier variants never surfaced during the search.
    """
    current = {i: (m, n) for i, m, n in alloc.assignment.active_pairs()}
    best = alloc
    for _ in range(3):
        improved = False
        for i in range(instance.num_subcarriers):
            for j in ctx.by_subcarrier[i]:
                pair = (int(ctx.m_of[j]), int(ctx.n_of[j]))
                if current.get(i) == pair:
                    continue
                trial = dict(current)
                trial[i] = pair
                assignment = SubcarrierAssignment.from_pairs(
                    instance.num_subcarriers,
                    instance.num_users,
                    [(sc, mn[0], mn[1]) for sc, mn in sorted(trial.items())],
                )
                cand = sca.optimize_powers(instance, assignment, init=best.power)
                if cand.objective > best.objective + 1e-12:
                    best = cand
                    current = trial
                    improved = True
        if not improved:
            break
    return best


# ---------------------------------------------------------------------------
# The outer polyblock loop
# ---------------------------------------------------------------------------


@dataclass
class _Vertex:
    z: np.ndarray
    proj: ProjectionResult
    bound: float  # objective at the vertex itself: an upper bound for its box
    score: float  # objective at the projection: the selection rule


def write_trace_csv(rows: Iterable[dict], path: str) -> None:
    """Dump per-iteration search state for convergence plots."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in TRACE_FIELDS})


def solve_optimal_run(
    instance: ProblemInstance,
    epsilon: float = 1e-3,
    *,
    delta: float = 1e-6,
    max_vertices: int = 10_000,
    allowed: np.ndarray | None = None,
    candidate_pool: int = 5,
    trace: list[dict] | None = None,
) -> PolyblockRun:
    """Full polyblock search returning the allocation plus bound data."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mask = valid_pair_mask(instance)
    if allowed is not None:
        mask &= np.asarray(allowed, dtype=bool)
    ctx = _ProjectionContext(instance, mask)
    mu = coordinate_weights(instance)
    dim = instance.lifted_dim
    active_coords = np.concatenate([ctx.active, ctx.half + ctx.active])

    z0 = initial_vertex(instance)
    if ctx.has_pinned:
        pinned = np.setdiff1d(np.arange(dim), active_coords)
        z0[pinned] = 1.0

    candidates: dict[tuple, tuple[float, np.ndarray]] = {}
    best_raw = 0.0  # best feasible schedule value seen
    best_proj = 0.0  # best relaxed boundary value seen: also safe to prune against

    # Warm incumbent: a lightly budgeted run of the suboptimal solver; its
    # schedule strengthens pruning and joins the final re-optimization pool.
    seed_cfg = sca.ScaConfig(max_iterations=15, inner_tolerance=3e-5, inner_max_iterations=100)
    seed = sca.solve_sca_run(instance, seed_cfg, allowed=allowed).allocation
    seed_key = tuple(seed.assignment.active_pairs())
    candidates[seed_key] = (seed.objective, seed.power.p.copy())
    best_raw = seed.objective

    def make_vertex(z: np.ndarray) -> _Vertex:
        nonlocal best_raw, best_proj
        proj = project(instance, z, delta, context=ctx)
        key, obj, p = _candidate_from_projection(ctx, proj)
        stored = candidates.get(key)
        if stored is None or obj > stored[0]:
            candidates[key] = (obj, p)
        best_raw = max(best_raw, obj)
        vert = _Vertex(
            z, proj, float(mu @ np.log2(z)), float(mu @ np.log2(proj.phi))
        )
        best_proj = max(best_proj, vert.score)
        return vert

    verts: list[_Vertex] = [make_vertex(z0)]
    vmat = z0.reshape(1, -1)
    projections = 1
    iterations = 0
    gap_closed = False
    selected: _Vertex | None = None

    while verts:
        iterations += 1
        scores = np.array([v.score for v in verts])
        sel = int(np.argmax(scores))
        selected = verts[sel]
        upper = max(v.bound for v in verts)
        if trace is not None:
            trace.append(
                {
                    "k": iterations,
                    "vertices": len(verts),
                    "upper_bound": upper,
                    "incumbent": best_raw,
                    "selected_gap": abs(1.0 - selected.proj.lambda_),
                }
            )
        if abs(1.0 - selected.proj.lambda_) <= epsilon:
            gap_closed = True
            break
        if projections >= max_vertices:
            break

        parent = selected
        del verts[sel]
        vmat = np.delete(vmat, sel, axis=0)
        phi_eff = np.minimum(parent.proj.phi, parent.z)
        new_vertices: list[_Vertex] = []
        for d in active_coords:
            new_coord = max(phi_eff[d], 1.0)
            if new_coord >= parent.z[d] - 1e-12:
                continue  # stalled child, identical to the parent
            child = parent.z.copy()
            child[d] = new_coord
            child_bound = float(mu @ np.log2(child))
            if child_bound <= max(best_raw, best_proj) + 1e-12:
                continue  # its box cannot beat what is already attained
            if vmat.size and bool(np.any(np.all(vmat >= child - 1e-15, axis=1))):
                continue  # dominated by an existing vertex
            vert = make_vertex(child)
            projections += 1
            new_vertices.append(vert)
            if projections >= max_vertices:
                break
        if new_vertices:
            new_mat = np.array([v.z for v in new_vertices])
            if vmat.size:
                drop = np.zeros(len(verts), dtype=bool)
                for row in new_mat:
                    drop |= np.all(vmat <= row + 1e-15, axis=1)
                if drop.any():
                    verts = [v for v, gone in zip(verts, drop) if not gone]
                    vmat = vmat[~drop]
            vmat = np.vstack([vmat, new_mat]) if vmat.size else new_mat
            verts.extend(new_vertices)
        # incumbents may have improved: drop vertices that cannot beat them
        if verts:
            cutoff = max(best_raw, best_proj) + 1e-12
            keep = np.array([v.bound > cutoff for v in verts])
            if not keep.all():
                verts = [v for v, ok in zip(verts, keep) if ok]
                vmat = vmat[keep] if vmat.size else vmat

    # Rank every distinct schedule seen: the raw projection powers misjudge
    # good schedules badly at high SNR, so an equal-budget quick estimate
    # decides which ones earn a full power re-optimization.
    pos_of = {
        (int(ctx.i_of[j]), int(ctx.m_of[j]), int(ctx.n_of[j])): j
        for j in range(ctx.active.size)
    }
    share = instance.p_max / instance.num_subcarriers

    def quick_value(key: tuple) -> float:
        return sum(ctx.pair_value(pos_of[t], share) for t in key)

    ranked = sorted(candidates, key=lambda k: -quick_value(k))[:candidate_pool]
    raw_best = max(candidates, key=lambda k: candidates[k][0])
    final_keys = list(dict.fromkeys([*ranked, raw_best, seed_key]))
    best_alloc: Allocation | None = None
    for key in final_keys:
        _, p = candidates[key]
        assignment = SubcarrierAssignment.from_pairs(
            instance.num_subcarriers, instance.num_users, list(key)
        )
        alloc = sca.optimize_powers(instance, assignment, init=PowerAllocation(p))
        if best_alloc is None or alloc.objective > best_alloc.objective:
            best_alloc = alloc
    if selected is not None:
        term = recover_assignment(
            instance, selected.proj.phi, selected.proj.lifted_power, allowed=allowed
        )
        if best_alloc is None or term.objective > best_alloc.objective:
            best_alloc = term
    assert best_alloc is not None
    best_alloc = _one_swap_polish(instance, ctx, best_alloc)

    # Pruned boxes were all below max(best_raw, best_proj), so the true
    # optimum is covered by the surviving bounds and the pruning cutoff.
    upper_bound = max((v.bound for v in verts), default=0.0)
    upper_bound = max(upper_bound, best_proj, best_alloc.objective)
    rel_gap = (upper_bound - best_alloc.objective) / max(1.0, abs(best_alloc.objective))
    return PolyblockRun(
        best_alloc, upper_bound, rel_gap, gap_closed, iterations, projections
    )


def solve_optimal(
    instance: ProblemInstance,
    epsilon: float = 1e-3,
    *,
    max_vertices: int = 10_000,
    allowed: np.ndarray | None = None,
) -> Allocation:
    """Globally optimal joint power and subcarrier allocation."""
    return solve_optimal_run(
        instance, epsilon, max_vertices=max_vertices, allowed=allowed
    ).allocation


__all__ = [
    "ProjectionError",
    "ProjectionResult",
    "PolyblockRun",
    "initial_vertex",
    "build_dinkelbach_lp",
    "project",
    "generate_children",
    "select_best_vertex",
    "recover_assignment",
    "solve_optimal",
    "solve_optimal_run",
    "write_trace_csv",
]
