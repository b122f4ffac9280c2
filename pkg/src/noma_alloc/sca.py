"""Suboptimal polynomial-time solver.

The binary pairing variables are relaxed to [0, 1], the binary product
``s * p`` is decomposed with big-M rows, and binariness is restored with
a concave penalty ``eta * (sum(s) - sum(s^2))``.  The resulting
difference-of-convex program is minimized by successive convex
approximation: the subtracted convex parts are linearized at the current
iterate, and each touching convex upper bound is minimized with
Frank-Wolfe over the constraint polytope.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import (
    LN2,
    Allocation,
    LiftedPower,
    PowerAllocation,
    ProblemInstance,
    SubcarrierAssignment,
    coordinate_weights,
    delta_index,
    gain_slots,
    make_allocation,
    recover,
    valid_pair_mask,
)
from .solvers import ConvexSubproblem, LinearProgram, _njit, frank_wolfe


@dataclass(frozen=True)
class ScaConfig:
    """Penalty factor and stopping knobs of the outer loop.

    ``eta=None`` resolves to :func:`default_eta` at solve time.
    """

    eta: float | None = None
    max_iterations: int = 50
    objective_tolerance: float = 1e-5
    inner_tolerance: float = 1e-5
    inner_max_iterations: int = 150

    def __post_init__(self) -> None:
        if self.eta is not None and self.eta < 0:
            raise ValueError("penalty factor must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass(frozen=True)
class RelaxedPoint:
    """A point of the relaxed feasible set.

    ``lifted`` is the full flat slot vector, ``s`` the relaxed pairing
    tensor in [0, 1], and ``p`` the auxiliary per-user powers coupled in
    by the big-M rows.
    """

    lifted: np.ndarray
    s: np.ndarray
    p: np.ndarray


def default_eta(instance: ProblemInstance) -> float:
    """Penalty factor ``10 * log2(1 + P_max / noise)``.

    When the instance does not carry the raw noise power, the ratio
    falls back to ``max(gain) * P_max`` (the largest received SNR).
    """
    if instance.noise_watts is not None:
        ratio = instance.p_max / instance.noise_watts
    else:
        ratio = float(instance.gains.max()) * instance.p_max
    if ratio <= 0:
        warnings.warn("degenerate SNR ratio; penalty factor set to 0", stacklevel=2)
        return 0.0
    return float(10.0 * np.log2(1.0 + ratio))


# ---------------------------------------------------------------------------
# Objective pieces of the d.c. decomposition (all over the full flat layout)
# ---------------------------------------------------------------------------


def eval_F(instance: ProblemInstance, lifted: np.ndarray) -> float:
    """Convex part holding both negated rate terms."""
    vals = np.asarray(lifted, dtype=float).reshape(-1)
    half = instance.lifted_dim // 2
    hm, hn = gain_slots(instance)
    mu = coordinate_weights(instance)
    pu, pv = vals[:half], vals[half:]
    return float(
        -(mu[:half] @ np.log2(1.0 + hm * (pu + pv))) - mu[half:] @ np.log2(1.0 + hn * pv)
    )


def eval_G(instance: ProblemInstance, lifted: np.ndarray) -> float:
    """Convex part subtracted from F; cancels the intra-pair interference."""
    vals = np.asarray(lifted, dtype=float).reshape(-1)
    half = instance.lifted_dim // 2
    hm, _ = gain_slots(instance)
    wm = coordinate_weights(instance)[:half]
    pv = vals[half:]
    return float(-(wm @ np.log2(1.0 + hm * pv)))


def eval_H(s: np.ndarray) -> float:
    return float(np.sum(s))


def eval_M(s: np.ndarray) -> float:
    return float(np.sum(np.square(s)))


def grad_G(instance: ProblemInstance, lifted_ref: np.ndarray) -> np.ndarray:
    """Exact gradient of :func:`eval_G`; nonzero only on v slots."""
    vals = np.asarray(lifted_ref, dtype=float).reshape(-1)
    half = instance.lifted_dim // 2
    hm, _ = gain_slots(instance)
    wm = coordinate_weights(instance)[:half]
    out = np.zeros_like(vals)
    out[half:] = -wm * hm / ((1.0 + hm * vals[half:]) * LN2)
    return out


def grad_M(s_ref: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(s_ref, dtype=float)


def penalized_objective(instance: ProblemInstance, point: RelaxedPoint, eta: float) -> float:
    """The exact penalized objective the SCA iterates must not increase."""
    return (
        eval_F(instance, point.lifted)
        - eval_G(instance, point.lifted)
        + eta * (eval_H(point.s) - eval_M(point.s))
    )


# ---------------------------------------------------------------------------
# Compact variable space over the admissible triples
# ---------------------------------------------------------------------------


class ScaSpace:
    """Index bookkeeping between RelaxedPoint tensors and the flat
    optimization vector ``x = [q_u | q_v | s | p]`` over admissible triples.
    """

    def __init__(self, instance: ProblemInstance, allowed: np.ndarray | None = None):
        self.instance = instance
        mask = valid_pair_mask(instance)
        if allowed is not None:
            mask = mask & np.asarray(allowed, dtype=bool)
        self.mask = mask
        self.triples = [tuple(map(int, t)) for t in np.argwhere(mask)]
        self.t = len(self.triples)
        if self.t == 0:
            raise ValueError("no admissible pairs")
        n_f, k = instance.num_subcarriers, instance.num_users
        self.n_f, self.k = n_f, k
        self.num_vars = 3 * self.t + n_f * k
        self.s_off = 2 * self.t
        self.p_off = 3 * self.t
        g, w = instance.gains, instance.weights
        idx = np.array(self.triples)
        self.i_idx, self.m_idx, self.n_idx = idx[:, 0], idx[:, 1], idx[:, 2]
        self.hm = g[self.i_idx, self.m_idx]
        self.hn = g[self.i_idx, self.n_idx]
        self.wm = w[self.m_idx]
        self.wn = w[self.n_idx]
        half = instance.lifted_dim // 2
        self.flat_u = np.array(
            [delta_index(i + 1, m + 1, n + 1, k) - 1 for i, m, n in self.triples]
        )
        self.flat_v = self.flat_u + half
        self.pm_col = self.p_off + self.i_idx * k + self.m_idx
        self.pn_col = self.p_off + self.i_idx * k + self.n_idx

    def pack(self, point: RelaxedPoint) -> np.ndarray:
        x = np.zeros(self.num_vars)
        lifted = np.asarray(point.lifted, dtype=float).reshape(-1)
        x[: self.t] = lifted[self.flat_u]
        x[self.t : 2 * self.t] = lifted[self.flat_v]
        x[self.s_off : self.p_off] = np.asarray(point.s, dtype=float)[
            self.i_idx, self.m_idx, self.n_idx
        ]
        x[self.p_off :] = np.asarray(point.p, dtype=float).reshape(-1)
        return x

    def unpack(self, x: np.ndarray) -> RelaxedPoint:
        lifted = np.zeros(self.instance.lifted_dim)
        lifted[self.flat_u] = np.maximum(x[: self.t], 0.0)
        lifted[self.flat_v] = np.maximum(x[self.t : 2 * self.t], 0.0)
        s = np.zeros((self.n_f, self.k, self.k))
        s[self.i_idx, self.m_idx, self.n_idx] = np.clip(x[self.s_off : self.p_off], 0.0, 1.0)
        p = np.maximum(x[self.p_off :].reshape(self.n_f, self.k), 0.0)
        return RelaxedPoint(lifted, s, p)

    def polytope(self) -> LinearProgram:
        """Rows for C1, C3 and the big-M coupling C5-C7 (C2b/C8 as bounds)."""
        t, nv = self.t, self.num_vars
        p_max = self.instance.p_max
        rows: list[np.ndarray] = []
        bounds: list[float] = []
        budget = np.zeros(nv)
        budget[: 2 * t] = 1.0
        rows.append(budget)
        bounds.append(p_max)
        for i in range(self.n_f):
            row = np.zeros(nv)
            row[self.s_off + np.flatnonzero(self.i_idx == i)] = 1.0
            rows.append(row)
            bounds.append(1.0)
        ar = np.arange(t)
        for q_cols, p_cols in ((ar, self.pm_col), (t + ar, self.pn_col)):
            c5 = np.zeros((t, nv))
            c5[ar, q_cols] = 1.0
            c5[ar, self.s_off + ar] = -p_max
            rows.extend(c5)
            bounds.extend([0.0] * t)
            c6 = np.zeros((t, nv))
            c6[ar, q_cols] = 1.0
            c6[ar, p_cols] = -1.0
            rows.extend(c6)
            bounds.extend([0.0] * t)
            c7 = np.zeros((t, nv))
            c7[ar, p_cols] = 1.0
            c7[ar, q_cols] = -1.0
            c7[ar, self.s_off + ar] = p_max
            rows.extend(c7)
            bounds.extend([p_max] * t)
        ub = np.full(nv, np.inf)
        ub[self.s_off : self.p_off] = 1.0
        return LinearProgram(
            np.zeros(nv), np.vstack(rows), np.asarray(bounds), upper_bounds=ub
        )

    def violations(self, point: RelaxedPoint, slack: float = 1e-8) -> list[str]:
        """Names of relaxed-set constraints the point breaks."""
        x = self.pack(point)
        out = []
        lp = self.polytope()
        resid = lp.rows @ x - lp.bounds
        if resid[0] > slack * max(1.0, self.instance.p_max):
            out.append("C1")
        for i in range(self.n_f):
            if resid[1 + i] > slack:
                out.append(f"C3[{i}]")
        if np.any(resid[1 + self.n_f :] > slack * max(1.0, self.instance.p_max)):
            out.append("C5-C7")
        if np.any(x < -slack) or np.any(x[self.s_off : self.p_off] > 1 + slack):
            out.append("C2b/C8")
        off = np.asarray(point.s)[~self.mask]
        if np.any(np.abs(off) > slack):
            out.append("masked-pair")
        return out


def build_sca_subproblem(
    instance: ProblemInstance,
    point_k: RelaxedPoint,
    config: ScaConfig,
    *,
    space: ScaSpace | None = None,
    eta: float | None = None,
) -> ConvexSubproblem:
    """Touching convex upper bound of the penalized objective at ``point_k``."""
    space = space or ScaSpace(instance)
    eta = default_eta(instance) if eta is None else eta
    bad = space.violations(point_k)
    if bad:
        raise ValueError(f"expansion point violates {bad}")

    xk = space.pack(point_k)
    qv_k = xk[space.t : 2 * space.t]
    s_k = xk[space.s_off : space.p_off]
    hm, hn, wm, wn = space.hm, space.hn, space.wm, space.wn
    gslope = -wm * hm / ((1.0 + hm * qv_k) * LN2)  # dG/dq_v at point_k

    lin = np.zeros(space.num_vars)
    lin[space.t : 2 * space.t] = -gslope
    lin[space.s_off : space.p_off] = eta * (1.0 - 2.0 * s_k)
    g_k = float(-(wm @ np.log2(1.0 + hm * qv_k)))
    const = -g_k + float(gslope @ qv_k) + eta * float(s_k @ s_k)

    def value(x: np.ndarray) -> float:
        qu = x[: space.t]
        qv = x[space.t : 2 * space.t]
        f = float(-(wm @ np.log2(1.0 + hm * (qu + qv))) - wn @ np.log2(1.0 + hn * qv))
        return f + float(lin @ x) + const

    def gradient(x: np.ndarray) -> np.ndarray:
        qu = x[: space.t]
        qv = x[space.t : 2 * space.t]
        du = -wm * hm / ((1.0 + hm * (qu + qv)) * LN2)
        dv = du - wn * hn / ((1.0 + hn * qv) * LN2)
        g = lin.copy()
        g[: space.t] += du
        g[space.t : 2 * space.t] += dv
        return g

    return ConvexSubproblem(
        value=value,
        gradient=gradient,
        polytope=space.polytope(),
        tolerance=config.inner_tolerance,
        max_iterations=config.inner_max_iterations,
    )


def round_assignment(s_relaxed: np.ndarray) -> SubcarrierAssignment:
    """Snap a relaxed pairing tensor to a binary one.

    Per subcarrier the largest entry wins if it reaches 0.5, otherwise
    the subcarrier stays unassigned.  Ties resolve to the lowest
    row-major (m, n) index.
    """
    s = np.asarray(s_relaxed, dtype=float)
    n_f, k = s.shape[0], s.shape[1]
    out = np.zeros_like(s, dtype=np.int8)
    for i in range(n_f):
        flat = int(np.argmax(s[i]))
        if s[i].reshape(-1)[flat] >= 0.5:
            out[i, flat // k, flat % k] = 1
    return SubcarrierAssignment(out)


# ---------------------------------------------------------------------------
# Fixed-assignment power optimization (the re-optimization path)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _PowerSpace:
    """Slot powers of the scheduled triples only; everything else is zero."""

    triples: list[tuple[int, int, int]]
    hm: np.ndarray
    hn: np.ndarray
    wm: np.ndarray
    wn: np.ndarray


def _power_space(instance: ProblemInstance, assignment: SubcarrierAssignment) -> _PowerSpace:
    triples = list(assignment.active_pairs())
    if not triples:
        return _PowerSpace([], np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
    idx = np.array(triples)
    g, w = instance.gains, instance.weights
    return _PowerSpace(
        triples,
        g[idx[:, 0], idx[:, 1]],
        g[idx[:, 0], idx[:, 2]],
        w[idx[:, 1]],
        w[idx[:, 2]],
    )


def _power_value(ps: _PowerSpace, q: np.ndarray) -> float:
    """Negated weighted throughput as a function of slot powers."""
    t = len(ps.triples)
    qu, qv = q[:t], q[t:]
    f = float(-(ps.wm @ np.log2(1.0 + ps.hm * (qu + qv))) - ps.wn @ np.log2(1.0 + ps.hn * qv))
    g = float(-(ps.wm @ np.log2(1.0 + ps.hm * qv)))
    return f - g


@_njit(cache=True)
def _waterfill_split(a, b, h, g, c, mu, qu, qv) -> float:
    """Per-pair KKT solution at budget price ``mu``; returns total power.

    The pair total follows a waterline on the weak user's gain; the
    strong user's share either sits where its marginal rate meets the
    linearization slope or binds at the pair total, in which case the
    merged marginal-rate condition is a quadratic with a guaranteed
    nonnegative root whenever its slope at zero is negative.
    """
    total = 0.0
    for j in range(a.size):
        s0 = 0.0
        if a[j] > 0.0:
            s0 = a[j] / mu - 1.0 / h[j]
            if s0 < 0.0:
                s0 = 0.0
        if b[j] <= 0.0:
            qv0 = 0.0
        elif c[j] > 1e-300:
            qv0 = b[j] / c[j] - 1.0 / g[j]
            if qv0 < 0.0:
                qv0 = 0.0
        else:
            qv0 = np.inf
        if qv0 <= s0:
            qu[j] = s0 - qv0
            qv[j] = qv0
        else:
            qu[j] = 0.0
            cm = c[j] + mu
            a0 = cm - a[j] * h[j] - b[j] * g[j]
            if a0 < 0.0:
                a2 = cm * h[j] * g[j]
                a1 = cm * (h[j] + g[j]) - h[j] * g[j] * (a[j] + b[j])
                disc = a1 * a1 - 4.0 * a2 * a0
                if disc < 0.0:
                    disc = 0.0
                root = (-a1 + np.sqrt(disc)) / (2.0 * a2)
                qv[j] = root if root > 0.0 else 0.0
            else:
                qv[j] = 0.0
        total += qu[j] + qv[j]
    return total


@_njit(cache=True)
def _waterfill_core(a, b, h, g, c, p_max):
    t = a.size
    qu = np.zeros(t)
    qv = np.zeros(t)
    mu_hi = 1e-30
    for j in range(t):
        v = a[j] * h[j] + b[j] * g[j]
        if v > mu_hi:
            mu_hi = v
    tot_hi = _waterfill_split(a, b, h, g, c, mu_hi, qu, qv)
    if tot_hi > p_max:
        # everything saturated even at the top price: scale into budget
        scale = p_max / tot_hi if tot_hi > 0 else 0.0
        for j in range(t):
            qu[j] *= scale
            qv[j] *= scale
        return qu, qv
    mu_lo = mu_hi * 1e-18
    if _waterfill_split(a, b, h, g, c, mu_lo, qu, qv) <= p_max:
        return qu, qv
    for _ in range(120):
        mid = np.sqrt(mu_lo * mu_hi)  # bisect on the log scale
        if _waterfill_split(a, b, h, g, c, mid, qu, qv) > p_max:
            mu_lo = mid
        else:
            mu_hi = mid
        if mu_hi / mu_lo < 1.0 + 1e-13:
            break
    tot = _waterfill_split(a, b, h, g, c, mu_hi, qu, qv)
    if tot > p_max > 0.0 and tot > 0.0:
        scale = p_max / tot
        for j in range(t):
            qu[j] *= scale
            qv[j] *= scale
    return qu, qv


def _waterfill_step(ps: _PowerSpace, qv_ref: np.ndarray, p_max: float) -> np.ndarray:
    """Exact minimizer of the linearized subproblem over the budget simplex."""
    a = ps.wm / LN2  # weak-user log coefficient
    b = ps.wn / LN2  # strong-user log coefficient
    c = ps.wm * ps.hm / ((1.0 + ps.hm * qv_ref) * LN2)  # linearized slope on q_v
    qu, qv = _waterfill_core(a, b, ps.hm, ps.hn, c, p_max)
    return np.concatenate([qu, qv])


def optimize_powers(
    instance: ProblemInstance,
    assignment: SubcarrierAssignment,
    *,
    init: PowerAllocation | None = None,
    objective_tolerance: float = 1e-9,
    max_iterations: int = 60,
) -> Allocation:
    """Best powers for a fixed binary assignment via the same SCA descent.

    With the schedule frozen, each linearized subproblem decomposes per
    pair under the budget constraint and is solved exactly by
    waterfilling instead of an iterative inner solver.  Deterministic
    multi-start (caller's powers, equal split, all power on the
    interference-free slot) guards against poor local optima; the
    returned objective is never below the value of the supplied ``init``.
    """
    ps = _power_space(instance, assignment)
    t = len(ps.triples)
    if t == 0:
        return make_allocation(
            instance,
            PowerAllocation.zeros(instance.num_subcarriers, instance.num_users),
            assignment,
        )
    p_max = instance.p_max
    per = p_max / t

    starts = [np.concatenate([np.full(t, per / 2), np.full(t, per / 2)])]
    starts.append(np.concatenate([np.zeros(t), np.full(t, per)]))
    if init is not None:
        q0 = np.zeros(2 * t)
        for j, (i, m, n) in enumerate(ps.triples):
            if m == n:
                q0[j] = q0[t + j] = 0.5 * init.p[i, m]
            else:
                q0[j] = init.p[i, m]
                q0[t + j] = init.p[i, n]
        total = q0.sum()
        if total > p_max:
            q0 *= p_max / total
        starts.insert(0, q0)

    best_q, best_val = None, np.inf
    for q in starts:
        val = _power_value(ps, q)
        for _ in range(max_iterations):
            q_new = _waterfill_step(ps, q[t:], p_max)
            new_val = _power_value(ps, q_new)
            if new_val > val - objective_tolerance * (1 + abs(val)):
                if new_val < val:
                    q, val = q_new, new_val
                break
            q, val = q_new, new_val
        if val < best_val:
            best_q, best_val = q, val

    assert best_q is not None
    p = np.zeros((instance.num_subcarriers, instance.num_users))
    for j, (i, m, n) in enumerate(ps.triples):
        if m == n:
            p[i, m] = best_q[j] + best_q[t + j]
        else:
            p[i, m] = best_q[j]
            p[i, n] = best_q[t + j]
    # land exactly inside the budget despite float noise
    total = sum(p[i, m] if m == n else p[i, m] + p[i, n] for i, m, n in ps.triples)
    if total > p_max:
        p *= p_max / total
    return make_allocation(instance, PowerAllocation(p), assignment)


# ---------------------------------------------------------------------------
# The full relaxation solver
# ---------------------------------------------------------------------------


class ScaRun(NamedTuple):
    allocation: Allocation
    iterations: int
    penalized_history: tuple[float, ...]
    terminal_point: RelaxedPoint
    eta: float


def _greedy_start(space: ScaSpace) -> RelaxedPoint:
    """Deterministic binary-leaning start: per subcarrier, schedule the
    pair with the best rate at an equal share of the budget.

    A strictly interior uniform start stalls: with the penalty factor at
    its default magnitude the linearized penalty pushes every relaxed
    indicator below a half whenever three or more pairs share a
    subcarrier, and the loop converges to a fractional point with most
    subcarriers unassignable.  Starting at a binary vertex keeps the
    penalty linearization aligned with a feasible schedule from the
    first iteration.
    """
    inst = space.instance
    per_sc = inst.p_max / inst.num_subcarriers
    s = np.zeros((space.n_f, space.k, space.k))
    lifted = np.zeros(inst.lifted_dim)
    p = np.zeros((space.n_f, space.k))
    fracs = np.linspace(0.0, 1.0, 9)
    for i in range(space.n_f):
        local = np.flatnonzero(space.i_idx == i)
        best_val, best_j, best_frac = -np.inf, -1, 0.5
        for j in local:
            hm, hn = space.hm[j], space.hn[j]
            wm, wn = space.wm[j], space.wn[j]
            if space.m_idx[j] == space.n_idx[j]:
                val, frac = wm * np.log2(1.0 + hm * per_sc), 0.5
            else:
                qv = fracs * per_sc
                qu = per_sc - qv
                vals = wm * np.log2(1 + hm * qu / (hm * qv + 1)) + wn * np.log2(1 + hn * qv)
                arg = int(np.argmax(vals))
                val, frac = float(vals[arg]), float(fracs[arg])
            if val > best_val + 1e-15:
                best_val, best_j, best_frac = val, int(j), frac
        j = best_j
        i_, m, n = space.triples[j]
        s[i_, m, n] = 1.0
        qv = best_frac * per_sc if m != n else per_sc / 2
        qu = per_sc - qv
        lifted[space.flat_u[j]] = qu
        lifted[space.flat_v[j]] = qv
        if m == n:
            p[i_, m] = qu
        else:
            p[i_, m] = qu
            p[i_, n] = qv
    return RelaxedPoint(lifted, s, p)


def solve_sca_run(
    instance: ProblemInstance,
    config: ScaConfig | None = None,
    *,
    allowed: np.ndarray | None = None,
    trace: list[dict] | None = None,
) -> ScaRun:
    """Run the penalized SCA loop and return the rounded allocation."""
    cfg = config or ScaConfig()
    eta = default_eta(instance) if cfg.eta is None else cfg.eta
    space = ScaSpace(instance, allowed)
    point = _greedy_start(space)
    cur = penalized_objective(instance, point, eta)
    history = [cur]
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        sub = build_sca_subproblem(instance, point, cfg, space=space, eta=eta)
        run = frank_wolfe(sub, space.pack(point))
        cand = space.unpack(run.point)
        new = penalized_objective(instance, cand, eta)
        if new > cur + 1e-12:
            break  # inner solver made no usable progress
        point = cand
        history.append(new)
        if trace is not None:
            s_dev = float(np.max(np.abs(point.s - np.round(point.s))))
            trace.append(
                {
                    "k": iterations,
                    "penalized_objective": new,
                    "max_s_deviation": s_dev,
                    "inner_gap": run.gap,
                }
            )
        done = abs(cur - new) <= cfg.objective_tolerance * (1.0 + abs(cur))
        cur = new
        if done:
            break
    assignment = round_assignment(point.s)
    init = recover(instance, LiftedPower(point.lifted), assignment)
    allocation = optimize_powers(instance, assignment, init=init)
    return ScaRun(allocation, iterations, tuple(history), point, eta)


def solve_sca(
    instance: ProblemInstance,
    config: ScaConfig | None = None,
    *,
    allowed: np.ndarray | None = None,
) -> Allocation:
    """Suboptimal joint power and subcarrier allocation."""
    return solve_sca_run(instance, config, allowed=allowed).allocation
