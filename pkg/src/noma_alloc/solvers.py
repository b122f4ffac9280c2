"""Dense linear programming and convex-over-polytope subproblem solvers.

The package deliberately carries its own small simplex implementation so
that every numerical path is deterministic and dependency free.  The
Frank-Wolfe loop reuses the simplex as its linear-minimization oracle,
with warm-started re-solves when only the objective changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

_ZTOL = 1e-9  # reduced-cost optimality tolerance
_PIVOT_MIN = 1e-11  # pivots smaller than this are numerically meaningless
_PIVOT_OK = 1e-9  # eligible pivot threshold
_FEAS_TOL = 1e-8


class DegeneratePivotError(RuntimeError):
    """Simplex met a pivot too small to trust (or stalled)."""


class SolverError(RuntimeError):
    """An iterative solver failed; message carries the context."""


@dataclass(frozen=True)
class LinearProgram:
    """maximize c @ x  s.t.  A x <= b,  lb <= x (<= ub).

    ``lower_bounds`` defaults to zero and may contain ``-inf``;
    ``upper_bounds`` is optional and may contain ``+inf``.
    """

    objective: np.ndarray
    rows: np.ndarray
    bounds: np.ndarray
    lower_bounds: np.ndarray | None = None
    upper_bounds: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        a = np.asarray(self.rows, dtype=float)
        if a.size == 0:
            a = a.reshape(0, c.size)
        b = np.atleast_1d(np.asarray(self.bounds, dtype=float))
        if c.ndim != 1 or c.size < 1:
            raise ValueError("objective must be a nonempty vector")
        if a.ndim != 2 or a.shape[1] != c.size or a.shape[0] != b.size:
            raise ValueError(f"inconsistent LP shapes: c{c.shape} A{a.shape} b{b.shape}")
        lb = (
            np.zeros(c.size)
            if self.lower_bounds is None
            else np.asarray(self.lower_bounds, dtype=float).reshape(-1)
        )
        ub = (
            np.full(c.size, np.inf)
            if self.upper_bounds is None
            else np.asarray(self.upper_bounds, dtype=float).reshape(-1)
        )
        if lb.size != c.size or ub.size != c.size:
            raise ValueError("bound vectors must match variable count")
        if not np.all(np.isfinite(c)) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("LP coefficients must be finite")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb == np.inf) or np.any(
            ub == -np.inf
        ):
            raise ValueError("invalid bound values")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        for name, arr in (("objective", c), ("rows", a), ("bounds", b), ("lb", lb), ("ub", ub)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, {"lb": "lower_bounds", "ub": "upper_bounds"}.get(name, name), arr)

    @property
    def num_variables(self) -> int:
        return self.objective.size


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float


def _apply_pivot(
    tab: np.ndarray, basis: np.ndarray, zrow: np.ndarray | None, pr: int, pc: int
) -> None:
    tab[pr] = tab[pr] / tab[pr, pc]
    col = tab[:, pc].copy()
    col[pr] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        tab[nz] -= np.outer(col[nz], tab[pr])
    if zrow is not None and zrow[pc] != 0.0:
        zrow -= zrow[pc] * tab[pr]
    basis[pr] = pc


def _pivot_to_optimum(
    tab: np.ndarray, basis: np.ndarray, zrow: np.ndarray, limit_cols: int
) -> str:
    """Primal simplex iterations: Dantzig rule, Bland fallback on stalling."""
    nrows = tab.shape[0]
    bland = False
    stale = 0
    stale_switch = 64 + 2 * (nrows + limit_cols)
    for _ in range(200_000):
        red = zrow[:limit_cols]
        if bland:
            below = np.flatnonzero(red < -_ZTOL)
            if below.size == 0:
                return "optimal"
            pc = int(below[0])
        else:
            pc = int(np.argmin(red))
            if red[pc] >= -_ZTOL:
                return "optimal"
        col = tab[:, pc]
        rhs = tab[:, -1]
        ok = col > _PIVOT_OK
        if not ok.any():
            if (col > _PIVOT_MIN).any():
                raise DegeneratePivotError(
                    f"pivot column {pc} has only entries below {_PIVOT_OK:g}"
                )
            return "unbounded"
        ratios = np.where(ok, rhs / np.where(ok, col, 1.0), np.inf)
        best = ratios.min()
        tie = np.flatnonzero(ratios <= best + 1e-12)
        pr = int(tie[np.argmin(basis[tie])]) if bland else int(tie[0])
        if tab[pr, pc] < _PIVOT_MIN:
            raise DegeneratePivotError(f"pivot element {tab[pr, pc]:g} below {_PIVOT_MIN:g}")
        degenerate = rhs[pr] <= 1e-12
        _apply_pivot(tab, basis, zrow, pr, pc)
        stale = stale + 1 if degenerate else 0
        if stale > stale_switch:
            bland = True
    raise DegeneratePivotError("simplex exceeded pivot limit")


@_njit(cache=True)
def _canonical_pivots(tab: np.ndarray, basis: np.ndarray, ncols: int) -> int:
    """Tight simplex loop on a tableau whose last row is the objective.

    Same pivot rules as :func:`_pivot_to_optimum`: Dantzig entering with
    a Bland fallback after stalling, first-index / lowest-basis ties.
    Returns 0 optimal, 1 unbounded, 2 degenerate pivot, 3 pivot limit.
    """
    nrows = tab.shape[0] - 1
    width = tab.shape[1]
    bland = False
    stale = 0
    stale_switch = 64 + 2 * (nrows + ncols)
    for _ in range(200_000):
        pc = -1
        if bland:
            for j in range(ncols):
                if tab[nrows, j] < -_ZTOL:
                    pc = j
                    break
        else:
            best = -_ZTOL
            for j in range(ncols):
                v = tab[nrows, j]
                if v < best:
                    best = v
                    pc = j
        if pc < 0:
            return 0
        best_ratio = np.inf
        for i in range(nrows):
            aij = tab[i, pc]
            if aij > _PIVOT_OK:
                r = tab[i, -1] / aij
                if r < best_ratio:
                    best_ratio = r
        if best_ratio == np.inf:
            for i in range(nrows):
                if tab[i, pc] > _PIVOT_MIN:
                    return 2
            return 1
        pr = -1
        for i in range(nrows):
            aij = tab[i, pc]
            if aij > _PIVOT_OK and tab[i, -1] / aij <= best_ratio + 1e-12:
                if not bland:
                    pr = i
                    break
                if pr < 0 or basis[i] < basis[pr]:
                    pr = i
        if tab[pr, pc] < _PIVOT_MIN:
            return 2
        degenerate = tab[pr, -1] <= 1e-12
        piv = tab[pr, pc]
        for j in range(width):
            tab[pr, j] /= piv
        for i in range(nrows + 1):
            if i != pr:
                f = tab[i, pc]
                if f != 0.0:
                    for j in range(width):
                        tab[i, j] -= f * tab[pr, j]
        basis[pr] = pc
        if degenerate:
            stale += 1
            if stale > stale_switch:
                bland = True
        else:
            stale = 0
    return 3


_CANONICAL_STATUS = {1: "unbounded", 2: "degenerate pivot", 3: "pivot limit"}


def canonical_maximize(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """maximize c @ x s.t. a x <= b, x >= 0, for b >= 0 (slack basis start).

    Low-overhead path for hot loops that build many small LPs of this
    shape; general inputs belong in :func:`solve_lp`.
    """
    m, n = a.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[np.arange(m), n + np.arange(m)] = 1.0
    tab[:m, -1] = b
    tab[m, :n] = -c
    basis = n + np.arange(m)
    code = _canonical_pivots(tab, basis, n + m)
    if code == 1:
        raise SolverError("canonical simplex returned unbounded")
    if code != 0:
        raise DegeneratePivotError(f"canonical simplex: {_CANONICAL_STATUS[code]}")
    x = np.zeros(n + m)
    x[basis] = np.maximum(tab[:m, -1], 0.0)
    return x[:n]


class _StandardForm:
    """Shifted / split representation: max ch @ xh, Ah xh <= bh, xh >= 0."""

    def __init__(self, lp: LinearProgram):
        n = lp.num_variables
        lb, ub = lp.lower_bounds, lp.upper_bounds
        self.shift = np.where(np.isfinite(lb), lb, 0.0)
        self.split = ~np.isfinite(lb)
        # column j of the original variable -> [start, start+1) or size-2 slice
        cols = []
        start = 0
        for j in range(n):
            width = 2 if self.split[j] else 1
            cols.append(start)
            start += width
        self.col_start = cols
        self.width = start

        def expand(mat: np.ndarray) -> np.ndarray:
            out = np.zeros((mat.shape[0], self.width))
            for j in range(n):
                cj = self.col_start[j]
                out[:, cj] = mat[:, j]
                if self.split[j]:
                    out[:, cj + 1] = -mat[:, j]
            return out

        rows = [expand(lp.rows)] if lp.rows.shape[0] else []
        rhs = [lp.bounds - lp.rows @ self.shift] if lp.rows.shape[0] else []
        fin_ub = np.isfinite(ub)
        if fin_ub.any():
            sel = np.flatnonzero(fin_ub)
            ub_rows = np.zeros((sel.size, n))
            ub_rows[np.arange(sel.size), sel] = 1.0
            rows.append(expand(ub_rows))
            rhs.append(ub[sel] - self.shift[sel])
        self.a = np.vstack(rows) if rows else np.zeros((0, self.width))
        self.b = np.concatenate(rhs) if rhs else np.zeros(0)
        self.n_orig = n

    def expand_cost(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(self.width)
        for j in range(self.n_orig):
            cj = self.col_start[j]
            out[cj] = c[j]
            if self.split[j]:
                out[cj + 1] = -c[j]
        return out

    def collapse(self, xh: np.ndarray) -> np.ndarray:
        x = np.empty(self.n_orig)
        for j in range(self.n_orig):
            cj = self.col_start[j]
            x[j] = xh[cj] - (xh[cj + 1] if self.split[j] else 0.0)
        return x + self.shift


class SimplexEngine:
    """Two-phase tableau simplex over a fixed constraint set.

    The engine keeps its final basis, so repeated solves with different
    objectives (the Frank-Wolfe hot path) continue from the previous
    optimal vertex instead of re-running phase 1.
    """

    def __init__(self, lp: LinearProgram):
        self.form = _StandardForm(lp)
        self.nstruct = self.form.width
        self.nrows = self.form.b.size
        self.ncols = self.nstruct + self.nrows  # structural + slack
        self._tab: np.ndarray | None = None  # rows x (ncols + 1), rhs last
        self._basis: np.ndarray | None = None
        self._feasible: bool | None = None

    # -- tableau plumbing ---------------------------------------------------

    def _fresh_tableau(self) -> None:
        a, b = self.form.a, self.form.b
        flip = b < 0
        sgn = np.where(flip, -1.0, 1.0)
        art_rows = np.flatnonzero(flip)
        n_art = art_rows.size
        tab = np.zeros((self.nrows, self.ncols + n_art + 1))
        tab[:, : self.nstruct] = a * sgn[:, None]
        tab[np.arange(self.nrows), self.nstruct + np.arange(self.nrows)] = sgn
        tab[art_rows, self.ncols + np.arange(n_art)] = 1.0
        tab[:, -1] = b * sgn
        basis = self.nstruct + np.arange(self.nrows)
        basis[art_rows] = self.ncols + np.arange(n_art)
        if n_art:
            cost = np.zeros(self.ncols + n_art)
            cost[self.ncols :] = -1.0
            zrow = self._price(tab, basis, cost)
            self._pivot_loop(tab, basis, zrow, limit_cols=self.ncols + n_art)
            if zrow[-1] < -1e-7:
                self._feasible = False
                return
            self._evict_artificials(tab, basis)
            tab = np.delete(tab, np.s_[self.ncols : self.ncols + n_art], axis=1)
        self._tab = tab
        self._basis = basis
        self._feasible = True

    @staticmethod
    def _price(tab: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> np.ndarray:
        zrow = np.zeros(tab.shape[1])
        zrow[: cost.size] = -cost
        cb = cost[basis]
        nz = np.flatnonzero(cb)
        if nz.size:
            zrow += cb[nz] @ tab[nz]
        return zrow

    def _evict_artificials(self, tab: np.ndarray, basis: np.ndarray) -> None:
        for r in range(self.nrows):
            if basis[r] >= self.ncols:
                row = tab[r, : self.ncols]
                cand = np.flatnonzero(np.abs(row) > _PIVOT_OK)
                if cand.size:
                    _apply_pivot(tab, basis, None, r, int(cand[0]))
                else:
                    tab[r, :] = 0.0  # redundant row, keep inert

    def _pivot_loop(
        self,
        tab: np.ndarray,
        basis: np.ndarray,
        zrow: np.ndarray,
        limit_cols: int,
    ) -> str:
        return _pivot_to_optimum(tab, basis, zrow, limit_cols)

    # -- public solves ------------------------------------------------------

    def solve(self, objective: np.ndarray) -> LpSolution:
        """Maximize ``objective`` over the fixed constraint set."""
        if self._feasible is None:
            self._fresh_tableau()
        if not self._feasible:
            return LpSolution("infeasible", None, float("nan"))
        tab, basis = self._tab, self._basis
        assert tab is not None and basis is not None
        cost = np.zeros(self.ncols)
        cost[: self.nstruct] = self.form.expand_cost(np.asarray(objective, dtype=float))
        zrow = self._price(tab, basis, cost)
        status = self._pivot_loop(tab, basis, zrow, limit_cols=self.ncols)
        if status == "unbounded":
            self._feasible = None  # tableau no longer at an optimum
            return LpSolution("unbounded", None, float("nan"))
        xh = np.zeros(self.ncols)
        in_range = basis < self.ncols
        xh[basis[in_range]] = np.maximum(tab[in_range, -1], 0.0)
        x = self.form.collapse(xh[: self.nstruct])
        return LpSolution("optimal", x, float(np.dot(objective, x)))


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve one LP with the deterministic two-phase simplex."""
    sol = SimplexEngine(lp).solve(lp.objective)
    if sol.status == "optimal":
        assert sol.x is not None
        if lp.rows.shape[0] and np.any(lp.rows @ sol.x > lp.bounds + _FEAS_TOL):
            raise DegeneratePivotError("simplex returned an infeasible point")
    return sol


# ---------------------------------------------------------------------------
# Frank-Wolfe over a polytope
# ---------------------------------------------------------------------------


@dataclass
class ConvexSubproblem:
    """A smooth convex objective minimized over an LP-shaped polytope.

    The ``polytope`` objective vector is ignored; only rows and bounds
    matter.  Convexity of ``value`` over the polytope is the caller's
    contract.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    polytope: LinearProgram
    tolerance: float = 1e-6
    max_iterations: int = 5000


class FwRun(NamedTuple):
    point: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool


def _feasible_in(lp: LinearProgram, x: np.ndarray, tol: float = _FEAS_TOL) -> bool:
    if lp.rows.shape[0] and np.any(lp.rows @ x > lp.bounds + tol):
        return False
    if np.any(x < lp.lower_bounds - tol) or np.any(x > lp.upper_bounds + tol):
        return False
    return True


def _backtrack(value: Callable[[np.ndarray], float], x: np.ndarray, d: np.ndarray,
               fx: float, slope: float) -> tuple[float, float]:
    """Armijo backtracking along x + gamma * d, gamma in (0, 1]."""
    gamma = 1.0
    best_g, best_f = 0.0, fx
    for _ in range(26):
        f_new = value(x + gamma * d)
        if f_new < best_f:
            best_g, best_f = gamma, f_new
        if f_new <= fx + 1e-4 * gamma * slope:
            return gamma, f_new
        gamma *= 0.5
    return best_g, best_f


def frank_wolfe(problem: ConvexSubproblem, start: np.ndarray) -> FwRun:
    """Conditional-gradient minimization with the simplex as oracle.

    The duality gap ``g(x) = grad(x) @ (x - s)`` upper-bounds the
    suboptimality of the returned value; iterates never increase the
    objective.
    """
    x = np.asarray(start, dtype=float).copy()
    if not _feasible_in(problem.polytope, x):
        raise ValueError("Frank-Wolfe start point is infeasible")
    fx = float(problem.value(x))
    if not np.isfinite(fx):
        raise SolverError("objective not finite at the start point")
    engine = SimplexEngine(problem.polytope)
    gap = np.inf
    it = 0
    for it in range(1, problem.max_iterations + 1):
        g = np.asarray(problem.gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise SolverError("gradient not finite during Frank-Wolfe")
        lmo = engine.solve(-g)
        if lmo.status != "optimal":
            raise SolverError(f"linear oracle returned status {lmo.status}")
        s = lmo.x
        assert s is not None
        gap = float(g @ (x - s))
        if gap <= problem.tolerance * (1.0 + abs(fx)):
            return FwRun(x, fx, gap, it, True)
        d = s - x
        gamma, f_new = _backtrack(problem.value, x, d, fx, -gap)
        if gamma == 0.0 or f_new >= fx:
            return FwRun(x, fx, gap, it, False)  # no further numeric progress
        x = x + gamma * d
        fx = f_new
    return FwRun(x, fx, gap, it, False)


def minimize_convex(problem: ConvexSubproblem, start: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimize the subproblem from a feasible start; see :func:`frank_wolfe`."""
    run = frank_wolfe(problem, start)
    return run.point, run.value
