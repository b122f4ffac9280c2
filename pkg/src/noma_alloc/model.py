"""Domain types and rate formulas for downlink multicarrier NOMA allocation.

Conventions used throughout the package:

* ``K`` users, ``N_F`` subcarriers.  Gains ``H[i, m]`` are normalized
  channel-to-noise ratios (per watt), so ``H * p`` is a plain SNR.
* A subcarrier carries at most one user pair ``(m, n)`` with
  ``H[i, m] <= H[i, n]``; user ``n`` cancels user ``m``'s signal, user
  ``m`` treats user ``n``'s signal as noise.  ``m == n`` is the
  single-user (OMA) case.
* Rates are in bits/s/Hz per subcarrier (log base 2).
* The lifted power vector stacks, for every ``(i, m, n)`` triple, a
  "u" slot (power seen by the weak user ``m``) and a "v" slot (power of
  the strong user ``n``): ``D = 2 * N_F * K**2`` entries, u slots first.
  For ``m == n`` both slots belong to the same user and the user's
  transmit power is their sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

LN2 = float(np.log(2.0))

# Relative tolerance on the total-power budget; iterative solvers land on
# the boundary with floating-point noise.
BUDGET_RTOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ProblemInstance:
    """Complete input of the allocation problem.

    ``gains[i, m]`` is the normalized channel gain of user ``m`` on
    subcarrier ``i`` (strictly positive).  ``noise_watts`` optionally
    carries the raw noise power used when the gains were normalized; it
    is only needed to reproduce the default penalty factor of the
    suboptimal solver.
    """

    num_users: int
    num_subcarriers: int
    p_max: float
    weights: np.ndarray
    gains: np.ndarray
    noise_watts: float | None = None

    def __post_init__(self) -> None:
        if self.num_users < 1 or self.num_subcarriers < 1:
            raise ValueError("need at least one user and one subcarrier")
        if not (self.p_max > 0 and np.isfinite(self.p_max)):
            raise ValueError(f"p_max must be positive and finite, got {self.p_max}")
        w = _readonly(np.asarray(self.weights, dtype=float).reshape(-1))
        g = _readonly(np.asarray(self.gains, dtype=float))
        if w.shape != (self.num_users,):
            raise ValueError(f"weights must have shape ({self.num_users},), got {w.shape}")
        if g.shape != (self.num_subcarriers, self.num_users):
            raise ValueError(
                f"gains must have shape ({self.num_subcarriers}, {self.num_users}), got {g.shape}"
            )
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("weights must lie in [0, 1]")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValueError("gains must be strictly positive and finite")
        if self.noise_watts is not None and not self.noise_watts > 0:
            raise ValueError("noise_watts must be positive when given")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gains", g)

    @property
    def lifted_dim(self) -> int:
        """Length of the lifted power / vertex vectors."""
        return 2 * self.num_subcarriers * self.num_users**2


@dataclass(frozen=True)
class SubcarrierAssignment:
    """Binary pairing tensor ``s[i, m, n]`` (0-based indices)."""

    s: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.s)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"assignment tensor must be (N_F, K, K), got {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("assignment entries must be binary")
        per_sc = arr.reshape(arr.shape[0], -1).sum(axis=1)
        if np.any(per_sc > 1):
            raise ValueError("at most one pair per subcarrier")
        arr = arr.astype(np.int8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "s", arr)

    @classmethod
    def empty(cls, num_subcarriers: int, num_users: int) -> "SubcarrierAssignment":
        return cls(np.zeros((num_subcarriers, num_users, num_users), dtype=np.int8))

    @classmethod
    def from_pairs(
        cls, num_subcarriers: int, num_users: int, pairs: Sequence[tuple[int, int, int]]
    ) -> "SubcarrierAssignment":
        """Build from (subcarrier, m, n) triples, all 0-based."""
        s = np.zeros((num_subcarriers, num_users, num_users), dtype=np.int8)
        for i, m, n in pairs:
            s[i, m, n] = 1
        return cls(s)

    def active_pairs(self) -> Iterator[tuple[int, int, int]]:
        """Yield scheduled (subcarrier, m, n) triples, 0-based."""
        for i, m, n in zip(*np.nonzero(self.s)):
            yield int(i), int(m), int(n)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user per-subcarrier transmit powers ``p[i, m]`` in watts.

    ``p[i, m]`` is the total power user ``m`` receives on subcarrier
    ``i``; unscheduled entries are conventionally zero.
    """

    p: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.p, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"power matrix must be (N_F, K), got {arr.shape}")
        object.__setattr__(self, "p", _readonly(arr))

    @classmethod
    def zeros(cls, num_subcarriers: int, num_users: int) -> "PowerAllocation":
        return cls(np.zeros((num_subcarriers, num_users)))


@dataclass(frozen=True)
class LiftedPower:
    """Flat per-slot power vector of length ``2 * N_F * K**2``.

    Slot ``delta - 1`` is the u slot of triple ``(i, m, n)`` and slot
    ``D/2 + delta - 1`` its v slot, with ``delta = delta_index(i, m, n, K)``.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(v < 0):
            raise ValueError("lifted powers must be nonnegative")
        object.__setattr__(self, "values", _readonly(v))


@dataclass(frozen=True)
class Allocation:
    """Solver output: an assignment, matching powers and their objective."""

    assignment: SubcarrierAssignment
    power: PowerAllocation
    objective: float


@dataclass(frozen=True)
class ConstraintViolation:
    constraint: str
    detail: str
    slack: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[ConstraintViolation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# Rate formulas
# ---------------------------------------------------------------------------


def pair_rate(
    h_m: float, h_n: float, p_m: float, p_n: float, w_m: float, w_n: float
) -> float:
    """Weighted two-user rate on one subcarrier.

    User ``n`` (the better channel, ``h_m <= h_n``) decodes interference
    free after SIC; user ``m`` sees user ``n``'s power as noise.
    """
    if h_m > h_n:
        raise ValueError(f"invalid pairing: weak-user gain {h_m} exceeds strong-user gain {h_n}")
    if p_m < 0 or p_n < 0:
        raise ValueError("powers must be nonnegative")
    return float(
        w_m * np.log2(1.0 + h_m * p_m / (h_m * p_n + 1.0)) + w_n * np.log2(1.0 + h_n * p_n)
    )


def oma_rate(h_m: float, p_total: float, w_m: float) -> float:
    """Weighted single-user rate: the ``m == n`` special case."""
    if p_total < 0:
        raise ValueError("power must be nonnegative")
    return float(w_m * np.log2(1.0 + h_m * p_total))


def sic_valid(instance: ProblemInstance, i: int, m: int, n: int) -> bool:
    """Whether pair (m, n) may be scheduled on subcarrier ``i`` (0-based).

    Requires ``H[i, m] <= H[i, n]``; gain ties (including ``m == n``)
    are oriented canonically by ``m <= n`` so each unordered pair has
    exactly one admissible orientation.
    """
    h_m = instance.gains[i, m]
    h_n = instance.gains[i, n]
    if h_m == h_n:
        return m <= n
    return h_m < h_n


def valid_pair_mask(instance: ProblemInstance) -> np.ndarray:
    """Boolean (N_F, K, K) mask of SIC-admissible pairs."""
    g = instance.gains
    hm = g[:, :, None]
    hn = g[:, None, :]
    k = instance.num_users
    canon = np.arange(k)[:, None] <= np.arange(k)[None, :]
    return (hm < hn) | ((hm == hn) & canon[None, :, :])


def system_throughput(
    instance: ProblemInstance,
    power: PowerAllocation,
    assignment: SubcarrierAssignment,
) -> float:
    """Weighted sum rate of a feasible (power, assignment) pair."""
    report = check_feasible(instance, power, assignment)
    if not report.feasible:
        raise ValueError(f"infeasible allocation: {report.violations[0].detail}")
    total = 0.0
    w = instance.weights
    g = instance.gains
    for i, m, n in assignment.active_pairs():
        if m == n:
            total += oma_rate(g[i, m], power.p[i, m], w[m])
        else:
            total += pair_rate(g[i, m], g[i, n], power.p[i, m], power.p[i, n], w[m], w[n])
    return total


def scheduled_power(power: PowerAllocation, assignment: SubcarrierAssignment) -> float:
    """Total transmit power consumed by scheduled users."""
    total = 0.0
    for i, m, n in assignment.active_pairs():
        total += power.p[i, m] if m == n else power.p[i, m] + power.p[i, n]
    return float(total)


def check_feasible(
    instance: ProblemInstance,
    power: PowerAllocation,
    assignment: SubcarrierAssignment,
) -> FeasibilityReport:
    """Report every violated constraint of the allocation problem.

    The budget check uses an absolute tolerance of ``1e-9 * p_max``.
    """
    violations: list[ConstraintViolation] = []
    s = assignment.s
    n_f, k = instance.num_subcarriers, instance.num_users
    if s.shape != (n_f, k, k):
        raise ValueError("assignment shape does not match instance")
    if power.p.shape != (n_f, k):
        raise ValueError("power shape does not match instance")

    per_sc = s.reshape(n_f, -1).sum(axis=1)
    for i in np.nonzero(per_sc > 1)[0]:
        violations.append(
            ConstraintViolation(
                "C3", f"subcarrier {i} carries {per_sc[i]} pairs", float(per_sc[i] - 1)
            )
        )
    for i, m, n in assignment.active_pairs():
        if not sic_valid(instance, i, m, n):
            violations.append(
                ConstraintViolation(
                    "SIC",
                    f"pair ({m}, {n}) on subcarrier {i} violates the decoding order",
                    float(instance.gains[i, m] - instance.gains[i, n]),
                )
            )
    neg = power.p < 0
    if neg.any():
        worst = float(power.p.min())
        violations.append(
            ConstraintViolation("C4", f"{int(neg.sum())} negative power entries", -worst)
        )
    used = scheduled_power(power, assignment)
    budget_tol = BUDGET_RTOL * instance.p_max
    if used > instance.p_max + budget_tol:
        violations.append(
            ConstraintViolation(
                "C1",
                f"scheduled power {used:.6g} exceeds budget {instance.p_max:.6g}",
                used - instance.p_max,
            )
        )
    return FeasibilityReport(tuple(violations))


def make_allocation(
    instance: ProblemInstance,
    power: PowerAllocation,
    assignment: SubcarrierAssignment,
) -> Allocation:
    """Bundle a feasible allocation with its computed objective."""
    return Allocation(assignment, power, system_throughput(instance, power, assignment))


# ---------------------------------------------------------------------------
# Index mapping between (i, m, n) triples and the flat lifted/vertex layout
# ---------------------------------------------------------------------------


def delta_index(i: int, m: int, n: int, num_users: int) -> int:
    """1-based flat triple index ``(i-1)*K^2 + (m-1)*K + n`` for 1-based i, m, n."""
    k = num_users
    if not (1 <= m <= k and 1 <= n <= k) or i < 1:
        raise ValueError(f"triple ({i}, {m}, {n}) out of range for K={k}")
    return (i - 1) * k * k + (m - 1) * k + n


def inverse_delta(d: int, num_users: int, num_subcarriers: int) -> tuple[int, int, int, str]:
    """Invert the flat index: 1-based ``d`` in 1..D to (i, m, n, half).

    ``half`` is ``"u"`` for the first half of the layout and ``"v"`` for
    the second.
    """
    k = num_users
    dim = 2 * num_subcarriers * k * k
    if not 1 <= d <= dim:
        raise ValueError(f"flat index {d} out of range 1..{dim}")
    half = "u"
    if d > dim // 2:
        half = "v"
        d -= dim // 2
    delta = d - 1
    i = delta // (k * k)
    m = (delta % (k * k)) // k
    n = delta % k
    return i + 1, m + 1, n + 1, half


def index_weight(d: int, instance: ProblemInstance) -> float:
    """Equivalent user weight of flat coordinate ``d`` (1-based).

    u coordinates inherit the weight of the weak user ``m``, v
    coordinates the weight of the strong user ``n``.
    """
    i, m, n, half = inverse_delta(d, instance.num_users, instance.num_subcarriers)
    return float(instance.weights[m - 1] if half == "u" else instance.weights[n - 1])


def coordinate_weights(instance: ProblemInstance) -> np.ndarray:
    """Vector of all D coordinate weights in flat layout order."""
    k = instance.num_users
    wm = np.broadcast_to(instance.weights[:, None], (k, k))
    wn = np.broadcast_to(instance.weights[None, :], (k, k))
    u = np.tile(wm.reshape(-1), instance.num_subcarriers)
    v = np.tile(wn.reshape(-1), instance.num_subcarriers)
    return np.concatenate([u, v])


def gain_slots(instance: ProblemInstance) -> tuple[np.ndarray, np.ndarray]:
    """(H_m, H_n) per triple in flat half layout (length D/2 each)."""
    g = instance.gains
    k = instance.num_users
    hm = np.broadcast_to(g[:, :, None], (instance.num_subcarriers, k, k)).reshape(-1)
    hn = np.broadcast_to(g[:, None, :], (instance.num_subcarriers, k, k)).reshape(-1)
    return hm, hn


def lift(
    instance: ProblemInstance,
    power: PowerAllocation,
    assignment: SubcarrierAssignment,
) -> LiftedPower:
    """Scatter a (power, assignment) pair into the flat slot vector.

    For ``m != n`` the u slot holds ``p[i, m]`` and the v slot holds
    ``p[i, n]``.  For ``m == n`` both slots belong to the same user and
    each carries half the user's power, so slot sums always equal
    scheduled transmit power.
    """
    dim = instance.lifted_dim
    vals = np.zeros(dim)
    half = dim // 2
    k = instance.num_users
    for i, m, n in assignment.active_pairs():
        d = delta_index(i + 1, m + 1, n + 1, k) - 1
        if m == n:
            vals[d] = vals[half + d] = 0.5 * power.p[i, m]
        else:
            vals[d] = power.p[i, m]
            vals[half + d] = power.p[i, n]
    return LiftedPower(vals)


def recover(
    instance: ProblemInstance,
    lifted: LiftedPower,
    assignment: SubcarrierAssignment,
) -> PowerAllocation:
    """Gather slot powers of scheduled pairs back into the (N_F, K) matrix.

    Unscheduled users end up with zero power; for singleton pairs the
    user's power is the sum of both slots.
    """
    p = np.zeros((instance.num_subcarriers, instance.num_users))
    half = instance.lifted_dim // 2
    k = instance.num_users
    for i, m, n in assignment.active_pairs():
        d = delta_index(i + 1, m + 1, n + 1, k) - 1
        if m == n:
            p[i, m] = lifted.values[d] + lifted.values[half + d]
        else:
            p[i, m] = lifted.values[d]
            p[i, n] = lifted.values[half + d]
    return PowerAllocation(p)


def throughput_from_lifted(instance: ProblemInstance, lifted: np.ndarray) -> float:
    """Weighted sum of ``log2`` rate factors evaluated from slot powers.

    Matches :func:`system_throughput` whenever the slot vector was lifted
    from a feasible binary assignment.
    """
    vals = np.asarray(lifted, dtype=float).reshape(-1)
    half = instance.lifted_dim // 2
    hm, hn = gain_slots(instance)
    pu, pv = vals[:half], vals[half:]
    mu = coordinate_weights(instance)
    u = 1.0 + hm * pu / (hm * pv + 1.0)
    v = 1.0 + hn * pv
    return float(mu[:half] @ np.log2(u) + mu[half:] @ np.log2(v))


def subcarrier_bandwidth_hz(total_bandwidth_hz: float, num_subcarriers: int) -> float:
    """Per-subcarrier bandwidth used to convert bits/s/Hz into bits/s."""
    return total_bandwidth_hz / num_subcarriers
