"""Monte-Carlo generation of problem instances for a single-cell downlink.

Users drop uniformly over an annulus around the base station; the
channel combines a log-distance path loss with i.i.d. unit-mean
Rayleigh fading per subcarrier, normalized by the per-subcarrier noise
power.  Weights are distances normalized by the farthest user, which
prioritizes the cell edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance


@dataclass(frozen=True)
class ScenarioConfig:
    num_users: int
    num_subcarriers: int = 64
    bandwidth_hz: float = 5e6
    carrier_hz: float = 2.5e9  # metadata only
    inner_radius_m: float = 30.0
    outer_radius_m: float = 600.0
    noise_dbm_per_subcarrier: float = -128.0
    pathloss_exponent: float = 3.6
    pathloss_intercept_db: float = 30.0  # at 1 m
    shadowing_sigma_db: float = 0.0  # log-normal shadowing, off by default
    uniform_over_area: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.inner_radius_m < self.outer_radius_m:
            raise ValueError("need 0 < inner radius < outer radius")
        if self.pathloss_exponent <= 2:
            raise ValueError("path loss exponent must exceed 2")
        if not np.isfinite(self.noise_dbm_per_subcarrier):
            raise ValueError("noise power must be finite")
        if self.num_users < 1 or self.num_subcarriers < 1:
            raise ValueError("need at least one user and one subcarrier")


@dataclass(frozen=True)
class UserDrop:
    distances_m: np.ndarray  # (K,)
    rho: np.ndarray  # (K,) linear path loss (and shadowing) factors
    fading_power: np.ndarray  # (N_F, K) unit-mean exponential |h|^2


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


def pathloss_linear(config: ScenarioConfig, distance_m: float) -> float:
    """Linear received-power factor of the log-distance path loss model."""
    if distance_m < 1.0:
        raise ValueError("path loss model valid for distances >= 1 m")
    loss_db = config.pathloss_intercept_db + 10.0 * config.pathloss_exponent * np.log10(
        distance_m
    )
    return float(10.0 ** (-loss_db / 10.0))


def drop_users(config: ScenarioConfig, rng: np.random.Generator) -> UserDrop:
    """One random drop: positions, large-scale factors, small-scale fading."""
    k, n_f = config.num_users, config.num_subcarriers
    if config.uniform_over_area:
        # uniform over the annulus area: radius CDF proportional to r^2
        r2 = rng.uniform(config.inner_radius_m**2, config.outer_radius_m**2, size=k)
        distances = np.sqrt(r2)
    else:
        distances = rng.uniform(config.inner_radius_m, config.outer_radius_m, size=k)
    rho = np.array([pathloss_linear(config, d) for d in distances])
    if config.shadowing_sigma_db > 0:
        shadow_db = rng.normal(0.0, config.shadowing_sigma_db, size=k)
        rho = rho * 10.0 ** (shadow_db / 10.0)
    fading = rng.exponential(1.0, size=(n_f, k))
    return UserDrop(distances, rho, fading)


def build_instance(config: ScenarioConfig, rng: np.random.Generator) -> ProblemInstance:
    """Normalized-gain instance for one drop; needs p_max set separately.

    Returned gains are ``rho * |h|^2 / noise`` per watt; weights are the
    distances normalized by the farthest user (so max weight is 1).
    """
    drop = drop_users(config, rng)
    noise_w = dbm_to_watts(config.noise_dbm_per_subcarrier)
    gains = drop.rho[None, :] * drop.fading_power / noise_w
    weights = drop.distances_m / drop.distances_m.max()
    # p_max is an experiment axis, not scenario data; callers override it.
    return ProblemInstance(
        config.num_users,
        config.num_subcarriers,
        p_max=1.0,
        weights=weights,
        gains=np.maximum(gains, np.finfo(float).tiny),
        noise_watts=noise_w,
    )


def instance_for_drop(
    config: ScenarioConfig, p_max_watts: float, *, drop_index: int = 0
) -> ProblemInstance:
    """Deterministic instance for (config.seed, drop_index) at a power budget."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, drop_index]))
    base = build_instance(config, rng)
    return ProblemInstance(
        base.num_users,
        base.num_subcarriers,
        p_max_watts,
        base.weights,
        base.gains,
        noise_watts=base.noise_watts,
    )
