import numpy as np
import pytest

from noma_alloc.scenario import (
    ScenarioConfig,
    build_instance,
    dbm_to_watts,
    drop_users,
    instance_for_drop,
    pathloss_linear,
    watts_to_dbm,
)


def cfg(**kw):
    base = dict(num_users=3, num_subcarriers=4, seed=1)
    base.update(kw)
    return ScenarioConfig(**base)


class TestConfig:
    def test_rejects_inverted_radii(self):
        with pytest.raises(ValueError):
            cfg(inner_radius_m=600, outer_radius_m=30)

    def test_rejects_small_exponent(self):
        with pytest.raises(ValueError):
            cfg(pathloss_exponent=1.8)


class TestPathloss:
    def test_intercept_only(self):
        assert pathloss_linear(cfg(), 1.0) == pytest.approx(1e-3, rel=1e-12)

    def test_ten_meters(self):
        assert pathloss_linear(cfg(), 10.0) == pytest.approx(10 ** -6.6, rel=1e-12)

    def test_doubling_ratio(self):
        c = cfg()
        ratio = pathloss_linear(c, 100.0) / pathloss_linear(c, 50.0)
        assert ratio == pytest.approx(2.0 ** -3.6, rel=1e-12)

    def test_rejects_below_one_meter(self):
        with pytest.raises(ValueError):
            pathloss_linear(cfg(), 0.5)


class TestDbm:
    def test_noise_floor(self):
        assert dbm_to_watts(-128.0) == pytest.approx(10 ** -15.8, rel=1e-12)

    def test_roundtrip(self):
        assert watts_to_dbm(dbm_to_watts(45.0)) == pytest.approx(45.0, abs=1e-9)


class TestDropUsers:
    def test_deterministic(self):
        c = cfg()
        a = drop_users(c, np.random.default_rng(5))
        b = drop_users(c, np.random.default_rng(5))
        np.testing.assert_array_equal(a.distances_m, b.distances_m)
        np.testing.assert_array_equal(a.fading_power, b.fading_power)

    def test_distances_inside_annulus(self):
        c = cfg(num_users=200)
        drop = drop_users(c, np.random.default_rng(7))
        assert np.all(drop.distances_m >= c.inner_radius_m)
        assert np.all(drop.distances_m <= c.outer_radius_m)

    def test_degenerate_annulus(self):
        c = cfg(inner_radius_m=599.999, outer_radius_m=600.0)
        drop = drop_users(c, np.random.default_rng(9))
        np.testing.assert_allclose(drop.distances_m, 600.0, atol=1e-2)

    def test_radius_squared_uniform(self):
        # area-uniform drop: r^2 is uniform on [inner^2, outer^2]
        c = cfg(num_users=100_000)
        drop = drop_users(c, np.random.default_rng(11))
        r2 = np.sort(drop.distances_m**2)
        u = (r2 - c.inner_radius_m**2) / (c.outer_radius_m**2 - c.inner_radius_m**2)
        ks = np.max(np.abs(u - (np.arange(1, u.size + 1) - 0.5) / u.size))
        assert ks < 0.01

    def test_fading_unit_mean_exponential(self):
        c = cfg(num_users=4, num_subcarriers=25_000)
        drop = drop_users(c, np.random.default_rng(13))
        h2 = np.sort(drop.fading_power.reshape(-1))
        assert abs(h2.mean() - 1.0) < 0.02
        # Kolmogorov-Smirnov against the unit exponential at the 1% level
        cdf = 1.0 - np.exp(-h2)
        ks = np.max(np.abs(cdf - (np.arange(1, h2.size + 1) - 0.5) / h2.size))
        assert ks < 1.63 / np.sqrt(h2.size)


class TestBuildInstance:
    def test_weights_normalized_by_farthest(self):
        inst = build_instance(cfg(num_users=5), np.random.default_rng(3))
        assert inst.weights.max() == pytest.approx(1.0)
        assert np.all(inst.weights > 0)

    def test_known_weight_ratios(self):
        # weights are distances over the maximum distance
        c = cfg(num_users=3)
        drop = drop_users(c, np.random.default_rng(21))
        inst = build_instance(c, np.random.default_rng(21))
        np.testing.assert_allclose(
            inst.weights, drop.distances_m / drop.distances_m.max(), rtol=1e-12
        )

    def test_gains_positive_finite(self):
        inst = build_instance(cfg(num_users=6, num_subcarriers=16), np.random.default_rng(4))
        assert np.all(inst.gains > 0)
        assert np.all(np.isfinite(inst.gains))

    def test_noise_carried_through(self):
        inst = build_instance(cfg(), np.random.default_rng(5))
        assert inst.noise_watts == pytest.approx(10 ** -15.8, rel=1e-12)

    def test_instance_for_drop_deterministic(self):
        a = instance_for_drop(cfg(), 2.0, drop_index=3)
        b = instance_for_drop(cfg(), 2.0, drop_index=3)
        np.testing.assert_array_equal(a.gains, b.gains)
        other = instance_for_drop(cfg(), 2.0, drop_index=4)
        assert not np.array_equal(a.gains, other.gains)

    def test_shadowing_optional(self):
        base = instance_for_drop(cfg(), 1.0)
        shadowed = instance_for_drop(cfg(shadowing_sigma_db=8.0), 1.0)
        assert not np.array_equal(base.gains, shadowed.gains)
