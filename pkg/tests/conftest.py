import numpy as np
import pytest

from noma_alloc.model import ProblemInstance


def desk_instance(seed, *, k=None, n_f=None, p_max=None):
    """Moderate-SNR random instance with gains of order one."""
    rng = np.random.default_rng(seed)
    k = k or int(rng.integers(1, 4))
    n_f = n_f or int(rng.integers(1, 4))
    p_max = p_max if p_max is not None else float(rng.choice([0.1, 1.0, 10.0]))
    gains = rng.lognormal(mean=0.5, sigma=0.9, size=(n_f, k))
    weights = rng.uniform(0.2, 1.0, size=k) if rng.random() < 0.5 else np.ones(k)
    return ProblemInstance(k, n_f, p_max, weights, gains)


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # First solver call compiles the jitted kernels; keep that out of
    # individual test timings.
    from noma_alloc import polyblock

    inst = ProblemInstance(1, 1, 1.0, np.array([1.0]), np.array([[1.0]]))
    polyblock.solve_optimal_run(inst, 1e-3, max_vertices=3)
