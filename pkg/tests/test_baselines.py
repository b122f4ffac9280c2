import numpy as np
import pytest
from conftest import desk_instance

from noma_alloc import oracle
from noma_alloc.baselines import singleton_mask, solve_oma, solve_random_pairing
from noma_alloc.model import ProblemInstance, check_feasible
from noma_alloc.polyblock import solve_optimal


class TestSolveOma:
    def test_single_user_equals_unrestricted(self):
        inst = ProblemInstance(1, 1, 1.0, np.array([1.0]), np.array([[1.0]]))
        assert solve_oma(inst).objective == pytest.approx(
            solve_optimal(inst).objective, abs=1e-9
        )

    def test_best_user_takes_the_budget(self):
        inst = ProblemInstance(2, 1, 1.0, np.ones(2), np.array([[1.0, 4.0]]))
        alloc = solve_oma(inst)
        assert alloc.objective == pytest.approx(np.log2(5.0), abs=1e-6)
        assert list(alloc.assignment.active_pairs()) == [(0, 1, 1)]

    def test_only_singletons_scheduled(self):
        for seed in range(6):
            inst = desk_instance(5100 + seed)
            alloc = solve_oma(inst, max_vertices=200)
            for i, m, n in alloc.assignment.active_pairs():
                assert m == n
            assert check_feasible(inst, alloc.power, alloc.assignment).feasible

    def test_never_beats_unrestricted(self):
        for seed in range(8):
            inst = desk_instance(5200 + seed)
            oma = solve_oma(inst, max_vertices=200)
            full = solve_optimal(inst, max_vertices=300)
            assert oma.objective <= full.objective + 1e-6

    def test_matches_masked_oracle(self):
        for seed in range(5):
            inst = desk_instance(5300 + seed, k=2, n_f=2)
            oma = solve_oma(inst, max_vertices=300)
            ref = oracle.brute_force_solve(inst, allowed=singleton_mask(inst))
            assert oma.objective == pytest.approx(ref.objective, abs=1e-2)


class TestRandomPairing:
    def test_deterministic_per_seed(self):
        inst = desk_instance(5400, k=3, n_f=2)
        a = solve_random_pairing(inst, 11)
        b = solve_random_pairing(inst, 11)
        assert a.objective == b.objective
        assert np.array_equal(a.assignment.s, b.assignment.s)
        assert np.array_equal(a.power.p, b.power.p)

    def test_single_user_reduces_to_oma(self):
        inst = ProblemInstance(1, 2, 1.0, np.array([1.0]), np.array([[1.0], [2.0]]))
        rnd = solve_random_pairing(inst, 0)
        oma = solve_oma(inst)
        assert rnd.objective == pytest.approx(oma.objective, abs=1e-6)

    def test_feasible_and_dominated(self):
        inst = desk_instance(5500, k=3, n_f=2)
        full = solve_optimal(inst, max_vertices=300)
        vals = []
        for seed in range(30):
            alloc = solve_random_pairing(inst, seed)
            assert check_feasible(inst, alloc.power, alloc.assignment).feasible
            assert alloc.objective <= full.objective + 1e-6
            vals.append(alloc.objective)
        assert np.mean(vals) <= full.objective + 1e-6

    def test_draws_vary_with_seed(self):
        inst = desk_instance(5600, k=3, n_f=3)
        keys = {
            tuple(solve_random_pairing(inst, seed).assignment.active_pairs())
            for seed in range(12)
        }
        assert len(keys) > 1
