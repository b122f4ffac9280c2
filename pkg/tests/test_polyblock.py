import numpy as np
import pytest
from conftest import desk_instance

from noma_alloc import oracle, polyblock, sca
from noma_alloc.model import (
    LiftedPower,
    ProblemInstance,
    coordinate_weights,
    gain_slots,
)
from noma_alloc.polyblock import (
    ProjectionResult,
    build_dinkelbach_lp,
    generate_children,
    initial_vertex,
    project,
    recover_assignment,
    select_best_vertex,
    solve_optimal,
    solve_optimal_run,
)
from noma_alloc.solvers import solve_lp

SINGLE = ProblemInstance(1, 1, 1.0, np.array([1.0]), np.array([[1.0]]))


class TestInitialVertex:
    def test_single_user(self):
        np.testing.assert_allclose(initial_vertex(SINGLE), [2.0, 2.0])

    def test_two_users(self):
        inst = ProblemInstance(2, 1, 1.0, np.ones(2), np.array([[1.0, 3.0]]))
        z = initial_vertex(inst)
        np.testing.assert_allclose(z[:4], [2, 2, 4, 4])
        np.testing.assert_allclose(z[4:], [2, 4, 2, 4])

    def test_vanishing_budget(self):
        inst = ProblemInstance(1, 1, 1e-12, np.array([1.0]), np.array([[1.0]]))
        np.testing.assert_allclose(initial_vertex(inst), 1.0, atol=1e-9)


class TestDinkelbachLp:
    def test_shape(self):
        inst = ProblemInstance(2, 2, 1.0, np.ones(2), np.ones((2, 2)))
        lp = build_dinkelbach_lp(inst, initial_vertex(inst), 0.5)
        dim = inst.lifted_dim
        assert lp.rows.shape == (dim + 1, dim + 1)
        assert lp.num_variables == dim + 1

    def test_lambda_zero_optimum(self):
        # max tau s.t. f_d >= tau over the budget simplex: all power on the
        # v slot makes both factors equal to 2 (hand-solved optimum).
        lp = build_dinkelbach_lp(SINGLE, np.array([2.0, 2.0]), 0.0)
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2.0, abs=1e-9)
        np.testing.assert_allclose(sol.x[:2], [0.0, 1.0], atol=1e-9)

    def test_vanishing_budget_limit(self):
        inst = ProblemInstance(1, 1, 1e-12, np.array([1.0]), np.array([[1.0]]))
        lp = build_dinkelbach_lp(inst, np.array([2.0, 2.0]), 0.7)
        sol = solve_lp(lp)
        # only p ~ 0 is feasible: tau* = 1 - lam * max z = 1 - 1.4
        assert sol.objective == pytest.approx(1.0 - 0.7 * 2.0, abs=1e-9)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            build_dinkelbach_lp(SINGLE, np.array([2.0, 2.0]), -0.1)


class TestProject:
    def test_boundary_balance(self):
        proj = project(SINGLE, np.array([2.0, 2.0]))
        assert proj.lambda_ == pytest.approx(1 / np.sqrt(2), abs=1e-6)
        np.testing.assert_allclose(proj.phi, np.sqrt(2), atol=2e-6)
        assert proj.lifted_power.values[1] == pytest.approx(np.sqrt(2) - 1, abs=1e-5)

    def test_interior_point_scales_up(self):
        proj = project(SINGLE, np.array([1.0, 1.0]))
        assert proj.lambda_ == pytest.approx(np.sqrt(2), abs=1e-6)

    def test_vanishing_budget(self):
        inst = ProblemInstance(1, 1, 1e-9, np.array([1.0]), np.array([[1.0]]))
        proj = project(inst, np.array([2.0, 2.0]))
        assert proj.lambda_ == pytest.approx(0.5, abs=1e-6)
        np.testing.assert_allclose(proj.phi, 1.0, atol=1e-6)

    def test_rejects_bad_vertex(self):
        with pytest.raises(ValueError):
            project(SINGLE, np.array([0.5, 2.0]))

    def test_lambda_trace_and_residual(self):
        rng = np.random.default_rng(3)
        for trial in range(200):
            inst = desk_instance(4000 + trial % 40)
            z0 = initial_vertex(inst)
            z = 1.0 + rng.random(inst.lifted_dim) * (z0 - 1.0)
            proj = project(inst, z, 1e-6)
            lams = np.array(proj.lambda_trace)
            assert np.all(np.diff(lams) > 0), "lambda iterates must increase"
            assert proj.dinkelbach_iterations <= 100
            assert proj.residual <= 1e-6
            assert proj.residual >= -1e-6 * (1.0 + z.max())

    def test_projection_feasible_and_colinear(self):
        rng = np.random.default_rng(4)
        for trial in range(100):
            inst = desk_instance(4400 + trial % 25)
            z0 = initial_vertex(inst)
            z = 1.0 + rng.random(inst.lifted_dim) * (z0 - 1.0)
            proj = project(inst, z, 1e-6)
            np.testing.assert_allclose(
                proj.phi, np.maximum(proj.lambda_ * z, 1.0), rtol=1e-9, atol=0
            )
            # each scaled coordinate stays below the achieved rate factor
            half = inst.lifted_dim // 2
            hm, hn = gain_slots(inst)
            pu = proj.lifted_power.values[:half]
            pv = proj.lifted_power.values[half:]
            fu = 1 + hm * (pu + pv)
            gu = 1 + hm * pv
            fv = 1 + hn * pv
            ratios = np.concatenate([fu / gu, fv])
            assert np.all(proj.lambda_ * z <= ratios + 1e-6)


class TestGenerateChildren:
    def test_basic(self):
        kids = generate_children(np.array([2.0, 2.0]), np.array([np.sqrt(2), np.sqrt(2)]))
        assert len(kids) == 2
        np.testing.assert_allclose(kids[0], [np.sqrt(2), 2.0])
        np.testing.assert_allclose(kids[1], [2.0, np.sqrt(2)])

    def test_fixed_point(self):
        z = np.array([1.5, 2.5])
        kids = generate_children(z, z.copy())
        for kid in kids:
            np.testing.assert_allclose(kid, z)

    def test_clipped_at_one(self):
        kids = generate_children(np.array([2.0, 2.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(kids[0], [1.0, 2.0])
        np.testing.assert_allclose(kids[1], [2.0, 1.0])

    def test_rejects_phi_above_z(self):
        with pytest.raises(ValueError):
            generate_children(np.array([2.0]), np.array([3.0]))


class TestSelectBestVertex:
    def _result(self, phi):
        phi = np.asarray(phi, dtype=float)
        return ProjectionResult(1.0, phi, LiftedPower(np.zeros(phi.size)), 1, 0.0, (0.0, 1.0))

    def test_single(self):
        assert select_best_vertex(SINGLE, [(np.array([2.0, 2.0]), self._result([2.0, 2.0]))]) == 0

    def test_orders_by_projected_objective(self):
        cands = [
            (np.array([4.0, 4.0]), self._result([2.0, 1.4])),
            (np.array([4.0, 4.0]), self._result([2.0, 2.0])),
        ]
        assert select_best_vertex(SINGLE, cands) == 1

    def test_tie_takes_lowest_index(self):
        cands = [
            (np.array([4.0, 4.0]), self._result([2.0, 2.0])),
            (np.array([4.0, 4.0]), self._result([2.0, 2.0])),
        ]
        assert select_best_vertex(SINGLE, cands) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_best_vertex(SINGLE, [])


class TestRecoverAssignment:
    def test_all_ones_gives_empty(self):
        inst = ProblemInstance(2, 1, 1.0, np.ones(2), np.array([[1.0, 3.0]]))
        alloc = recover_assignment(
            inst, np.ones(inst.lifted_dim), LiftedPower(np.zeros(inst.lifted_dim)),
            reoptimize=False,
        )
        assert alloc.objective == 0.0
        assert not list(alloc.assignment.active_pairs())

    def test_single_active_pair(self):
        inst = ProblemInstance(2, 1, 4.0, np.ones(2), np.array([[1.0, 3.0]]))
        z = np.ones(inst.lifted_dim)
        lifted = np.zeros(inst.lifted_dim)
        d = 1  # delta(1,1,2) - 1 for K=2
        z[d] = 2.0
        z[4 + d] = 4.0
        lifted[d] = 2.0
        lifted[4 + d] = 1.0
        alloc = recover_assignment(inst, z, LiftedPower(lifted), reoptimize=False)
        assert list(alloc.assignment.active_pairs()) == [(0, 0, 1)]
        assert alloc.power.p[0, 0] == pytest.approx(2.0)
        assert alloc.power.p[0, 1] == pytest.approx(1.0)

    def test_threshold_drops_noise(self):
        inst = ProblemInstance(2, 1, 1.0, np.ones(2), np.array([[1.0, 3.0]]))
        z = np.ones(inst.lifted_dim) + 1e-9
        alloc = recover_assignment(
            inst, z, LiftedPower(np.zeros(inst.lifted_dim)), reoptimize=False
        )
        assert not list(alloc.assignment.active_pairs())


class TestSolveOptimal:
    def test_single_user_closed_form(self):
        alloc = solve_optimal(SINGLE, 1e-3)
        assert alloc.objective == pytest.approx(1.0, abs=1e-9)

    def test_matches_oracle_on_known_instance(self):
        inst = ProblemInstance(2, 1, 1.0, np.ones(2), np.array([[1.0, 4.0]]))
        alloc = solve_optimal(inst, 1e-3, max_vertices=400)
        ref = oracle.brute_force_solve(inst)
        assert alloc.objective == pytest.approx(ref.objective, abs=1e-2)

    def test_matches_oracle_on_random_instances(self):
        for seed in range(6):
            inst = desk_instance(7100 + seed, k=2, n_f=2)
            run = solve_optimal_run(inst, 1e-3, max_vertices=400)
            ref = oracle.brute_force_solve(inst)
            assert abs(run.allocation.objective - ref.objective) <= 1e-2

    def test_upper_bound_sandwich(self):
        for seed in range(6):
            inst = desk_instance(7200 + seed)
            run = solve_optimal_run(inst, 1e-3, max_vertices=300)
            assert run.allocation.objective <= run.upper_bound + 1e-9
            assert run.relative_gap >= -1e-12

    def test_bound_trace_nonincreasing(self):
        inst = desk_instance(7300, k=2, n_f=2)
        trace: list[dict] = []
        solve_optimal_run(inst, 1e-3, max_vertices=300, trace=trace)
        ubs = [row["upper_bound"] for row in trace]
        assert all(b >= a - 1e-9 for a, b in zip(ubs[1:], ubs))
        gaps = [row["selected_gap"] for row in trace]
        assert all(g >= 0 for g in gaps)

    def test_incumbent_never_above_final(self):
        inst = desk_instance(7400, k=3, n_f=2)
        trace: list[dict] = []
        run = solve_optimal_run(inst, 1e-3, max_vertices=300, trace=trace)
        for row in trace:
            assert run.allocation.objective >= row["incumbent"] - 1e-9

    def test_allocation_feasible(self):
        from noma_alloc.model import check_feasible

        for seed in range(5):
            inst = desk_instance(7500 + seed)
            alloc = solve_optimal(inst, 1e-3, max_vertices=200)
            assert check_feasible(inst, alloc.power, alloc.assignment).feasible

    def test_dominates_suboptimal_solver(self):
        for seed in range(5):
            inst = desk_instance(7600 + seed)
            opt = solve_optimal(inst, 1e-3, max_vertices=300)
            sub = sca.solve_sca(inst)
            assert opt.objective >= sub.objective - 1e-9
