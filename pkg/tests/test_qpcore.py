import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import box_qp_enumerate, box_qp_grid, l1_qp_enumerate, random_pd
from precis.errors import NotPositiveDefinite
from precis.qpcore import (BoxQpProblem, InnerOptions, L1QpProblem, box_qp_kkt_violation,
                           box_qp_objective, l1_qp_kkt_violation, l1_qp_objective,
                           soft_threshold, solve_box_qp, solve_l1_qp)

seeds = st.integers(0, 2**32 - 1)
TIGHT = InnerOptions(tol_inner=1e-12)


def random_l1(seed, q, cond=20.0):
    rng = np.random.default_rng(seed)
    A = random_pd(rng, q, cond)
    a = rng.standard_normal(q)
    lam = rng.uniform(0.0, 1.0) * np.abs(a).max()
    return L1QpProblem(A, a, lam)


def random_box(seed, q, cond=20.0):
    rng = np.random.default_rng(seed)
    A = random_pd(rng, q, cond)
    b = rng.standard_normal(q)
    lam = rng.uniform(0.05, 1.0) * np.abs(b).max()
    return BoxQpProblem(A, b, lam)


@pytest.mark.parametrize("x, t, expected", [(2.0, 1.0, 1.0), (-0.5, 1.0, 0.0), (-3.0, 0.5, -2.5)])
def test_soft_threshold(x, t, expected):
    assert soft_threshold(x, t) == expected


class TestL1Qp:
    def test_scalar(self):
        res = solve_l1_qp(L1QpProblem(np.array([[1.0]]), np.array([-2.0]), 1.0))
        np.testing.assert_allclose(res.x, [1.0])
        assert res.converged

    def test_large_lambda_gives_zero(self):
        prob = random_l1(1, 5)
        prob = L1QpProblem(prob.A, prob.a, np.abs(prob.a).max())
        res = solve_l1_qp(prob)
        assert np.all(res.x == 0.0)
        assert res.sweeps == 1

    def test_two_by_two(self):
        A = np.array([[2.0, 0.4], [0.4, 2.0]])
        a = np.array([-3.0, 1.0])
        res = solve_l1_qp(L1QpProblem(A, a, 0.5), TIGHT)
        np.testing.assert_allclose(res.x, [1.3541667, -0.5208333], atol=1e-7)
        np.testing.assert_allclose(res.x, l1_qp_enumerate(A, a, 0.5), atol=1e-10)

    def test_lambda_zero_is_linear_solve(self):
        prob = random_l1(2, 6)
        prob = L1QpProblem(prob.A, prob.a, 0.0)
        res = solve_l1_qp(prob, TIGHT)
        np.testing.assert_allclose(res.x, np.linalg.solve(prob.A, -prob.a), atol=1e-9)

    def test_nonpositive_diagonal(self):
        with pytest.raises(NotPositiveDefinite):
            solve_l1_qp(L1QpProblem(np.diag([1.0, 0.0]), np.ones(2), 0.1))

    def test_bad_warm_shape(self):
        with pytest.raises(ValueError):
            solve_l1_qp(L1QpProblem(np.eye(2), np.ones(2), 0.1), InnerOptions(warm=np.zeros(3)))

    def test_sweep_cap_flags_unconverged(self):
        prob = random_l1(3, 30, cond=1e4)
        res = solve_l1_qp(prob, InnerOptions(tol_inner=1e-14, max_sweeps=1))
        assert res.sweeps == 1
        assert not res.converged

    def test_empty(self):
        res = solve_l1_qp(L1QpProblem(np.zeros((0, 0)), np.zeros(0), 1.0))
        assert res.x.shape == (0,) and res.converged

    def test_options_validated(self):
        with pytest.raises(ValueError):
            InnerOptions(tol_inner=0.0)
        with pytest.raises(ValueError):
            InnerOptions(max_sweeps=0)

    @settings(max_examples=60, deadline=None)
    @given(seed=seeds, q=st.integers(1, 6))
    def test_matches_enumeration(self, seed, q):
        prob = random_l1(seed, q)
        res = solve_l1_qp(prob, TIGHT)
        ref = l1_qp_enumerate(prob.A, prob.a, prob.lam)
        assert np.max(np.abs(res.x - ref)) <= 1e-8

    @settings(max_examples=100, deadline=None)
    @given(seed=seeds, q=st.integers(1, 25), tol=st.sampled_from([1e-5, 1e-7, 1e-9]))
    def test_kkt_postcondition(self, seed, q, tol):
        prob = random_l1(seed, q)
        res = solve_l1_qp(prob, InnerOptions(tol_inner=tol))
        assert res.converged
        bound = 10 * tol * (1 + np.abs(prob.a).max())
        assert l1_qp_kkt_violation(prob, res.x) <= bound

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(2, 20))
    def test_objective_nonincreasing_per_sweep(self, seed, q):
        prob = random_l1(seed, q, cond=1e3)
        vals = [l1_qp_objective(prob, np.zeros(q))]
        for k in range(1, 15):
            x = solve_l1_qp(prob, InnerOptions(tol_inner=1e-14, max_sweeps=k)).x
            vals.append(l1_qp_objective(prob, x))
        d = np.diff(vals)
        assert np.all(d <= 1e-12 * np.abs(vals[:-1]) + 1e-15)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(1, 20))
    def test_warm_idempotence(self, seed, q):
        prob = random_l1(seed, q)
        x = solve_l1_qp(prob, InnerOptions(tol_inner=1e-10)).x
        again = solve_l1_qp(prob, InnerOptions(tol_inner=1e-10, warm=x))
        assert again.converged and again.sweeps <= 2

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(1, 20))
    def test_skip_does_not_change_solution(self, seed, q):
        prob = random_l1(seed, q)
        on = solve_l1_qp(prob, InnerOptions(tol_inner=1e-12, skip=True)).x
        off = solve_l1_qp(prob, InnerOptions(tol_inner=1e-12, skip=False)).x
        assert np.max(np.abs(on - off)) <= 1e-8

    def test_warm_start_not_mutated(self):
        prob = random_l1(4, 5)
        warm = np.full(5, 0.3)
        solve_l1_qp(prob, InnerOptions(warm=warm))
        assert np.all(warm == 0.3)


class TestBoxQp:
    def test_scalar(self):
        res = solve_box_qp(BoxQpProblem(np.array([[1.0]]), np.array([3.0]), 1.0))
        np.testing.assert_allclose(res.x, [-1.0])

    def test_interior_minimum(self):
        prob = random_box(5, 6)
        b = prob.b / np.abs(prob.b).max() * 0.5
        res = solve_box_qp(BoxQpProblem(prob.Atil, b, 1.0), TIGHT)
        np.testing.assert_allclose(res.x, -b, atol=1e-10)
        assert box_qp_objective(BoxQpProblem(prob.Atil, b, 1.0), res.x) == pytest.approx(0.0,
                                                                                          abs=1e-18)

    def test_two_by_two(self):
        A = np.array([[2.0, 0.4], [0.4, 2.0]])
        b = np.array([3.0, -0.2])
        res = solve_box_qp(BoxQpProblem(A, b, 1.0), TIGHT)
        np.testing.assert_allclose(res.x, [-1.0, -0.2], atol=1e-10)
        np.testing.assert_allclose(box_qp_enumerate(A, b, 1.0), [-1.0, -0.2], atol=1e-12)
        np.testing.assert_allclose(box_qp_grid(A, b, 1.0), [-1.0, -0.2], atol=1e-2)

    def test_warm_start_clipped(self):
        prob = random_box(6, 4)
        res = solve_box_qp(prob, InnerOptions(warm=np.full(4, 100.0)))
        assert np.all(np.abs(res.x) <= prob.lam)

    def test_nonpositive_diagonal(self):
        with pytest.raises(NotPositiveDefinite):
            solve_box_qp(BoxQpProblem(np.diag([1.0, -1.0]), np.ones(2), 0.1))

    def test_lambda_zero(self):
        res = solve_box_qp(BoxQpProblem(np.eye(3), np.ones(3), 0.0))
        assert np.all(res.x == 0.0)
        assert box_qp_kkt_violation(BoxQpProblem(np.eye(3), np.ones(3), 0.0), res.x) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(seed=seeds, q=st.integers(1, 6))
    def test_matches_enumeration(self, seed, q):
        prob = random_box(seed, q)
        res = solve_box_qp(prob, TIGHT)
        ref = box_qp_enumerate(prob.Atil, prob.b, prob.lam)
        assert np.max(np.abs(res.x - ref)) <= 1e-8

    @settings(max_examples=20, deadline=None)
    @given(seed=seeds)
    def test_matches_grid_search(self, seed):
        prob = random_box(seed, 2)
        res = solve_box_qp(prob, TIGHT)
        grid = box_qp_grid(prob.Atil, prob.b, prob.lam)
        # the grid minimizer is within one grid step of the true one
        assert box_qp_objective(prob, res.x) <= box_qp_objective(prob, grid) + 1e-12
        assert np.max(np.abs(res.x - grid)) <= 2 * prob.lam / 200 * 5

    @settings(max_examples=100, deadline=None)
    @given(seed=seeds, q=st.integers(1, 25), tol=st.sampled_from([1e-5, 1e-7, 1e-9]))
    def test_kkt_postcondition(self, seed, q, tol):
        prob = random_box(seed, q)
        res = solve_box_qp(prob, InnerOptions(tol_inner=tol))
        assert res.converged
        assert np.all(np.abs(res.x) <= prob.lam)
        bound = 10 * tol * (1 + np.abs(prob.b).max())
        assert box_qp_kkt_violation(prob, res.x) <= bound

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(2, 20))
    def test_objective_nonincreasing_per_sweep(self, seed, q):
        prob = random_box(seed, q, cond=1e3)
        start = np.clip(np.zeros(q), -prob.lam, prob.lam)
        vals = [box_qp_objective(prob, start)]
        for k in range(1, 15):
            x = solve_box_qp(prob, InnerOptions(tol_inner=1e-14, max_sweeps=k)).x
            vals.append(box_qp_objective(prob, x))
        d = np.diff(vals)
        assert np.all(d <= 1e-12 * np.abs(vals[:-1]) + 1e-15)

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(1, 20))
    def test_warm_idempotence(self, seed, q):
        prob = random_box(seed, q)
        x = solve_box_qp(prob, InnerOptions(tol_inner=1e-10)).x
        again = solve_box_qp(prob, InnerOptions(tol_inner=1e-10, warm=x))
        assert again.converged and again.sweeps <= 2

    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, q=st.integers(1, 20))
    def test_skip_does_not_change_solution(self, seed, q):
        prob = random_box(seed, q)
        on = solve_box_qp(prob, InnerOptions(tol_inner=1e-12, skip=True)).x
        off = solve_box_qp(prob, InnerOptions(tol_inner=1e-12, skip=False)).x
        assert np.max(np.abs(on - off)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=seeds, q=st.integers(1, 15))
def test_primal_dual_map(seed, q):
    # lasso in beta with W11 and the box-QP with inv(W11) share one solution
    rng = np.random.default_rng(seed)
    W11 = random_pd(rng, q, cond=20.0)
    s12 = rng.standard_normal(q)
    lam = rng.uniform(0.05, 1.0) * np.abs(s12).max()
    beta = solve_l1_qp(L1QpProblem(W11, s12, lam), TIGHT).x
    gamma = solve_box_qp(BoxQpProblem(np.linalg.inv(W11), s12, lam), TIGHT).x
    mapped = -np.linalg.solve(W11, s12 + gamma)
    assert np.max(np.abs(beta - mapped)) <= 1e-6
