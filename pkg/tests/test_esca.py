import numpy as np
import pytest

from mgbeam.asca import AscaConfig, asca_inner_solve
from mgbeam.esca import (EscaConfig, SaddleState, adaptive_step, eim_init,
                         esca_inner_solve, extragradient_iterate, grad_eta,
                         grad_x, operator)
from mgbeam.exceptions import InitializationFailure
from mgbeam.instance import generate_instance
from mgbeam.oracle import FdConfig, fd_gradient
from mgbeam.sca import convexify
from mgbeam.structure import (build_weight_problem, fixed_point_lambda,
                              lift_real, lift_weights, unlift_weights,
                              weight_feasible, weight_objective)

from conftest import random_weights, small_problem


def lagrangian(sub, x, eta):
    """Direct complex-arithmetic evaluation of the subproblem Lagrangian."""
    wp = sub.wp
    a = unlift_weights(np.asarray(x, float), wp.group_sizes)
    grp = wp.group_of_user()
    val = weight_objective(wp, a)
    d = wp.cross_gains(a)
    for u in range(wp.total_users):
        i = grp[u]
        interf = sum(abs(d[j, u]) ** 2 for j in range(wp.num_groups) if j != i)
        phi = sub.gammas[u] * interf + sub.e2[u] \
            - 2.0 * (d[i, u] * sub.e3[u]).real
        val += eta[u] * phi
    return val


class TestGradients:
    def test_eta_zero_pure_objective(self, subproblem16):
        rwp, v0, sub = subproblem16
        rng = np.random.default_rng(0)
        x = rng.standard_normal(rwp.x_offsets()[-1])
        g = grad_x(sub, x, np.zeros(sub.wp.total_users))
        xoff = rwp.x_offsets()
        want = np.concatenate([2.0 * (rwp.obj_gram[i] @ x[xoff[i]:xoff[i + 1]])
                               for i in range(sub.wp.num_groups)])
        np.testing.assert_allclose(g, want, rtol=1e-12)

    def test_grad_x_finite_differences(self, subproblem16):
        rwp, v0, sub = subproblem16
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.standard_normal(rwp.x_offsets()[-1])
            eta = rng.uniform(0, 2, sub.wp.total_users)
            got = grad_x(sub, x, eta)
            want = fd_gradient(lambda z: lagrangian(sub, z, eta), x,
                               FdConfig(step=1e-6))
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-8)

    def test_grad_eta_finite_differences(self, subproblem16):
        rwp, v0, sub = subproblem16
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = rng.standard_normal(rwp.x_offsets()[-1])
            eta = rng.uniform(0, 2, sub.wp.total_users)
            got = grad_eta(sub, x)
            want = fd_gradient(lambda z: lagrangian(sub, x, z), eta,
                               FdConfig(step=1e-6))
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-8)

    def test_grad_eta_at_anchor_is_negated_slack(self, subproblem16):
        rwp, v0, sub = subproblem16
        vals = grad_eta(sub, sub.y)
        np.testing.assert_allclose(vals, sub.original_constraint_values(v0),
                                   rtol=1e-10, atol=1e-12)

    def test_single_group_no_interference_term(self):
        inst, rwp, v0 = small_problem(n=8, g=1, k=2, seed=3)
        sub = convexify(rwp, v0)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(rwp.x_offsets()[-1])
        eta = rng.uniform(0, 1, sub.wp.total_users)
        got = grad_x(sub, x, eta)
        want = 2.0 * (rwp.obj_gram[0] @ x) - 2.0 * (sub.gy[0] @ eta)
        np.testing.assert_allclose(got, want, rtol=1e-12)


class TestExtragradient:
    def test_eta_projection(self, subproblem16):
        rwp, v0, sub = subproblem16
        # from a strictly feasible point all constraint values are negative,
        # so a dual ascent step from eta = 0 projects back to zero
        state = SaddleState(sub.y.copy(), np.zeros(sub.wp.total_users))
        assert np.all(grad_eta(sub, state.x) < 0)
        nxt, xbar, etabar = extragradient_iterate(sub, state, 1e-3)
        np.testing.assert_array_equal(etabar, 0.0)
        np.testing.assert_array_equal(nxt.eta, 0.0)
        assert np.all(nxt.eta >= 0)

    def test_scalar_case_hand_computed(self):
        inst, rwp, v0 = small_problem(n=2, g=1, k=1, sinr_db=0.0, seed=1)
        sub = convexify(rwp, v0)
        rng = np.random.default_rng(4)
        x = rng.standard_normal(2)
        eta = np.array([0.5])
        alpha = 0.05
        # symbolic evaluation of the four update formulas
        def gx(xx, ee):
            return 2 * rwp.obj_gram[0] @ xx - 2 * ee[0] * sub.gy[0][:, 0]
        def ge(xx):
            return np.array([sub.sig_quad[0] - 2 * sub.gy[0][:, 0] @ xx
                             + sub.gammas[0] * sub.wp.sigma2])
        xbar_w = x - alpha * gx(x, eta)
        ebar_w = np.maximum(eta + alpha * ge(x), 0.0)
        x_w = x - alpha * gx(xbar_w, ebar_w)
        e_w = np.maximum(eta + alpha * ge(xbar_w), 0.0)
        nxt, xbar, etabar = extragradient_iterate(
            sub, SaddleState(x, eta), alpha)
        np.testing.assert_allclose(xbar, xbar_w, rtol=1e-12)
        np.testing.assert_allclose(etabar, ebar_w, rtol=1e-12)
        np.testing.assert_allclose(nxt.x, x_w, rtol=1e-12)
        np.testing.assert_allclose(nxt.eta, e_w, rtol=1e-12)

    def test_bad_step_rejected(self, subproblem16):
        rwp, v0, sub = subproblem16
        with pytest.raises(ValueError):
            extragradient_iterate(
                sub, SaddleState(sub.y, np.zeros(sub.wp.total_users)), 0.0)


class TestAdaptiveStep:
    def _states(self, du):
        s = SaddleState(np.zeros(2), np.zeros(1))
        p = SaddleState(np.array([du, 0.0]), np.zeros(1))
        return s, p

    def test_zero_operator_change_uses_base(self):
        s, p = self._states(0.3)
        g = np.ones(3)
        assert adaptive_step(s, p, g, g, alpha=0.1, c=0.8) == 0.1

    def test_ratio_one(self):
        s, p = self._states(1.0)
        g0 = np.zeros(3)
        g1 = np.array([1.0, 0, 0])
        assert adaptive_step(s, p, g0, g1, alpha=0.1, c=0.8) == 0.1

    def test_small_ratio(self):
        s, p = self._states(0.05)
        g0 = np.zeros(3)
        g1 = np.array([1.0, 0, 0])
        np.testing.assert_allclose(
            adaptive_step(s, p, g0, g1, alpha=0.1, c=0.8), 0.04)

    def test_c_validated(self):
        s, p = self._states(1.0)
        with pytest.raises(ValueError):
            adaptive_step(s, p, np.zeros(3), np.ones(3), alpha=0.1, c=1.0)


class TestMonotoneOperator:
    def test_monotonicity_on_random_pairs(self, subproblem16):
        rwp, v0, sub = subproblem16
        rng = np.random.default_rng(5)
        nx = rwp.x_offsets()[-1]
        ku = sub.wp.total_users
        for _ in range(20):
            u = SaddleState(rng.standard_normal(nx), rng.uniform(0, 2, ku))
            v = SaddleState(rng.standard_normal(nx), rng.uniform(0, 2, ku))
            inner = (operator(sub, u) - operator(sub, v)) \
                @ (u.stacked() - v.stacked())
            assert inner >= -1e-9


class TestInnerSolve:
    def test_cross_engine_agreement(self, subproblem16):
        rwp, v0, sub = subproblem16
        aE, nE, infoE = esca_inner_solve(
            sub, v0, EscaConfig(inner_tol=1e-7, max_inner=50000))
        aA, nA, _ = asca_inner_solve(
            sub, v0, AscaConfig(inner_tol=1e-7, max_inner=50000))
        pe = weight_objective(sub.wp, aE)
        pa = weight_objective(sub.wp, aA)
        assert abs(pe - pa) / pa < 1e-3

    def test_complementary_slackness(self, subproblem16):
        rwp, v0, sub = subproblem16
        a, n, info = esca_inner_solve(
            sub, v0, EscaConfig(inner_tol=1e-8, max_inner=100000))
        assert info["converged"]
        phi = info["final_slack"]
        prod = np.abs(info["eta"] * phi)
        assert np.all(prod <= 1e-6 * (1.0 + np.abs(phi)))

    def test_max_inner_reports_best_iterate(self, subproblem16):
        rwp, v0, sub = subproblem16
        a, n, info = esca_inner_solve(sub, v0,
                                      EscaConfig(inner_tol=1e-300, max_inner=7))
        assert n == 7 and not info["converged"]
        assert all(np.all(np.isfinite(ai)) for ai in a)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EscaConfig(alpha=0.0)
        with pytest.raises(ValueError):
            EscaConfig(c=1.5)


class TestEim:
    def test_single_user_immediate(self):
        inst = generate_instance(4, 1, 1, 3.0, 1.0, seed=0)
        wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
        a = eim_init(wp, seed=0)
        assert weight_feasible(wp, a)

    def test_feasible_on_random_instances(self):
        for seed in range(5):
            inst = generate_instance(16, 2, 2, 6.0, 1.0, seed=seed)
            rwp = lift_real(build_weight_problem(
                inst, fixed_point_lambda(inst).lam))
            a = eim_init(rwp, seed=seed)
            assert weight_feasible(rwp.wp, a)

    def test_deterministic(self):
        inst = generate_instance(16, 2, 2, 6.0, 1.0, seed=1)
        wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
        a1 = eim_init(wp, seed=9)
        a2 = eim_init(wp, seed=9)
        for x, y in zip(a1, a2):
            np.testing.assert_array_equal(x, y)

    def test_failure_after_retries(self):
        # absurd targets in an overloaded system: no feasible point exists
        inst = generate_instance(2, 3, 2, 30.0, 1.0, seed=0)
        with np.errstate(over="ignore", invalid="ignore"):
            wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
            with pytest.raises(InitializationFailure):
                eim_init(wp, seed=0, max_iters=200, retries=3)
