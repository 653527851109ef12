import numpy as np
import pytest

from mgbeam.asca import (AscaConfig, _aim_d_step, a_update, a_update_factors,
                         aim_init, asca_inner_solve, d_update, q_update,
                         solve_cubic_nu, solve_quartic_mu)
from mgbeam.exceptions import DegenerateAnchor, InitializationFailure
from mgbeam.instance import generate_instance
from mgbeam.oracle import qcqp1_projection_oracle, quartic_root_oracle
from mgbeam.sca import convexify
from mgbeam.structure import (build_weight_problem, fixed_point_lambda,
                              lift_real, weight_feasible, weight_objective)

from conftest import random_weights, small_problem


def admm_lagrangian(sub, d, a, q, rho):
    """Scaled-form augmented Lagrangian of the splitting."""
    r = d - sub.wp.cross_gains(a) + q
    return weight_objective(sub.wp, a) + rho / 2.0 * np.sum(np.abs(r) ** 2) \
        - rho / 2.0 * np.sum(np.abs(q) ** 2)


class TestCubicRoot:
    def test_linear_case(self):
        # S = 0: the equation is linear in nu
        e2, e3_sq, re_e3_e1, gamma = 3.0, 0.5, 0.2, 2.0
        nu = solve_cubic_nu(0.0, e2, e3_sq, re_e3_e1, gamma)
        want = (e2 - 2 * re_e3_e1) / (2 * e3_sq)
        np.testing.assert_allclose(nu, want, rtol=1e-10)

    def test_inactive_inputs_rejected(self):
        with pytest.raises(ValueError):
            solve_cubic_nu(0.1, 0.1, 1.0, 1.0, 1.0)  # f(0) < 0

    def test_zero_e3_rejected(self):
        with pytest.raises(ValueError):
            solve_cubic_nu(1.0, 3.0, 0.0, 0.0, 1.0)

    def test_random_active_cases_match_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            S = rng.uniform(0, 5)
            gamma = rng.uniform(0.1, 20)
            e3 = rng.standard_normal() + 1j * rng.standard_normal()
            re_e3_e1 = rng.uniform(-1, 1)
            # pick e2 so the residual at nu = 0 is a known positive value
            f0_target = rng.uniform(0.01, 5)
            e2 = f0_target + 2 * re_e3_e1 - gamma * S
            nu = solve_cubic_nu(S, e2, abs(e3) ** 2, re_e3_e1, gamma)
            resid = e2 + gamma * S / (1 + nu * gamma) ** 2 \
                - 2 * re_e3_e1 - 2 * nu * abs(e3) ** 2
            f0 = e2 + gamma * S - 2 * re_e3_e1
            assert nu > 0
            assert abs(resid) <= 1e-10 * abs(f0)


class TestDUpdate:
    def test_inactive_blocks_unchanged(self, subproblem16):
        rwp, v0, sub = subproblem16
        # at the strictly feasible anchor with zero duals every block of
        # e1 = cross_gains(v) already satisfies its constraint
        q = np.zeros((sub.wp.num_groups, sub.wp.total_users), complex)
        d = d_update(sub, v0, q)
        np.testing.assert_allclose(d, sub.wp.cross_gains(v0), rtol=1e-12)

    def test_projection_matches_oracle(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        grp = wp.group_of_user()
        rng = np.random.default_rng(1)
        for trial in range(20):
            a = random_weights(wp, rng)
            q = 0.3 * (rng.standard_normal((wp.num_groups, wp.total_users))
                       + 1j * rng.standard_normal((wp.num_groups,
                                                   wp.total_users)))
            d, nus = d_update(sub, a, q, return_nu=True)
            e1 = wp.cross_gains(a) - q
            for u in range(wp.total_users):
                want = qcqp1_projection_oracle(
                    e1[:, u], int(grp[u]), float(sub.gammas[u]),
                    float(sub.e2[u]), complex(sub.e3[u]))
                np.testing.assert_allclose(d[:, u], want, atol=1e-8)

    def test_constraint_slack_and_complementarity(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        grp = wp.group_of_user()
        rng = np.random.default_rng(2)
        a = random_weights(wp, rng)
        q = 0.5 * (rng.standard_normal((wp.num_groups, wp.total_users))
                   + 1j * rng.standard_normal((wp.num_groups,
                                               wp.total_users)))
        d, nus = d_update(sub, a, q, return_nu=True)
        for u in range(wp.total_users):
            i = grp[u]
            mags = np.abs(d[:, u]) ** 2
            interf = mags.sum() - mags[i]
            slack = sub.e2[u] + sub.gammas[u] * interf \
                - 2.0 * (d[i, u] * sub.e3[u]).real
            scale = max(abs(sub.e2[u]), 1.0)
            assert slack <= 1e-9 * scale
            assert nus[u] * abs(slack) <= 1e-9 * scale

    def test_degenerate_anchor_raises(self):
        inst, rwp, v0 = small_problem(n=16, g=2, k=2, seed=5)
        wp = rwp.wp
        # rotate group 0's anchor orthogonal to its first own cross vector
        f = wp.f(0, 0)
        v = [vi.copy() for vi in v0]
        v[0] = v[0] - (np.vdot(f, v[0]) / np.vdot(f, f)) * f
        sub = convexify(rwp, v)
        q = np.zeros((wp.num_groups, wp.total_users), complex)
        with pytest.raises(DegenerateAnchor):
            d_update(sub, v, q)


class TestAUpdate:
    def test_zero_rhs(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        factors = a_update_factors(wp, 0.2)
        z = np.zeros((wp.num_groups, wp.total_users), complex)
        a = a_update(sub, z, z, 0.2, factors)
        for ai in a:
            np.testing.assert_array_equal(ai, 0.0)

    def test_scalar_block_formula(self):
        inst, rwp, v0 = small_problem(n=8, g=2, k=1, seed=7)
        wp = rwp.wp
        rho = 0.2
        rng = np.random.default_rng(3)
        d = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        factors = a_update_factors(wp, rho)
        a = a_update(convexify(rwp, v0), d, q, rho, factors)
        for j in range(2):
            f = wp.fmat[j][0]
            num = rho / 2.0 * np.sum(np.conj(d[j] + q[j]) * f)
            den = wp.gram[j][0, 0].real + rho / 2.0 * np.sum(np.abs(f) ** 2)
            np.testing.assert_allclose(a[j][0], num / den, rtol=1e-10)

    def test_first_order_optimality(self, subproblem16):
        # the update is the exact block minimizer of the augmented Lagrangian
        rwp, v0, sub = subproblem16
        wp = sub.wp
        rho = 0.2
        rng = np.random.default_rng(4)
        d = rng.standard_normal((wp.num_groups, wp.total_users)) \
            + 1j * rng.standard_normal((wp.num_groups, wp.total_users))
        q = rng.standard_normal((wp.num_groups, wp.total_users)) \
            + 1j * rng.standard_normal((wp.num_groups, wp.total_users))
        a = a_update(sub, d, q, rho, a_update_factors(wp, rho))
        base = admm_lagrangian(sub, d, a, q, rho)
        for j in range(wp.num_groups):
            for _ in range(5):
                pert = 1e-6 * (rng.standard_normal(wp.group_sizes[j])
                               + 1j * rng.standard_normal(wp.group_sizes[j]))
                trial = [ai.copy() for ai in a]
                trial[j] = trial[j] + pert
                assert admm_lagrangian(sub, d, trial, q, rho) >= base - 1e-10


class TestQUpdate:
    def test_zero_residual(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        q = np.ones((wp.num_groups, wp.total_users), complex)
        d = wp.cross_gains(v0)
        np.testing.assert_array_equal(q_update(wp, d, v0, q), q)

    def test_accumulates_residual(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        rng = np.random.default_rng(5)
        d = rng.standard_normal((wp.num_groups, wp.total_users)) + 0j
        q0 = np.zeros_like(d)
        want = d - wp.cross_gains(v0)
        np.testing.assert_allclose(q_update(wp, d, v0, q0), want, rtol=1e-12)


class TestInnerSolve:
    def test_residual_converges(self, subproblem16):
        rwp, v0, sub = subproblem16
        a, n, info = asca_inner_solve(sub, v0,
                                      AscaConfig(inner_tol=1e-7,
                                                 max_inner=50000))
        assert info["converged"]
        scale = np.linalg.norm(sub.wp.cross_gains(a))
        assert info["primal_residual"] <= 1e-5 * max(scale, 1.0)

    def test_block_updates_descend(self, subproblem16):
        rwp, v0, sub = subproblem16
        wp = sub.wp
        rho = 0.2
        factors = a_update_factors(wp, rho)
        a = [vi.copy() for vi in v0]
        d = np.zeros((wp.num_groups, wp.total_users), complex)
        q = np.zeros_like(d)
        for _ in range(5):
            before = admm_lagrangian(sub, d, a, q, rho)
            d = d_update(sub, a, q)
            mid = admm_lagrangian(sub, d, a, q, rho)
            assert mid <= before + 1e-9
            a = a_update(sub, d, q, rho, factors)
            after = admm_lagrangian(sub, d, a, q, rho)
            assert after <= mid + 1e-9
            q = q_update(wp, d, a, q)

    def test_max_inner_returns_best(self, subproblem16):
        rwp, v0, sub = subproblem16
        a, n, info = asca_inner_solve(sub, v0,
                                      AscaConfig(inner_tol=1e-300, max_inner=5))
        assert n == 5 and not info["converged"]

    def test_rho_validated(self):
        with pytest.raises(ValueError):
            AscaConfig(rho=0.0)


class TestQuarticRoot:
    def test_constructed_half_root(self):
        # choose |e1_self|^2 so that mu = 1/2 solves the equation exactly
        S, gamma, sigma2, mu = 1.3, 4.0, 0.7, 0.5
        e1_self_sq = (1 - mu) ** 2 * (gamma * S / (1 + mu * gamma) ** 2
                                      + gamma * sigma2)
        got = solve_quartic_mu(S, gamma, sigma2, e1_self_sq)
        np.testing.assert_allclose(got, mu, atol=1e-12)

    def test_inactive_inputs_rejected(self):
        with pytest.raises(ValueError):
            solve_quartic_mu(0.0, 1.0, 1.0, 100.0)  # f(0) < 0

    def test_random_active_cases(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            S = rng.uniform(0, 5)
            gamma = rng.uniform(0.1, 20)
            sigma2 = rng.uniform(0.1, 2)
            f0_target = rng.uniform(0.01, 5)
            e1_self_sq = gamma * (S + sigma2) - f0_target
            if e1_self_sq <= 0:
                continue
            mu = solve_quartic_mu(S, gamma, sigma2, e1_self_sq)
            assert 0 < mu < 1
            resid = gamma * S / (1 + mu * gamma) ** 2 + gamma * sigma2 \
                - e1_self_sq / (1 - mu) ** 2
            assert abs(resid) <= 1e-10 * f0_target
            np.testing.assert_allclose(
                mu, quartic_root_oracle(S, gamma, sigma2, e1_self_sq),
                atol=1e-10)


class TestAimDStep:
    def test_satisfied_blocks_unchanged(self, problem16):
        inst, rwp, v0 = problem16
        wp = rwp.wp
        e1 = wp.cross_gains(v0)  # v0 feasible: every block satisfied
        d = _aim_d_step(wp, e1)
        np.testing.assert_allclose(d, e1, rtol=1e-12)

    def test_projected_blocks_feasible(self, problem16):
        inst, rwp, v0 = problem16
        wp = rwp.wp
        grp = wp.group_of_user()
        rng = np.random.default_rng(7)
        e1 = 0.1 * (rng.standard_normal((wp.num_groups, wp.total_users))
                    + 1j * rng.standard_normal((wp.num_groups,
                                                wp.total_users)))
        d = _aim_d_step(wp, e1)
        for u in range(wp.total_users):
            i = grp[u]
            mags = np.abs(d[:, u]) ** 2
            interf = mags.sum() - mags[i]
            assert mags[i] >= wp.gammas[u] * (interf + wp.sigma2) * (1 - 1e-9)


class TestAim:
    def test_feasible_on_random_instances(self):
        for seed in range(5):
            inst = generate_instance(16, 2, 2, 6.0, 1.0, seed=seed)
            wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
            a = aim_init(wp, seed=seed)
            assert weight_feasible(wp, a)

    def test_deterministic(self):
        inst = generate_instance(16, 2, 2, 6.0, 1.0, seed=1)
        wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
        a1 = aim_init(wp, seed=4)
        a2 = aim_init(wp, seed=4)
        for x, y in zip(a1, a2):
            np.testing.assert_array_equal(x, y)

    def test_failure_after_retries(self):
        inst = generate_instance(2, 3, 2, 30.0, 1.0, seed=0)
        with np.errstate(over="ignore", invalid="ignore"):
            wp = build_weight_problem(inst, fixed_point_lambda(inst).lam)
            with pytest.raises(InitializationFailure):
                aim_init(wp, seed=0, max_iters=100, retries=3)
