"""Extragradient inner engine and the matching feasibility initializer.

Each convex subproblem is solved in the dual domain: the saddle point of its
Lagrangian is found with the extragradient method, using a
prediction-correction rule for the step size so no Lipschitz constant is
needed.  All updates are closed-form gradient steps plus a clamp of the dual
variables at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InitializationFailure
from .sca import ScaSubproblem
from .structure import (RealWeightProblem, WeightProblem, lift_real,
                        unlift_weights, weight_feasible)


@dataclass
class EscaConfig:
    alpha: float = 0.1
    c: float = 0.8
    inner_tol: float = 1e-3
    max_inner: int = 5000

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")


@dataclass
class SaddleState:
    """Primal-dual iterate: real-lifted weights x and multipliers eta >= 0."""

    x: np.ndarray
    eta: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.eta])


def _interference_weights(sub: ScaSubproblem, i: int, eta: np.ndarray) -> np.ndarray:
    """Per-pair weights gamma_u * eta_u with the group's own users zeroed."""
    wp = sub.wp
    off = wp.user_offsets()
    w = sub.gammas * eta
    w[off[i]:off[i + 1]] = 0.0
    return np.repeat(w, 2)


def grad_x(sub: ScaSubproblem, x: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Gradient of the subproblem Lagrangian in the lifted weights."""
    rwp = sub.rwp
    wp = sub.wp
    off = wp.user_offsets()
    xoff = rwp.x_offsets()
    out = np.empty_like(x)
    for i in range(wp.num_groups):
        xi = x[xoff[i]:xoff[i + 1]]
        g = 2.0 * (rwp.obj_gram[i] @ xi)
        t = rwp.Ft[i].T @ xi
        g += 2.0 * (rwp.Ft[i] @ (_interference_weights(sub, i, eta) * t))
        g -= 2.0 * (sub.gy[i] @ eta[off[i]:off[i + 1]])
        out[xoff[i]:xoff[i + 1]] = g
    return out


def _group_quadratics(rwp: RealWeightProblem, x: np.ndarray) -> np.ndarray:
    """quad[j, u] = x_j^T F_{j,u} x_j for every group j and flat user u."""
    wp = rwp.wp
    xoff = rwp.x_offsets()
    quad = np.empty((wp.num_groups, wp.total_users))
    for j in range(wp.num_groups):
        t = rwp.Ft[j].T @ x[xoff[j]:xoff[j + 1]]
        quad[j] = (t.reshape(wp.total_users, 2) ** 2).sum(axis=1)
    return quad


def grad_eta(sub: ScaSubproblem, x: np.ndarray) -> np.ndarray:
    """Gradient in the multipliers: the convexified constraint values at x."""
    rwp = sub.rwp
    wp = sub.wp
    grp = wp.group_of_user()
    off = wp.user_offsets()
    xoff = rwp.x_offsets()
    quad = _group_quadratics(rwp, x)
    users = np.arange(wp.total_users)
    interf = quad.sum(axis=0) - quad[grp, users]
    cross = np.empty(wp.total_users)
    for i in range(wp.num_groups):
        cross[off[i]:off[i + 1]] = sub.gy[i].T @ x[xoff[i]:xoff[i + 1]]
    return sub.sig_quad + sub.gammas * interf - 2.0 * cross \
        + sub.gammas * sub.sigma2


def operator(sub: ScaSubproblem, state: SaddleState) -> np.ndarray:
    """Stacked monotone operator (grad_x L, -grad_eta L)."""
    return np.concatenate([grad_x(sub, state.x, state.eta),
                           -grad_eta(sub, state.x)])


def extragradient_iterate(sub: ScaSubproblem, state: SaddleState,
                          alpha_step: float):
    """One predictor-corrector sweep with a fixed step size.

    Returns the corrected state together with the intermediate predictor.
    """
    if alpha_step <= 0:
        raise ValueError("alpha_step must be positive")
    xbar = state.x - alpha_step * grad_x(sub, state.x, state.eta)
    etabar = np.maximum(state.eta + alpha_step * grad_eta(sub, state.x), 0.0)
    x_new = state.x - alpha_step * grad_x(sub, xbar, etabar)
    eta_new = np.maximum(state.eta + alpha_step * grad_eta(sub, xbar), 0.0)
    return SaddleState(x_new, eta_new), xbar, etabar


def adaptive_step(state: SaddleState, predictor: SaddleState,
                  g_at_state: np.ndarray, g_at_predictor: np.ndarray,
                  alpha: float, c: float) -> float:
    """Prediction-correction step size min{alpha, c*||du||/||dg||}.

    When the operator does not move between the two points the Lipschitz
    estimate is unbounded and the base step is used.
    """
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    d_u = np.linalg.norm(predictor.stacked() - state.stacked())
    d_g = np.linalg.norm(g_at_predictor - g_at_state)
    if d_g == 0.0:
        return alpha
    return min(alpha, c * d_u / d_g)


def _run_extragradient(gx, geta, x0: np.ndarray, n_eta: int, cfg: EscaConfig,
                       stop, record: bool = False):
    """Shared extragradient loop for the subproblem solver and the initializer.

    ``gx(x, eta)`` and ``geta(x)`` evaluate the two Lagrangian gradients;
    ``stop(x_prev, x_new, n)`` decides termination.  Returns the final state,
    the iteration count, a convergence flag, and (optionally) the trajectory
    with per-iteration step diagnostics.
    """
    x = x0.copy()
    eta = np.zeros(n_eta)
    traj = []
    clipped_step = []
    converged = False
    n = 0
    for n in range(1, cfg.max_inner + 1):
        gx0 = gx(x, eta)
        ge0 = geta(x)
        xbar = x - cfg.alpha * gx0
        etabar = np.maximum(eta + cfg.alpha * ge0, 0.0)
        gxb = gx(xbar, etabar)
        geb = geta(xbar)
        d_u = np.sqrt(np.sum((xbar - x) ** 2) + np.sum((etabar - eta) ** 2))
        # the monotone operator is (grad_x, -grad_eta)
        d_g = np.sqrt(np.sum((gxb - gx0) ** 2) + np.sum((ge0 - geb) ** 2))
        alpha_hat = cfg.alpha if d_g == 0.0 else cfg.c * d_u / d_g
        step = min(cfg.alpha, alpha_hat)
        if step < cfg.alpha:
            # shrunken step: redo the predictor before correcting
            xbar = x - step * gx0
            etabar = np.maximum(eta + step * ge0, 0.0)
            gxb = gx(xbar, etabar)
            geb = geta(xbar)
        x_new = x - step * gxb
        eta_new = np.maximum(eta + step * geb, 0.0)
        if record:
            traj.append(np.concatenate([x_new, eta_new]))
            clipped_step.append(alpha_hat < cfg.alpha)
        done = stop(x, x_new, n)
        x, eta = x_new, eta_new
        if done:
            converged = True
            break
    return x, eta, n, converged, traj, clipped_step


def esca_inner_solve(sub: ScaSubproblem, v: list, cfg: EscaConfig | None = None,
                     record: bool = False):
    """Solve one convex subproblem by extragradient iterations in the dual.

    Starts from x = lifting of v with zero multipliers.  Stops when the
    relative iterate change falls below ``inner_tol``, or earlier when the
    constraints already hold and the objective has flattened.  Returns the
    complex weights, the iteration count, and an info dict.
    """
    if cfg is None:
        cfg = EscaConfig()
    rwp = sub.rwp
    wp = sub.wp
    x0 = sub.y.copy()
    obj_prev = [None]

    def objective(x):
        xoff = rwp.x_offsets()
        return sum(float(x[xoff[i]:xoff[i + 1]] @ (rwp.obj_gram[i]
                                                   @ x[xoff[i]:xoff[i + 1]]))
                   for i in range(wp.num_groups))

    def stop(x_prev, x_new, n):
        rel = np.linalg.norm(x_new - x_prev) / max(np.linalg.norm(x_new), 1e-300)
        if rel <= cfg.inner_tol:
            return True
        # plateau exit: feasible and the objective barely moves
        if n % 10 == 0:
            obj = objective(x_new)
            prev = obj_prev[0]
            obj_prev[0] = obj
            if prev is not None and abs(obj - prev) <= cfg.inner_tol / 10 * max(obj, 1e-300):
                vals = grad_eta(sub, x_new)
                if np.all(vals <= 0.0):
                    return True
        return False

    x, eta, n, converged, traj, clipped = _run_extragradient(
        lambda xx, ee: grad_x(sub, xx, ee), lambda xx: grad_eta(sub, xx),
        x0, wp.total_users, cfg, stop, record=record)
    a = unlift_weights(x, wp.group_sizes)
    info = {"converged": converged, "eta": eta,
            "final_slack": grad_eta(sub, x)}
    if record:
        info["trajectory"] = traj
        info["clipped_step"] = clipped
    return a, n, info


def _random_start(wp: WeightProblem, rng: np.random.Generator) -> np.ndarray:
    """Random lifted start sized so the self-signal terms are O(gamma sigma^2)."""
    off = wp.user_offsets()
    gmax = float(np.max(wp.gammas))
    parts = []
    for i, Ki in enumerate(wp.group_sizes):
        own = wp.fmat[i][:, off[i]:off[i + 1]]
        scale = np.sqrt(gmax * wp.sigma2) / max(
            float(np.mean(np.linalg.norm(own, axis=0))), 1e-300)
        parts.append(scale * rng.standard_normal(2 * Ki))
    return np.concatenate(parts)


def eim_init(rwp_or_wp, seed: int = 0, max_iters: int = 3000,
             retries: int = 10, alpha: float = 0.1, c: float = 0.8) -> list:
    """Extragradient feasibility initializer.

    Runs the extragradient method on the Lagrangian of the feasibility
    problem (multipliers only, no power objective) from random starts until
    all SINR constraints hold.  Raises InitializationFailure after
    ``retries`` unsuccessful restarts.
    """
    rwp = rwp_or_wp if isinstance(rwp_or_wp, RealWeightProblem) \
        else lift_real(rwp_or_wp)
    wp = rwp.wp
    off = wp.user_offsets()
    xoff = rwp.x_offsets()
    grp = wp.group_of_user()
    users = np.arange(wp.total_users)
    cfg = EscaConfig(alpha=alpha, c=c, inner_tol=1e-300, max_inner=max_iters)

    def phi_tilde(x):
        quad = _group_quadratics(rwp, x)
        interf = quad.sum(axis=0) - quad[grp, users]
        return wp.gammas * (interf + wp.sigma2) - quad[grp, users]

    def gx(x, eta):
        out = np.empty_like(x)
        for i in range(wp.num_groups):
            xi = x[xoff[i]:xoff[i + 1]]
            wvec = wp.gammas * eta
            wvec[off[i]:off[i + 1]] = -eta[off[i]:off[i + 1]]
            t = rwp.Ft[i].T @ xi
            out[xoff[i]:xoff[i + 1]] = 2.0 * (rwp.Ft[i] @ (np.repeat(wvec, 2) * t))
        return out

    rng = np.random.default_rng(seed)
    for _ in range(retries):
        x0 = _random_start(wp, rng)

        def stop(x_prev, x_new, n):
            return bool(np.all(phi_tilde(x_new) <= 0.0))

        x, _eta, _n, converged, _t, _c = _run_extragradient(
            gx, phi_tilde, x0, wp.total_users, cfg, stop)
        # eta starts at zero, which is a fixed point of the pure feasibility
        # Lagrangian; nudge via one violated-constraint ascent pass happens
        # automatically because grad_eta = phi_tilde > 0 where violated
        if converged or np.all(phi_tilde(x) <= 0.0):
            a = unlift_weights(x, wp.group_sizes)
            if weight_feasible(wp, a):
                return a
    raise InitializationFailure(
        f"no feasible point found after {retries} restarts")
