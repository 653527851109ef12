"""Two-block ADMM inner engine and the matching feasibility initializer.

The convex subproblem is split over auxiliary per-user gain variables
d_ju = a_j^H f_ju.  Both ADMM blocks have closed-form minimizers: the d block
decomposes into K_tot independent single-constraint projections whose KKT
multiplier is the root of a monotone scalar equation, and the a block is a
per-group regularized least squares with a factorization cached once per run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DegenerateAnchor, InitializationFailure
from .sca import ScaSubproblem
from .structure import WeightProblem, weight_feasible


@dataclass
class AscaConfig:
    rho: float = 0.2
    inner_tol: float = 1e-3
    max_inner: int = 5000

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass
class AdmmState:
    """ADMM iterate: weights a, per-user gains d, and scaled duals q.

    ``d`` and ``q`` are (G, K_tot) arrays; column u holds the block for flat
    user u, row j the contribution of group j's weights.
    """

    a: list
    d: np.ndarray
    q: np.ndarray


def _monotone_residual(nu: float, S: float, e2: float, e3_sq: float,
                       re_e3_e1: float, gamma: float) -> float:
    return e2 + gamma * S / (1.0 + nu * gamma) ** 2 - 2.0 * re_e3_e1 \
        - 2.0 * nu * e3_sq


def solve_cubic_nu(e1_others_sq_sum: float, e2: float, e3_sq: float,
                   re_e3_e1: float, gamma: float) -> float:
    """Positive root of the single-constraint KKT equation (active case).

    The residual e2 + gamma*S/(1+nu*gamma)^2 - 2*Re{e3 e1} - 2*nu*|e3|^2 is
    strictly decreasing in nu >= 0, so the root is found by safeguarded
    bisection with a Newton polish instead of the closed-form cubic formula.
    """
    S = e1_others_sq_sum
    if e3_sq <= 0:
        raise ValueError("|e3|^2 must be positive in the active case")
    f0 = _monotone_residual(0.0, S, e2, e3_sq, re_e3_e1, gamma)
    if f0 <= 0:
        raise ValueError("active case requires a positive residual at nu = 0")
    hi = 1.0
    while _monotone_residual(hi, S, e2, e3_sq, re_e3_e1, gamma) >= 0:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("failed to bracket the root")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _monotone_residual(mid, S, e2, e3_sq, re_e3_e1, gamma) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1.0):
            break
    nu = 0.5 * (lo + hi)
    for _ in range(4):  # Newton polish on the strictly decreasing residual
        r = _monotone_residual(nu, S, e2, e3_sq, re_e3_e1, gamma)
        dr = -2.0 * gamma ** 2 * S / (1.0 + nu * gamma) ** 3 - 2.0 * e3_sq
        step = r / dr
        cand = nu - step
        if lo <= cand <= hi:
            nu = cand
    return nu


def d_update(sub: ScaSubproblem, a: list, q: np.ndarray,
             return_nu: bool = False):
    """Exact minimizer of the d block: per-user projections onto the
    convexified constraint sets."""
    wp = sub.wp
    grp = wp.group_of_user()
    e1 = wp.cross_gains(a) - q
    d = e1.copy()
    nus = np.zeros(wp.total_users)
    for u in range(wp.total_users):
        i = grp[u]
        e3 = sub.e3[u]
        vnorm = np.linalg.norm(sub.v[i])
        fnorm = np.linalg.norm(wp.fmat[i][:, u])
        if abs(e3) < 1e-12 * vnorm * fnorm:
            raise DegenerateAnchor(
                f"anchor point nearly orthogonal to f for user {u}")
        gamma = sub.gammas[u]
        others = np.abs(e1[:, u]) ** 2
        S = float(others.sum() - others[i])
        slack = sub.e2[u] + gamma * S - 2.0 * (e3 * e1[i, u]).real
        if slack <= 0:
            continue
        nu = solve_cubic_nu(S, sub.e2[u], abs(e3) ** 2,
                            (e3 * e1[i, u]).real, gamma)
        nus[u] = nu
        d[:, u] = e1[:, u] / (1.0 + nu * gamma)
        d[i, u] = e1[i, u] + nu * np.conj(e3)
    if return_nu:
        return d, nus
    return d


def a_update_factors(wp: WeightProblem, rho: float) -> list:
    """Per-group Cholesky factors of C_j^H C_j + (rho/2) sum_u f_ju f_ju^H."""
    factors = []
    for j in range(wp.num_groups):
        M = wp.gram[j] + (rho / 2.0) * (wp.fmat[j] @ wp.fmat[j].conj().T)
        factors.append(scipy.linalg.cho_factor(M, lower=True))
    return factors


def a_update(sub: ScaSubproblem, d: np.ndarray, q: np.ndarray, rho: float,
             cached_factors: list) -> list:
    """Exact minimizer of the a block via the cached factorizations."""
    wp = sub.wp
    a = []
    for j in range(wp.num_groups):
        rhs = (rho / 2.0) * (wp.fmat[j] @ np.conj(d[j] + q[j]))
        a.append(scipy.linalg.cho_solve(cached_factors[j], rhs))
    return a


def q_update(wp: WeightProblem, d: np.ndarray, a: list,
             q: np.ndarray) -> np.ndarray:
    """Scaled dual ascent on the coupling residual d - a^H f."""
    return q + (d - wp.cross_gains(a))


def asca_inner_solve(sub: ScaSubproblem, v: list, cfg: AscaConfig | None = None):
    """Solve one convex subproblem by two-block ADMM.

    Starts from a = v with zero gains and duals; stops on the relative change
    of the stacked weights.  Returns the weights, the iteration count, and an
    info dict with the final primal residual.
    """
    if cfg is None:
        cfg = AscaConfig()
    wp = sub.wp
    factors = a_update_factors(wp, cfg.rho)
    a = [vi.astype(np.complex128, copy=True) for vi in v]
    d = np.zeros((wp.num_groups, wp.total_users), dtype=np.complex128)
    q = np.zeros_like(d)
    converged = False
    n = 0
    for n in range(1, cfg.max_inner + 1):
        d = d_update(sub, a, q)
        a_new = a_update(sub, d, q, cfg.rho, factors)
        q = q + (d - wp.cross_gains(a_new))
        rel = np.linalg.norm(np.concatenate(a_new) - np.concatenate(a)) \
            / max(np.linalg.norm(np.concatenate(a_new)), 1e-300)
        a = a_new
        if rel <= cfg.inner_tol:
            converged = True
            break
    resid = np.linalg.norm(d - wp.cross_gains(a)) \
        / np.sqrt(wp.num_groups * wp.total_users)
    return a, n, {"converged": converged, "primal_residual": resid}


def _quartic_residual(mu: float, S: float, gamma: float, sigma2: float,
                      e1_self_sq: float) -> float:
    return gamma * S / (1.0 + mu * gamma) ** 2 + gamma * sigma2 \
        - e1_self_sq / (1.0 - mu) ** 2


def solve_quartic_mu(e1_others_sq_sum: float, gamma: float, sigma2: float,
                     e1_self_sq: float) -> float:
    """Unique root in (0, 1) of the initializer's KKT equation (active case).

    The residual is strictly decreasing on (0, 1) and diverges to -inf at 1,
    so bisection is unconditionally stable.
    """
    S = e1_others_sq_sum
    if e1_self_sq <= 0:
        raise ValueError("|e1_self|^2 must be positive")
    f0 = _quartic_residual(0.0, S, gamma, sigma2, e1_self_sq)
    if f0 <= 0:
        raise ValueError("active case requires a positive residual at mu = 0")
    lo, hi = 0.0, 1.0 - 1e-14
    if _quartic_residual(hi, S, gamma, sigma2, e1_self_sq) >= 0:
        raise ValueError("no sign change in (0, 1)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _quartic_residual(mid, S, gamma, sigma2, e1_self_sq) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    return 0.5 * (lo + hi)


def _aim_d_step(wp: WeightProblem, e1: np.ndarray) -> np.ndarray:
    """Projection of each e1 block onto the nonconvex SINR gain set."""
    grp = wp.group_of_user()
    d = e1.copy()
    for u in range(wp.total_users):
        i = grp[u]
        gamma = wp.gammas[u]
        mags = np.abs(e1[:, u]) ** 2
        S = float(mags.sum() - mags[i])
        if gamma * (S + wp.sigma2) - mags[i] <= 0:
            continue
        if mags[i] <= 1e-24 * gamma * (S + wp.sigma2):
            # measure-zero degenerate block: pick a feasible boundary point
            d[:, u] = e1[:, u] / (1.0 + gamma)
            d[i, u] = 0.0
            rest = np.abs(d[:, u]) ** 2
            d[i, u] = np.sqrt(gamma * (rest.sum() + wp.sigma2))
            continue
        mu = solve_quartic_mu(S, gamma, wp.sigma2, mags[i])
        d[:, u] = e1[:, u] / (1.0 + mu * gamma)
        d[i, u] = e1[i, u] / (1.0 - mu)
    return d


def aim_init(wp: WeightProblem, seed: int = 0, max_iters: int = 2000,
             retries: int = 10) -> list:
    """ADMM feasibility initializer.

    Alternates the nonconvex per-user gain projection with a per-group
    least-squares weight fit from random starts until the SINR constraints
    hold.  Raises InitializationFailure after ``retries`` restarts.
    """
    gram_inv_factors = []
    for j in range(wp.num_groups):
        M = wp.fmat[j] @ wp.fmat[j].conj().T
        try:
            gram_inv_factors.append(scipy.linalg.cho_factor(M, lower=True))
        except np.linalg.LinAlgError:
            reg = max(1e-10 * np.trace(M).real / M.shape[0], 1e-30)
            gram_inv_factors.append(
                scipy.linalg.cho_factor(M + reg * np.eye(M.shape[0]),
                                        lower=True))
    rng = np.random.default_rng(seed)
    off = wp.user_offsets()
    gmax = float(np.max(wp.gammas))
    for _ in range(retries):
        a = []
        for i, Ki in enumerate(wp.group_sizes):
            own = wp.fmat[i][:, off[i]:off[i + 1]]
            scale = np.sqrt(gmax * wp.sigma2) / max(
                float(np.mean(np.linalg.norm(own, axis=0))), 1e-300)
            a.append(scale * (rng.standard_normal(Ki)
                              + 1j * rng.standard_normal(Ki)) * np.sqrt(0.5))
        q = np.zeros((wp.num_groups, wp.total_users), dtype=np.complex128)
        for _n in range(max_iters):
            e1 = wp.cross_gains(a) - q
            d = _aim_d_step(wp, e1)
            a = [scipy.linalg.cho_solve(gram_inv_factors[j],
                                        wp.fmat[j] @ np.conj(d[j] + q[j]))
                 for j in range(wp.num_groups)]
            q = q + (d - wp.cross_gains(a))
            if weight_feasible(wp, a):
                return a
    raise InitializationFailure(
        f"no feasible point found after {retries} restarts")
