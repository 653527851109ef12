"""Outer successive-convex-approximation loop.

Each iteration convexifies the nonconvex SINR constraints around the current
point v, hands the resulting convex subproblem to an inner engine
(extragradient or ADMM based), and repeats from the subproblem solution until
the weight vector stops moving.  Every accepted iterate is feasible for the
original weight problem, so the power trace is monotone and a partial run is
still a usable solution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateAnchor, EngineFailure, InfeasibleStart
from .structure import (RealWeightProblem, WeightProblem, lift_real,
                        lift_weights, recover_beamformers, weight_feasible,
                        weight_objective)

# accepted relative violation of a convexified constraint before the iterate
# is rescaled back into the feasible set
FEAS_SLACK = 1e-9


@dataclass(frozen=True)
class ScaSubproblem:
    """Convexified subproblem data anchored at an expansion point v.

    For flat user u in group i, the constraint reads

        gamma_u * sum_{j != i} |a_j^H f_ju|^2 + e2_u - 2 Re{(a_i^H f_iu) e3_u} <= 0

    with e2_u = |v_i^H f_iu|^2 + gamma_u sigma^2 and e3_u = f_iu^H v_i.
    The real-lifted tables needed by the saddle-point engine (objective Gram
    lifting, rank-2 constraint factors, and the anchor cross terms) are cached
    here so gradient evaluations are pure matrix-vector work.
    """

    rwp: RealWeightProblem = field(repr=False)
    v: list = field(repr=False)
    y: np.ndarray = field(repr=False)          # stacked real lifting of v
    sig_quad: np.ndarray = field(repr=False)   # |v_i^H f_iu|^2 per user
    e2: np.ndarray = field(repr=False)
    e3: np.ndarray = field(repr=False)         # f_iu^H v_i per user
    gy: list = field(repr=False)               # gy[i]: (2K_i, K_i) cols F_{i,u} y_i

    @property
    def wp(self) -> WeightProblem:
        return self.rwp.wp

    @property
    def gammas(self) -> np.ndarray:
        return self.wp.gammas

    @property
    def sigma2(self) -> float:
        return self.wp.sigma2

    def constraint_values(self, a: list) -> np.ndarray:
        """Convexified constraint left-hand sides; feasible iff all <= 0."""
        wp = self.wp
        grp = wp.group_of_user()
        d = wp.cross_gains(a)
        p = np.abs(d) ** 2
        users = np.arange(wp.total_users)
        interf = p.sum(axis=0) - p[grp, users]
        own = d[grp, users]
        return self.gammas * interf + self.e2 - 2.0 * (own * self.e3).real

    def original_constraint_values(self, a: list) -> np.ndarray:
        """Left-hand sides of the original (nonconvex) SINR constraints."""
        wp = self.wp
        grp = wp.group_of_user()
        p = np.abs(wp.cross_gains(a)) ** 2
        users = np.arange(wp.total_users)
        sig = p[grp, users]
        interf = p.sum(axis=0) - sig
        return self.gammas * (interf + self.sigma2) - sig


def convexify(rwp: RealWeightProblem, v: list) -> ScaSubproblem:
    """Build the convex subproblem anchored at v."""
    wp = rwp.wp
    grp = wp.group_of_user()
    off = wp.user_offsets()
    d = wp.cross_gains(v)
    users = np.arange(wp.total_users)
    own = d[grp, users]
    sig_quad = np.abs(own) ** 2
    e2 = sig_quad + wp.gammas * wp.sigma2
    e3 = own.conj()  # f_iu^H v_i = conj(v_i^H f_iu)
    y = lift_weights(v)
    xoff = rwp.x_offsets()
    gy = []
    for i in range(wp.num_groups):
        yi = y[xoff[i]:xoff[i + 1]]
        cols = rwp.Ft[i].T @ yi                       # (2 K_tot,)
        pairs = cols.reshape(wp.total_users, 2)
        own_users = np.arange(off[i], off[i + 1])
        block = rwp.Ft[i][:, 2 * off[i]:2 * off[i + 1]]
        # F_{i,u} y_i for the group's own users, one column per user
        mats = np.empty((2 * wp.group_sizes[i], len(own_users)))
        for c, u in enumerate(own_users):
            mats[:, c] = block[:, 2 * c:2 * c + 2] @ pairs[u]
        gy.append(mats)
    return ScaSubproblem(rwp=rwp, v=[vi.copy() for vi in v], y=y,
                         sig_quad=sig_quad, e2=e2, e3=e3, gy=gy)


def feasibility_scale(sub: ScaSubproblem, a: list) -> float | None:
    """Smallest common scale s making s*a feasible for the subproblem.

    Each convexified constraint is quadratic in the scale,
    A s^2 - B s + e2 <= 0, so per-constraint feasible intervals come in
    closed form; None is returned when the intervals have empty intersection.
    """
    wp = sub.wp
    grp = wp.group_of_user()
    d = wp.cross_gains(a)
    p = np.abs(d) ** 2
    users = np.arange(wp.total_users)
    A = sub.gammas * (p.sum(axis=0) - p[grp, users])
    B = 2.0 * (d[grp, users] * sub.e3).real
    lo = 0.0
    hi = np.inf
    for Au, Bu, cu in zip(A, B, sub.e2):
        if Au <= 1e-300:
            if Bu <= 0:
                return None
            lo = max(lo, cu / Bu)
            continue
        disc = Bu * Bu - 4.0 * Au * cu
        if disc < 0 or Bu <= 0:
            return None
        root = np.sqrt(disc)
        lo = max(lo, (Bu - root) / (2.0 * Au))
        hi = min(hi, (Bu + root) / (2.0 * Au))
    if lo > hi or lo <= 0:
        return None
    return lo


def enforce_subproblem_feasibility(sub: ScaSubproblem, a: list) -> list | None:
    """Return a (possibly rescaled) iterate feasible for the subproblem."""
    vals = sub.constraint_values(a)
    if np.all(vals <= FEAS_SLACK * sub.e2):
        return a
    s = feasibility_scale(sub, a)
    if s is None:
        return None
    scaled = [s * ai for ai in a]
    if np.all(sub.constraint_values(scaled) <= FEAS_SLACK * sub.e2):
        return scaled
    return None


@dataclass
class ScaConfig:
    """Outer-loop settings; ``inner`` holds the engine-specific config."""

    engine: str = "asca"
    outer_tol: float = 1e-3
    max_outer: int = 200
    inner: object = None

    def __post_init__(self):
        if self.outer_tol <= 0 or self.max_outer < 1:
            raise ValueError("outer_tol must be > 0 and max_outer >= 1")
        if self.engine not in ("esca", "asca"):
            raise ValueError(f"unknown engine {self.engine!r}")


@dataclass
class SolveReport:
    """Result of one SCA run."""

    a: list
    w: list
    power: float
    power_trace: list
    inner_iters: list
    outer_iters: int
    wall_s: float
    termination: str
    feasible: bool


def _stacked(a: list) -> np.ndarray:
    return np.concatenate(a)


def sca_solve(rwp: RealWeightProblem, v0: list, cfg: ScaConfig) -> SolveReport:
    """Run the outer SCA loop from a feasible start.

    Raises InfeasibleStart when v0 violates a reduced-problem SINR constraint
    by more than 1e-9 relative.  Engine failures mid-run are not fatal: the
    best feasible iterate reached so far is returned with the termination
    reason recorded.
    """
    wp = rwp.wp
    if not weight_feasible(wp, v0, rel_tol=1e-9):
        raise InfeasibleStart("starting point violates the SINR constraints")
    if cfg.engine == "esca":
        from .esca import esca_inner_solve as inner
    else:
        from .asca import asca_inner_solve as inner

    t0 = time.perf_counter()
    v = [np.asarray(vi, dtype=np.complex128) for vi in v0]
    power_trace = []
    inner_iters = []
    termination = "max_outer"
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        sub = convexify(rwp, v)
        try:
            a, n_inner, _ = inner(sub, v, cfg.inner)
        except (EngineFailure, DegenerateAnchor):
            termination = "engine_failure"
            outer -= 1
            break
        a = enforce_subproblem_feasibility(sub, a)
        if a is None:
            termination = "engine_failure"
            outer -= 1
            break
        inner_iters.append(n_inner)
        power_trace.append(weight_objective(wp, a))
        rel = np.linalg.norm(_stacked(a) - _stacked(v)) / np.linalg.norm(_stacked(a))
        v = a
        if rel <= cfg.outer_tol:
            termination = "converged"
            break
    w = recover_beamformers(wp, v)
    return SolveReport(
        a=v, w=w, power=weight_objective(wp, v), power_trace=power_trace,
        inner_iters=inner_iters, outer_iters=outer,
        wall_s=time.perf_counter() - t0, termination=termination,
        feasible=weight_feasible(wp, v, rel_tol=1e-6),
    )
