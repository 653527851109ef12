"""Optimal-structure reduction of the beamforming problem.

The QoS problem over G length-N beamformers is reduced to a weight problem
over K_tot complex weights by parameterizing each beamformer as a weighted
MMSE filter w_i = R(lambda)^{-1} H_i a_i.  All quantities that the inner
solvers touch (C_i^H C_i Gram matrices and the cross vectors f_jik) are
K-dimensional, so the per-iteration cost is independent of N.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .instance import ProblemInstance


class FixedPointResult(NamedTuple):
    lam: np.ndarray          # flat (K_tot,), group-major
    iterations: int
    converged: bool


def build_R(inst: ProblemInstance, lam: np.ndarray) -> np.ndarray:
    """Noise-plus-weighted-channel covariance I + sum lam_ik gamma_ik h h^H."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (inst.total_users,) or np.any(lam < 0):
        raise ValueError("lam must be a nonnegative vector of length K_tot")
    R = np.eye(inst.n, dtype=np.complex128)
    off = inst.user_offsets()
    for i, H in enumerate(inst.channels):
        wts = lam[off[i]:off[i + 1]] * inst.gammas[i]
        # H rows are user channels: sum_k wts_k h_k h_k^H
        R += (H.T * wts) @ H.conj()
    return R


def fixed_point_lambda(inst: ProblemInstance, max_iters: int = 200,
                       tol: float = 1e-5) -> FixedPointResult:
    """Uplink-downlink duality fixed point for the dual parameters.

    Iterates lam_ik <- 1 / ((1 + 1/gamma_ik) * h_ik^H R(lam)^{-1} h_ik) from
    lam = 1/N until the maximum relative change drops below ``tol``.
    Non-convergence is reported, not fatal: any nonnegative lam gives a valid
    parameterization of the reduced problem.
    """
    if max_iters < 1 or tol <= 0:
        raise ValueError("max_iters must be >= 1 and tol > 0")
    gammas = inst.gammas_flat()
    lam = np.full(inst.total_users, 1.0 / inst.n)
    lam_prev = lam
    H_all = np.vstack(inst.channels)  # (K_tot, N), rows h_ik
    for it in range(1, max_iters + 1):
        R = build_R(inst, lam)
        if not np.all(np.isfinite(R)):
            return FixedPointResult(lam_prev, it, False)
        lam_prev = lam
        cho = scipy.linalg.cho_factor(R, lower=True)
        X = scipy.linalg.cho_solve(cho, H_all.conj().T)  # R^{-1} h for each user
        quad = np.einsum("kn,nk->k", H_all, X).real
        new = 1.0 / ((1.0 + 1.0 / gammas) * quad)
        if not np.all(np.isfinite(new)) or np.any(new <= 0):
            # divergent update (e.g. unattainable targets): keep the last
            # finite iterate, which still parameterizes a valid reduction
            return FixedPointResult(lam, it, False)
        change = np.max(np.abs(new - lam) / np.maximum(np.abs(new), 1e-300))
        lam = new
        if change <= tol:
            return FixedPointResult(lam, it, True)
    return FixedPointResult(lam, max_iters, False)


@dataclass(frozen=True)
class WeightProblem:
    """Reduced problem data for the weight optimization.

    ``C[i]`` is the (N, K_i) solution of R C_i = H_i^T; column u of the
    (K_j, K_tot) matrix ``fmat[j]`` is the cross vector C_j^H h_u for flat
    user index u; ``gram[i]`` caches C_i^H C_i so objective evaluations never
    touch the antenna dimension.
    """

    group_sizes: list
    C: list = field(repr=False)
    fmat: list = field(repr=False)
    gram: list = field(repr=False)
    gammas: np.ndarray = field(repr=False)
    sigma2: float = 0.0

    @property
    def num_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def total_users(self) -> int:
        return int(sum(self.group_sizes))

    def user_offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.group_sizes)))

    def group_of_user(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_groups), self.group_sizes)

    def f(self, j: int, u: int) -> np.ndarray:
        """Cross vector f_jik = C_j^H h_u for flat user index u."""
        return self.fmat[j][:, u]

    def cross_gains(self, a: list) -> np.ndarray:
        """Matrix of a_j^H f_ju for every group j and flat user u, shape (G, K_tot)."""
        return np.vstack([a[j].conj() @ self.fmat[j] for j in range(self.num_groups)])


def build_weight_problem(inst: ProblemInstance, lam: np.ndarray) -> WeightProblem:
    """Assemble the reduced weight problem for the given dual parameters.

    Uses one Cholesky factorization of R; R is never inverted explicitly.
    """
    R = build_R(inst, lam)
    cho = scipy.linalg.cho_factor(R, lower=True)
    C = [scipy.linalg.cho_solve(cho, H.T) for H in inst.channels]  # (N, K_i)
    h_all = np.vstack(inst.channels)  # rows h_u
    fmat = [C[j].conj().T @ h_all.T for j in range(inst.num_groups)]  # (K_j, K_tot)
    gram = [Ci.conj().T @ Ci for Ci in C]
    return WeightProblem(group_sizes=list(inst.group_sizes), C=C, fmat=fmat,
                         gram=gram, gammas=inst.gammas_flat(), sigma2=inst.sigma2)


def recover_beamformers(wp: WeightProblem, a: list) -> list:
    """Map weight vectors back to beamformers: w_i = C_i a_i."""
    if len(a) != wp.num_groups:
        raise ValueError("expected one weight vector per group")
    out = []
    for Ci, ai in zip(wp.C, a):
        ai = np.asarray(ai, dtype=np.complex128)
        if ai.shape != (Ci.shape[1],):
            raise ValueError("weight vector length must equal the group size")
        out.append(Ci @ ai)
    return out


def weight_objective(wp: WeightProblem, a: list) -> float:
    """Total transmit power sum_i ||C_i a_i||^2 via the cached Gram matrices."""
    return float(sum(np.vdot(ai, Gi @ ai).real for Gi, ai in zip(wp.gram, a)))


def weight_sinr(wp: WeightProblem, a: list) -> np.ndarray:
    """Per-user SINR of a weight solution, flat group-major order."""
    grp = wp.group_of_user()
    p = np.abs(wp.cross_gains(a)) ** 2
    sig = p[grp, np.arange(wp.total_users)]
    interf = p.sum(axis=0) - sig
    return sig / (interf + wp.sigma2)


def weight_feasible(wp: WeightProblem, a: list, rel_tol: float = 0.0) -> bool:
    """True iff the reduced-problem SINR constraints hold within rel_tol."""
    return bool(np.all(weight_sinr(wp, a) >= wp.gammas * (1.0 - rel_tol)))


def _real_lift_matrix(M: np.ndarray) -> np.ndarray:
    """[[Re M, -Im M], [Im M, Re M]] block embedding of a complex matrix."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


@dataclass(frozen=True)
class RealWeightProblem:
    """Real lifting of a weight problem for the extragradient engine.

    ``obj_gram[i]`` is the symmetric PSD lifting of C_i^H C_i, with Cholesky
    factor ``obj_factor[i]`` acting as the objective operator; ``Ft[i]`` packs
    the rank-2 factors of every quadratic-form matrix F_{i,u} column-wise
    (2 columns per flat user), so x^T F x costs O(K) and F is never densified.
    """

    wp: WeightProblem = field(repr=False)
    obj_gram: list = field(repr=False)
    obj_factor: list = field(repr=False)
    Ft: list = field(repr=False)   # Ft[i]: (2K_i, 2*K_tot)

    @property
    def group_sizes(self) -> list:
        return self.wp.group_sizes

    def x_offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum([2 * k for k in self.group_sizes])))

    def tilde_f(self, i: int, u: int) -> np.ndarray:
        """Rank-2 factor of F_{i,u} as a (2K_i, 2) block."""
        return self.Ft[i][:, 2 * u:2 * u + 2]


def lift_real(wp: WeightProblem) -> RealWeightProblem:
    """Build the real-variable representation used by the saddle-point solver."""
    obj_gram = []
    obj_factor = []
    for G in wp.gram:
        Gr = _real_lift_matrix(G)
        Gr = 0.5 * (Gr + Gr.T)
        try:
            L = np.linalg.cholesky(Gr)
        except np.linalg.LinAlgError:
            jitter = 1e-14 * max(np.trace(Gr) / Gr.shape[0], 1.0)
            L = np.linalg.cholesky(Gr + jitter * np.eye(Gr.shape[0]))
        obj_gram.append(Gr)
        obj_factor.append(L)
    Ft = []
    for i, Ki in enumerate(wp.group_sizes):
        blocks = np.empty((2 * Ki, 2 * wp.total_users))
        for u in range(wp.total_users):
            fv = wp.fmat[i][:, u]
            blocks[:, 2 * u] = np.concatenate([fv.real, fv.imag])
            blocks[:, 2 * u + 1] = np.concatenate([-fv.imag, fv.real])
        Ft.append(blocks)
    return RealWeightProblem(wp=wp, obj_gram=obj_gram, obj_factor=obj_factor, Ft=Ft)


def lift_weights(a: list) -> np.ndarray:
    """Stack [Re a_i; Im a_i] blocks into one real vector."""
    return np.concatenate([np.concatenate([ai.real, ai.imag]) for ai in a])


def unlift_weights(x: np.ndarray, group_sizes: list) -> list:
    """Inverse of :func:`lift_weights`."""
    out = []
    pos = 0
    for k in group_sizes:
        xi = x[pos:pos + 2 * k]
        out.append(xi[:k] + 1j * xi[k:])
        pos += 2 * k
    return out
