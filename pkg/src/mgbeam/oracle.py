"""Independent reference implementations used only by the test suite.

Nothing here shares code with the production updates it validates: gradients
are checked by central finite differences, and the closed-form projections by
plain bisection on their monotone multiplier equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FdConfig:
    step: float = 1e-5

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")


def fd_gradient(fun, point: np.ndarray, cfg: FdConfig | None = None) -> np.ndarray:
    """Central-difference gradient with per-coordinate scaled steps."""
    if cfg is None:
        cfg = FdConfig()
    point = np.asarray(point, dtype=float)
    grad = np.empty_like(point)
    for i in range(point.size):
        h = cfg.step * (1.0 + abs(point[i]))
        up = point.copy()
        dn = point.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fun(up) - fun(dn)) / (2.0 * h)
    return grad


def qcqp1_projection_oracle(e1: np.ndarray, self_idx: int, gamma: float,
                            e2: float, e3: complex,
                            tol: float = 1e-12) -> np.ndarray:
    """Projection of e1 onto one convexified-constraint set, by bisection.

    Solves min ||d - e1||^2 subject to
    e2 + gamma * sum_{j != self} |d_j|^2 - 2 Re{d_self e3} <= 0 through the
    KKT stationarity map and a bisection on the multiplier.
    """
    e1 = np.asarray(e1, dtype=np.complex128)
    if abs(e3) == 0:
        raise ValueError("degenerate block: e3 must be nonzero")

    def candidate(nu: float) -> np.ndarray:
        d = e1 / (1.0 + nu * gamma)
        d[self_idx] = e1[self_idx] + nu * np.conj(e3)
        return d

    def violation(nu: float) -> float:
        d = candidate(nu)
        mags = np.abs(d) ** 2
        interf = float(mags.sum() - mags[self_idx])
        return e2 + gamma * interf - 2.0 * (d[self_idx] * e3).real

    if violation(0.0) <= 0:
        return e1.copy()
    hi = 1.0
    while violation(hi) >= 0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("failed to bracket the multiplier")
    lo = 0.0
    while hi - lo > tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if violation(mid) > 0:
            lo = mid
        else:
            hi = mid
    return candidate(0.5 * (lo + hi))


def quartic_root_oracle(e1_others_sq_sum: float, gamma: float, sigma2: float,
                        e1_self_sq: float) -> float:
    """Bisection root in (0, 1) of the initializer multiplier equation."""
    def resid(mu: float) -> float:
        return gamma * e1_others_sq_sum / (1.0 + mu * gamma) ** 2 \
            + gamma * sigma2 - e1_self_sq / (1.0 - mu) ** 2

    if resid(0.0) <= 0:
        raise ValueError("active case requires a positive residual at mu = 0")
    hi = 1.0 - 1e-13
    if resid(hi) >= 0:
        raise ValueError("no sign change in (0, 1)")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
