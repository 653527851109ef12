"""Max-min-fair solutions from QoS solutions.

Two routes: a closed-form scaling of a QoS solution to the power budget,
with computable lower/upper bound certificates on the achieved min weighted
SINR, and the conventional baseline that bisects the common SINR scale using
the inverse relation between the two problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BracketFailure, InitializationFailure
from .instance import ProblemInstance, check_qos_feasible, sinr, total_power
from .pipeline import QosOptions, solve_qos
from .structure import weight_feasible, weight_sinr


class InfeasibleInput(ValueError):
    """The supplied beamformers do not satisfy the QoS constraints."""


@dataclass
class MmfCertificate:
    """Scaled solution with its achieved objective and bound terms.

    ``interference[u]`` is the inter-group interference at flat user u under
    the unscaled QoS solution; the lower bound holds unconditionally, while
    the upper bound needs an external lower estimate of the optimal QoS power
    (see :func:`upper_bound`).
    """

    w_scaled: list = field(repr=False)
    t_s: float = 0.0
    p_qos: float = 0.0
    power_budget: float = 0.0
    sigma2: float = 0.0
    interference: np.ndarray = field(repr=False, default=None)
    lower_bound: float = 0.0


def min_weighted_sinr(inst: ProblemInstance, w: list) -> float:
    """min over users of SINR_ik / gamma_ik."""
    return float(min(np.min(s / g) for s, g in zip(sinr(inst, w), inst.gammas)))


def _interference_flat(inst: ProblemInstance, w: list) -> np.ndarray:
    out = []
    for i, H in enumerate(inst.channels):
        rx = np.abs(H.conj() @ np.column_stack(w)) ** 2
        out.append(rx.sum(axis=1) - rx[:, i])
    return np.concatenate(out)


def scale_solution(inst: ProblemInstance, w_qos: list, P: float,
                   feas_tol: float = 1e-6) -> MmfCertificate:
    """Scale a QoS-feasible solution to the power budget P.

    The scaled solution is feasible for the max-min problem by construction;
    the certificate records the achieved objective t_s and the closed-form
    lower bound (P/P_Q) * min_u (I_u + s2) / ((P/P_Q) I_u + s2).
    """
    if P <= 0:
        raise ValueError("P must be positive")
    if not check_qos_feasible(inst, w_qos, rel_tol=feas_tol):
        raise InfeasibleInput("w_qos violates the QoS SINR constraints")
    p_qos = total_power(w_qos)
    ratio = P / p_qos
    w_s = [np.sqrt(ratio) * wi for wi in w_qos]
    interference = _interference_flat(inst, w_qos)
    lower = ratio * float(np.min((interference + inst.sigma2)
                                 / (ratio * interference + inst.sigma2)))
    return MmfCertificate(
        w_scaled=w_s, t_s=min_weighted_sinr(inst, w_s), p_qos=p_qos,
        power_budget=P, sigma2=inst.sigma2, interference=interference,
        lower_bound=lower)


def upper_bound(cert: MmfCertificate, p_opt: float) -> float:
    """Upper bound on the achievable objective, given a lower estimate of the
    optimal QoS power.

    Monotone non-increasing in ``p_opt``; with the true optimal power it
    bounds the scaling scheme's objective from above.
    """
    if p_opt <= 0:
        raise ValueError("p_opt must be positive")
    ratio = cert.power_budget / cert.p_qos
    frac = (cert.interference + cert.sigma2) \
        / (ratio * cert.interference + cert.sigma2)
    return cert.power_budget / p_opt * float(np.max(frac))


def _warm_start(rwp, a_prev):
    """Scale a previous weight solution into the new feasible set, if possible."""
    wp = rwp.wp
    if a_prev is None:
        return None
    s = weight_sinr(wp, a_prev)
    if np.all(s >= wp.gammas):
        return a_prev
    # SINR under a common scale sqrt(t): sig*t / (I*t + s2); solvable iff the
    # zero-noise SINR already exceeds the target
    grp = wp.group_of_user()
    p = np.abs(wp.cross_gains(a_prev)) ** 2
    users = np.arange(wp.total_users)
    sig = p[grp, users]
    interf = p.sum(axis=0) - sig
    margin = sig - wp.gammas * interf
    if np.any(margin <= 0):
        return None
    t = np.max(wp.gammas * wp.sigma2 / margin) * (1.0 + 1e-9)
    cand = [np.sqrt(t) * ai for ai in a_prev]
    return cand if weight_feasible(wp, cand) else None


@dataclass
class BisectionTrace:
    t_values: list = field(default_factory=list)
    powers: list = field(default_factory=list)


def mmf_bisection(inst: ProblemInstance, P: float, opts: QosOptions | None = None,
                  t_lo: float = 0.1, t_hi: float = 10.0, bis_tol: float = 1e-2,
                  seed: int = 0, max_expand: int = 6,
                  return_trace: bool = False):
    """Baseline max-min solver: bisect the SINR scale t on QoS solves.

    Solves the QoS problem at targets t*gamma and adjusts t until the
    achieved power matches the budget within ``bis_tol`` relative.  Returns
    the beamformers of the best power-feasible iterate and its t (and the
    evaluated (t, power) trace when requested).
    """
    if opts is None:
        opts = QosOptions()
    trace = BisectionTrace()
    warm = {"a": None}

    def power_at(t: float):
        targets = [t * g for g in inst.gammas]
        inst_t = inst.with_targets(targets)
        from .pipeline import prepare, initial_point
        rwp, _ = prepare(inst_t, opts)
        v0 = _warm_start(rwp, warm["a"])
        if v0 is None:
            try:
                v0 = initial_point(rwp, opts, seed)
            except InitializationFailure:
                return None
        from .sca import sca_solve
        rep = sca_solve(rwp, v0, opts.sca_config())
        warm["a"] = rep.a
        trace.t_values.append(t)
        trace.powers.append(rep.power)
        return rep

    # expand the bracket so that power(t_lo) <= P <= power(t_hi)
    rep_lo = power_at(t_lo)
    expand = 0
    while rep_lo is not None and rep_lo.power > P and expand < max_expand:
        t_lo /= 2.0
        rep_lo = power_at(t_lo)
        expand += 1
    if rep_lo is None or rep_lo.power > P:
        raise BracketFailure("could not find a lower bracket for t")
    rep_hi = power_at(t_hi)
    expand = 0
    while rep_hi is not None and rep_hi.power < P and expand < max_expand:
        t_hi *= 2.0
        rep_hi = power_at(t_hi)
        expand += 1
    if rep_hi is None or rep_hi.power < P:
        raise BracketFailure("could not find an upper bracket for t")

    best_t, best_rep = t_lo, rep_lo
    while abs(best_rep.power - P) / P > bis_tol:
        t_mid = 0.5 * (t_lo + t_hi)
        rep = power_at(t_mid)
        if rep is None or rep.power > P:
            t_hi = t_mid
        else:
            t_lo = t_mid
            best_t, best_rep = t_mid, rep
        if t_hi - t_lo <= 1e-12 * t_hi:
            break
    w = best_rep.w
    if return_trace:
        return w, best_t, trace
    return w, best_t


def solve_mmf_scaling(inst: ProblemInstance, P: float,
                      opts: QosOptions | None = None, seed: int = 0):
    """Closed-form max-min route: QoS solve at the nominal targets + scaling."""
    res = solve_qos(inst, opts, seed=seed)
    cert = scale_solution(inst, res.report.w, P)
    return cert, res
