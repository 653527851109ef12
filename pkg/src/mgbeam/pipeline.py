"""End-to-end QoS solve: structure reduction, initialization, SCA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asca import AscaConfig, aim_init
from .esca import EscaConfig, eim_init
from .exceptions import InitializationFailure
from .instance import ProblemInstance
from .sca import ScaConfig, SolveReport, sca_solve
from .structure import (RealWeightProblem, build_weight_problem,
                        fixed_point_lambda, lift_real)


@dataclass
class QosOptions:
    """Knobs for one QoS solve."""

    engine: str = "asca"
    init: str = "aim"
    alpha: float = 0.1
    c: float = 0.8
    rho: float = 0.2
    inner_tol: float | None = None
    outer_tol: float = 1e-3
    max_inner: int = 5000
    max_outer: int = 200
    init_max_iters: int = 3000
    init_retries: int = 10
    lambda_max_iters: int = 200
    lambda_tol: float = 1e-5

    def sca_config(self) -> ScaConfig:
        if self.engine == "esca":
            tol = 1e-3 if self.inner_tol is None else self.inner_tol
            inner = EscaConfig(alpha=self.alpha, c=self.c, inner_tol=tol,
                               max_inner=self.max_inner)
        else:
            # a tighter default is needed when starting from the ADMM
            # initializer to reach the same final power as the other variants
            if self.inner_tol is not None:
                tol = self.inner_tol
            else:
                tol = 0.2e-3 if self.init == "aim" else 1e-3
            inner = AscaConfig(rho=self.rho, inner_tol=tol,
                               max_inner=self.max_inner)
        return ScaConfig(engine=self.engine, outer_tol=self.outer_tol,
                         max_outer=self.max_outer, inner=inner)


@dataclass
class QosResult:
    report: SolveReport
    rwp: RealWeightProblem
    lambda_iters: int
    init_ok: bool
    v0: list = field(repr=False, default=None)


def prepare(inst: ProblemInstance, opts: QosOptions) -> tuple:
    """Dual fixed point plus reduced-problem construction."""
    fp = fixed_point_lambda(inst, max_iters=opts.lambda_max_iters,
                            tol=opts.lambda_tol)
    wp = build_weight_problem(inst, fp.lam)
    return lift_real(wp), fp.iterations


def initial_point(rwp: RealWeightProblem, opts: QosOptions, seed: int) -> list:
    """Feasible SCA starting point from the configured initializer."""
    if opts.init == "eim":
        return eim_init(rwp, seed=seed, max_iters=opts.init_max_iters,
                        retries=opts.init_retries, alpha=opts.alpha, c=opts.c)
    if opts.init == "aim":
        return aim_init(rwp.wp, seed=seed, max_iters=opts.init_max_iters,
                        retries=opts.init_retries)
    raise ValueError(f"unknown initializer {opts.init!r}")


def solve_qos(inst: ProblemInstance, opts: QosOptions | None = None,
              seed: int = 0, v0: list | None = None) -> QosResult:
    """Solve the power-minimization problem for one instance.

    A caller-supplied v0 bypasses the initializer (it must be feasible for
    the reduced problem).  InitializationFailure propagates to the caller.
    """
    if opts is None:
        opts = QosOptions()
    rwp, lam_iters = prepare(inst, opts)
    if v0 is None:
        v0 = initial_point(rwp, opts, seed)
    report = sca_solve(rwp, v0, opts.sca_config())
    return QosResult(report=report, rwp=rwp, lambda_iters=lam_iters,
                     init_ok=True, v0=v0)
