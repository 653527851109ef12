"""Scikit-learn style wrappers around the solver pipeline.

The estimators take a :class:`~mgbeam.instance.ProblemInstance` in ``fit``
and expose the computed beamformers and diagnostics as fitted attributes, so
the solvers compose with sklearn tooling (grid search over solver knobs,
cloning, parameter introspection).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .instance import ProblemInstance, sinr
from .mmf import mmf_bisection, scale_solution, solve_qos
from .pipeline import QosOptions


class MulticastQosBeamformer(BaseEstimator):
    """Minimum-power multicast beamformer with per-user SINR guarantees.

    Parameters mirror :class:`~mgbeam.pipeline.QosOptions`; fitted attributes
    are ``beamformers_`` (one complex vector per group), ``weights_``,
    ``power_``, and the full ``report_``.
    """

    def __init__(self, engine="asca", init="aim", alpha=0.1, c=0.8, rho=0.2,
                 inner_tol=None, outer_tol=1e-3, max_inner=5000,
                 max_outer=200, random_state=0):
        self.engine = engine
        self.init = init
        self.alpha = alpha
        self.c = c
        self.rho = rho
        self.inner_tol = inner_tol
        self.outer_tol = outer_tol
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.random_state = random_state

    def _options(self) -> QosOptions:
        return QosOptions(engine=self.engine, init=self.init, alpha=self.alpha,
                          c=self.c, rho=self.rho, inner_tol=self.inner_tol,
                          outer_tol=self.outer_tol, max_inner=self.max_inner,
                          max_outer=self.max_outer)

    def fit(self, X: ProblemInstance, y=None):
        if not isinstance(X, ProblemInstance):
            raise TypeError("X must be a ProblemInstance")
        res = solve_qos(X, self._options(), seed=self.random_state)
        self.instance_ = X
        self.report_ = res.report
        self.weights_ = res.report.a
        self.beamformers_ = res.report.w
        self.power_ = res.report.power
        return self

    def predict(self, X: ProblemInstance | None = None):
        """Per-user SINRs achieved by the fitted beamformers."""
        if not hasattr(self, "beamformers_"):
            raise NotFittedError("call fit first")
        inst = self.instance_ if X is None else X
        return sinr(inst, self.beamformers_)

    def score(self, X: ProblemInstance | None = None, y=None):
        """Negative transmit power (higher is better, sklearn convention)."""
        if not hasattr(self, "power_"):
            raise NotFittedError("call fit first")
        return -self.power_


class MaxMinFairBeamformer(BaseEstimator):
    """Max-min-fair multicast beamformer under a total power budget.

    ``mode='scaling'`` uses the closed-form scaling of a QoS solution and
    stores the bound certificate; ``mode='bisection'`` runs the inverse-
    problem bisection baseline.
    """

    def __init__(self, mode="scaling", engine="asca", init="aim",
                 power_budget=None, bis_tol=1e-2, random_state=0):
        self.mode = mode
        self.engine = engine
        self.init = init
        self.power_budget = power_budget
        self.bis_tol = bis_tol
        self.random_state = random_state

    def fit(self, X: ProblemInstance, y=None):
        if not isinstance(X, ProblemInstance):
            raise TypeError("X must be a ProblemInstance")
        P = self.power_budget if self.power_budget is not None \
            else X.power_budget
        if P is None:
            raise ValueError("a power budget is required (instance or param)")
        opts = QosOptions(engine=self.engine, init=self.init)
        if self.mode == "scaling":
            res = solve_qos(X, opts, seed=self.random_state)
            cert = scale_solution(X, res.report.w, P)
            self.certificate_ = cert
            self.beamformers_ = cert.w_scaled
            self.t_ = cert.t_s
        elif self.mode == "bisection":
            w, t = mmf_bisection(X, P, opts, bis_tol=self.bis_tol,
                                 seed=self.random_state)
            self.certificate_ = None
            self.beamformers_ = w
            self.t_ = t
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.instance_ = X
        return self

    def predict(self, X: ProblemInstance | None = None):
        if not hasattr(self, "beamformers_"):
            raise NotFittedError("call fit first")
        inst = self.instance_ if X is None else X
        return sinr(inst, self.beamformers_)

    def score(self, X: ProblemInstance | None = None, y=None):
        """Achieved minimum weighted SINR."""
        if not hasattr(self, "t_"):
            raise NotFittedError("call fit first")
        return self.t_
