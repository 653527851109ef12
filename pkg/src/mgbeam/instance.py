"""Problem data: channels, SINR targets, and evaluation of candidate beamformers.

A problem instance collects everything needed to state the power-minimization
(QoS) problem and, when a power budget is present, the max-min-fair problem.
Beamforming solutions are plain lists of complex vectors, one per group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable multi-group multicast problem data.

    Parameters
    ----------
    n : int
        Number of transmit antennas.
    channels : list of ndarray
        One complex array of shape (K_i, n) per group; row k is the channel
        of user k in that group.
    gammas : list of ndarray
        One positive real array of shape (K_i,) per group with the SINR
        targets.
    sigma2 : float
        Receiver noise power (common to all users).
    power_budget : float or None
        Transmit power budget; only used by the max-min-fair problem.
    """

    n: int
    channels: list = field(repr=False)
    gammas: list = field(repr=False)
    sigma2: float
    power_budget: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(self.channels) != len(self.gammas):
            raise ValueError("channels and gammas must have one entry per group")
        if not self.channels:
            raise ValueError("at least one group is required")
        chans = []
        gams = []
        for H, g in zip(self.channels, self.gammas):
            H = np.asarray(H, dtype=np.complex128)
            g = np.asarray(g, dtype=np.float64)
            if H.ndim != 2 or H.shape[1] != self.n:
                raise ValueError("each channel array must have shape (K_i, n)")
            if g.shape != (H.shape[0],) or H.shape[0] < 1:
                raise ValueError("gammas must match the user count of the group")
            if np.any(g <= 0):
                raise ValueError("SINR targets must be positive")
            H.setflags(write=False)
            g.setflags(write=False)
            chans.append(H)
            gams.append(g)
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.power_budget is not None and self.power_budget <= 0:
            raise ValueError("power_budget must be positive")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "gammas", gams)

    @property
    def num_groups(self) -> int:
        return len(self.channels)

    @property
    def group_sizes(self) -> list:
        return [H.shape[0] for H in self.channels]

    @property
    def total_users(self) -> int:
        return sum(self.group_sizes)

    def user_offsets(self) -> np.ndarray:
        """Start index of each group in the flat (group-major) user order."""
        return np.concatenate(([0], np.cumsum(self.group_sizes)))

    def gammas_flat(self) -> np.ndarray:
        return np.concatenate(self.gammas)

    def with_targets(self, gammas: list, power_budget: float | None = None
                     ) -> "ProblemInstance":
        """Copy of this instance with new SINR targets."""
        return ProblemInstance(
            n=self.n,
            channels=self.channels,
            gammas=[np.asarray(g, dtype=float) for g in gammas],
            sigma2=self.sigma2,
            power_budget=self.power_budget if power_budget is None else power_budget,
        )


def generate_instance(n: int, g: int, k: int, sinr_db: float, sigma2: float,
                      seed: int, power_budget: float | None = None
                      ) -> ProblemInstance:
    """Draw a random instance with i.i.d. unit-variance complex Gaussian channels.

    Each channel entry is built from two independent N(0, 1/2) draws (real and
    imaginary part) from a seeded PCG64 stream, so results are reproducible
    across platforms.  All users share the SINR target 10^(sinr_db/10).
    """
    if min(n, g, k) < 1:
        raise ValueError("n, g, k must all be at least 1")
    rng = np.random.default_rng(seed)
    gamma = 10.0 ** (sinr_db / 10.0)
    channels = []
    for _ in range(g):
        re = rng.standard_normal((k, n))
        im = rng.standard_normal((k, n))
        channels.append(np.sqrt(0.5) * (re + 1j * im))
    gammas = [np.full(k, gamma) for _ in range(g)]
    return ProblemInstance(n=n, channels=channels, gammas=gammas,
                           sigma2=sigma2, power_budget=power_budget)


def sinr(inst: ProblemInstance, w: list) -> list:
    """Per-user SINR of a beamforming solution.

    Parameters
    ----------
    w : list of ndarray
        One complex beamforming vector of length n per group.

    Returns
    -------
    list of ndarray
        One array of shape (K_i,) per group.
    """
    if len(w) != inst.num_groups:
        raise ValueError("expected one beamforming vector per group")
    w = [np.asarray(wi, dtype=np.complex128) for wi in w]
    for wi in w:
        if wi.shape != (inst.n,):
            raise ValueError("beamforming vectors must have length n")
    out = []
    for i, H in enumerate(inst.channels):
        # received power of every group's beam at this group's users
        rx = np.abs(H.conj() @ np.column_stack(w)) ** 2  # (K_i, G)
        sig = rx[:, i]
        interf = rx.sum(axis=1) - sig
        out.append(sig / (interf + inst.sigma2))
    return out


def total_power(w: list) -> float:
    """Total transmit power sum_i ||w_i||^2."""
    return float(sum(np.vdot(wi, wi).real for wi in w))


def check_qos_feasible(inst: ProblemInstance, w: list, rel_tol: float = 0.0) -> bool:
    """True iff SINR_ik >= gamma_ik * (1 - rel_tol) for every user."""
    if rel_tol < 0:
        raise ValueError("rel_tol must be nonnegative")
    for s, g in zip(sinr(inst, w), inst.gammas):
        if np.any(s < g * (1.0 - rel_tol)):
            return False
    return True


def scale_beamformers(w: list, factor: float) -> list:
    """Multiply every beamforming vector by a common scalar."""
    return [factor * wi for wi in w]


def save_instance(inst: ProblemInstance, path) -> None:
    """Write an instance as JSON (value-exact round trip for finite doubles)."""
    groups = []
    for H, g in zip(inst.channels, inst.gammas):
        groups.append({
            "gammas": g.tolist(),
            "channels": [[[float(c.real), float(c.imag)] for c in row] for row in H],
        })
    doc = {
        "n": inst.n,
        "sigma2": inst.sigma2,
        "power_budget": inst.power_budget,
        "groups": groups,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path) -> ProblemInstance:
    """Read an instance written by :func:`save_instance`."""
    with open(path) as fh:
        doc = json.load(fh)
    channels = []
    gammas = []
    for grp in doc["groups"]:
        gammas.append(np.asarray(grp["gammas"], dtype=float))
        rows = [[complex(re, im) for re, im in row] for row in grp["channels"]]
        channels.append(np.asarray(rows, dtype=np.complex128))
    return ProblemInstance(n=int(doc["n"]), channels=channels, gammas=gammas,
                           sigma2=float(doc["sigma2"]),
                           power_budget=doc["power_budget"])
