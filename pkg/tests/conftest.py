import numpy as np
import pytest

from mgbeam import QosOptions, generate_instance
from mgbeam.pipeline import initial_point, prepare
from mgbeam.sca import convexify


def small_problem(n=16, g=2, k=2, sinr_db=6.0, seed=0, init="aim"):
    """Desk-size reduced problem with a feasible start, for unit tests."""
    inst = generate_instance(n, g, k, sinr_db, 1.0, seed)
    opts = QosOptions(init=init)
    rwp, _ = prepare(inst, opts)
    v0 = initial_point(rwp, opts, seed)
    return inst, rwp, v0


@pytest.fixture
def problem16():
    return small_problem()


@pytest.fixture
def subproblem16(problem16):
    inst, rwp, v0 = problem16
    return rwp, v0, convexify(rwp, v0)


def random_weights(wp, rng, scale=1.0):
    return [scale * np.sqrt(0.5) * (rng.standard_normal(k)
                                    + 1j * rng.standard_normal(k))
            for k in wp.group_sizes]
