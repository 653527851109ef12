"""Low-complexity multi-group multicast beamforming.

Solvers for the power-minimization (QoS) and max-min-fair beamforming
problems built on the optimal-structure weight reduction, with two
first-order inner engines, feasibility initializers, and a benchmark CLI.
"""

from .estimators import MaxMinFairBeamformer, MulticastQosBeamformer
from .exceptions import (BracketFailure, DegenerateAnchor, EngineFailure,
                         InfeasibleStart, InitializationFailure, MgbeamError)
from .instance import (ProblemInstance, check_qos_feasible, generate_instance,
                       load_instance, save_instance, scale_beamformers, sinr,
                       total_power)
from .mmf import (MmfCertificate, min_weighted_sinr, mmf_bisection,
                  scale_solution, solve_mmf_scaling, upper_bound)
from .pipeline import QosOptions, QosResult, solve_qos
from .sca import ScaConfig, SolveReport
from .structure import (WeightProblem, build_weight_problem,
                        fixed_point_lambda, recover_beamformers)

__version__ = "0.1.0"

__all__ = [
    "BracketFailure", "DegenerateAnchor", "EngineFailure", "InfeasibleStart",
    "InitializationFailure", "MaxMinFairBeamformer", "MgbeamError",
    "MmfCertificate", "MulticastQosBeamformer", "ProblemInstance",
    "QosOptions", "QosResult", "ScaConfig", "SolveReport", "WeightProblem",
    "build_weight_problem", "check_qos_feasible", "fixed_point_lambda",
    "generate_instance", "load_instance", "min_weighted_sinr",
    "mmf_bisection", "recover_beamformers", "save_instance",
    "scale_beamformers", "scale_solution", "sinr", "solve_mmf_scaling",
    "solve_qos", "total_power", "upper_bound",
]
