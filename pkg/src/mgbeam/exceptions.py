"""Exception types shared by the solver modules."""


class MgbeamError(Exception):
    """Base class for solver errors."""


class InfeasibleStart(MgbeamError):
    """The starting point violates the reduced-problem SINR constraints."""


class EngineFailure(MgbeamError):
    """An inner solver could not produce a usable iterate."""


class DegenerateAnchor(MgbeamError):
    """The expansion point makes a convexified constraint unsatisfiable."""


class InitializationFailure(MgbeamError):
    """No feasible starting point was found within the retry budget."""


class BracketFailure(MgbeamError):
    """Bisection could not bracket the target after expansion."""
