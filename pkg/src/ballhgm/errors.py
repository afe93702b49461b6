"""Exception hierarchy shared by every module in the package."""

from __future__ import annotations


class HgmError(Exception):
    """Base class for all errors raised by :mod:`ballhgm`."""


class NonPositiveVariance(HgmError, ValueError):
    pass


class NonFinite(HgmError, ValueError):
    pass


class NoConvergence(HgmError, ArithmeticError):
    pass


class SingularRadius(HgmError, ValueError):
    """The Pfaffian system was evaluated at r = 0."""


class GroupSeparationTooSmall(HgmError, ValueError):
    pass


class SolverError(HgmError, ArithmeticError):
    """Failure inside the ODE driver; ``radius`` is how far it got."""

    def __init__(self, message: str, radius: float):
        super().__init__(f"{message} (reached r={radius:.10g})")
        self.radius = radius


class StepUnderflow(SolverError):
    pass


class StepBudgetExceeded(SolverError):
    pass


class OverflowUnrecoverable(SolverError):
    pass
