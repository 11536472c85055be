"""
Exception hierarchy. NumericalFailure maps to exit code 2, UsageError to 1.
"""
from typing import Optional, Sequence


class CutoffLabError(Exception):
    """Base class for every error raised by cutofflab"""

    exit_code = 2


class UsageError(CutoffLabError):
    exit_code = 1


class NumericalFailure(CutoffLabError):
    exit_code = 2


class DomainError(UsageError):
    """Arguments outside the domain of a closed form (e.g. n <= A^2)"""


class OutOfRange(UsageError):
    """Abscissa outside the tabulated range of a grid function"""

    def __init__(self, message: str, x: Optional[float] = None):
        super().__init__(message)
        self.x = x


class EmptySample(UsageError):
    pass


class StepFailure(NumericalFailure):
    """ODE step controller could not meet tolerance"""


class QuadFailure(NumericalFailure):
    """Adaptive quadrature exceeded its refinement budget"""


class StepBudgetExceeded(NumericalFailure):
    """One or more paths did not reach pi within max_steps"""

    def __init__(self, message: str, path_indices: Sequence[int] = ()):
        super().__init__(message)
        self.path_indices = list(path_indices)


class BracketFailure(NumericalFailure):
    pass


class NoSolution(NumericalFailure):
    """No root of a defining equation; eps is beyond the admissible range"""


class MembershipFailure(NumericalFailure):
    """Avatar derivative violates the domination condition somewhere on the grid"""

    def __init__(self, message: str, x: float = float("nan"), margin: float = float("nan")):
        super().__init__(message)
        self.x = x
        self.margin = margin


class DegenerateBound(NumericalFailure):
    pass


class HypothesisViolated(NumericalFailure):
    pass


class OrderViolation(RuntimeWarning):
    """Coupled radial pair left its ordering by more than the scheme tolerance"""
