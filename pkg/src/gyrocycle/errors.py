"""Exception types shared across the package."""


class GyratorError(Exception):
    """Base class for all gyrocycle errors."""


class NonSpdInput(GyratorError):
    """A matrix that must be symmetric positive definite is not."""


class DegenerateCurve(GyratorError):
    """A curve operation received coincident points or a zero-length cycle."""


class ChartViolation(GyratorError):
    """A curve or point leaves the valid region of the polar chart (r < r_min)."""


class CollapsedCycle(GyratorError):
    """The optimal cycle shrank to a point: no positive-work cycle at this mu."""


class LostPositivity(GyratorError):
    """Covariance integration produced a non-positive-definite state (dt too large)."""


class UnstableIntegration(GyratorError):
    """Ensemble positions diverged beyond the stability guard."""


class InconsistentDerivatives(GyratorError):
    """Supplied covariance derivatives disagree with finite differences of the path."""


class NoCrossing(GyratorError):
    """Requested efficiency exceeds every efficiency achievable on the sweep."""
