"""Exception hierarchy shared by all agglearn modules."""


class AggLearnError(Exception):
    """Base class for every error raised by agglearn."""


class DomainError(AggLearnError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class DivisibilityError(DomainError):
    """The bag size does not divide the sample count."""


class LengthMismatch(AggLearnError, ValueError):
    """Array lengths disagree with the bag assignment."""


class SingularSystem(AggLearnError, ArithmeticError):
    """The Gram matrix of the normal equations is numerically singular."""


class DegenerateDenominator(AggLearnError, ArithmeticError):
    """The asymptotic bias formula has a non-positive denominator."""


class DivergentVariance(AggLearnError, ArithmeticError):
    """The variance fixed point gives v* <= 0, so the limiting variance is infinite."""


class ConfigMismatch(AggLearnError, ValueError):
    """Two configuration objects disagree on a shared parameter."""


class MissingBound(AggLearnError, ValueError):
    """A loss lacks both a curvature bound and a convexity flag."""
