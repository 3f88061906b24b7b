"""Exception hierarchy shared by every module."""


class JKOError(Exception):
    """Base class for all library errors."""


class EmptyInput(JKOError, ValueError):
    pass


class DimensionMismatch(JKOError, ValueError):
    pass


class NonFiniteCoordinate(JKOError, ValueError):
    pass


class InvalidParameter(JKOError, ValueError):
    pass


class SizeMismatch(JKOError, ValueError):
    pass


class TooLarge(JKOError, ValueError):
    pass


class NonUniqueOptimum(JKOError):
    """An optimal assignment has a competitor within the tie tolerance."""


class AlphaOutOfRange(JKOError, ValueError):
    pass


class InvalidPlan(JKOError, ValueError):
    pass


class EvaluationError(JKOError):
    pass


class StepTooLarge(JKOError, ValueError):
    """Time step violates ``tau < 1 / lambda_minus``."""


class NoConvergence(JKOError):
    pass


class IntegratorNotConverged(JKOError):
    pass


class HypothesisViolated(JKOError):
    """Instance parameters fall outside the hypotheses of an inequality."""
