"""Exception types shared across the package."""


class MirrorGasError(Exception):
    """Base class for package-specific failures."""


class UnsupportedSizeError(MirrorGasError):
    """Deterministic quadrature requested for a dimension it cannot afford."""


class QuadratureConvergenceError(MirrorGasError):
    """Refinement hit its node cap before reaching the requested tolerance.

    Carries the best estimate and the last refinement delta so callers can
    decide whether the partial result is still usable.
    """

    def __init__(self, message, best=None, error_estimate=None):
        super().__init__(message)
        self.best = best
        self.error_estimate = error_estimate


class ConditionViolationError(MirrorGasError):
    """The mode-dominance condition fails; asymptotic formulas refuse to run.

    ``margin`` is the signed slack of the condition (negative here).
    """

    def __init__(self, message, margin):
        super().__init__(message)
        self.margin = margin


class UnsupportedLawError(MirrorGasError):
    """Limit-law machinery asked to evaluate the fully degenerate case."""


class OffRegimeWarning(UserWarning):
    """A parameter is outside the regime the underlying theorem covers."""
