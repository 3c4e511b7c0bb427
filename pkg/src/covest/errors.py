"""Exception hierarchy shared by every covest module."""


class CovestError(Exception):
    """Base class for all errors raised by covest."""


class InvalidInputError(CovestError, ValueError):
    """Input data is malformed (non-finite entries, wrong shape, ...)."""


class InvalidParameterError(CovestError, ValueError):
    """A parameter lies outside its admissible range."""


class DegenerateInputError(CovestError, ValueError):
    """The requested quantity is undefined for this input (e.g. zero matrix)."""


class InsufficientDataError(CovestError, ValueError):
    """Not enough samples for the requested procedure."""


class NotPSDError(CovestError, ValueError):
    """Matrix is not positive semidefinite within tolerance."""


class UnsupportedDimensionError(CovestError, ValueError):
    """The operation is only implemented for small dimensions."""


class ConvergenceError(CovestError, ArithmeticError):
    """Iterative routine hit its sweep cap.

    Attributes
    ----------
    residual : float
        Largest remaining off-diagonal magnitude when the cap was hit.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class StageError(CovestError):
    """Failure inside one stage of the three-stage pipeline."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
