"""Exception types shared across the package."""


class TruncLassoError(Exception):
    """Base class for all package errors."""


class DataError(TruncLassoError, ValueError):
    """A record or dataset violates an invariant; carries the row index."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class WindowViolation(DataError):
    """Response does not lie strictly inside its truncation window."""


class DimensionMismatch(DataError):
    """Covariate vector length disagrees with the dataset dimension."""


class NonFiniteValue(DataError):
    """A field contains NaN or infinity."""

    def __init__(self, message, index=None, field=None):
        super().__init__(message, index)
        self.field = field


class SolverError(TruncLassoError, RuntimeError):
    """Base class for numerical solver failures."""


class Degenerate(SolverError):
    """All row weights are zero; the objective is identically zero."""


class RankDeficient(SolverError):
    """Design has deficient column rank on its positively weighted rows."""


class EmptyPairSet(SolverError):
    """No pairs available to build a difference system."""


class NoComparablePairs(SolverError):
    """The comparable-pair set is empty at the current iterate."""


class GridDegenerate(SolverError):
    """The penalty grid cannot be built (even lambda = 0 selects nothing)."""


class DegenerateWeights(SolverError):
    """All perturbation multipliers are zero."""


class SEEstimationError(SolverError):
    """Too many perturbation replicates failed."""


class CalibrationFailure(SolverError):
    """Truncation-rate calibration did not converge."""


class InvalidTruncationWindow(SolverError):
    """A sampled covariate vector makes the truncation support empty."""


class TooFewObserved(SolverError):
    """Too few records survive truncation to fit the model."""


class StudyAbort(SolverError):
    """Too many replications of a simulation study failed."""


class GridTooLarge(TruncLassoError, ValueError):
    """Brute-force grid would exceed the evaluation budget."""


class ParseError(DataError):
    """Malformed input file; carries line (index) and column info."""

    def __init__(self, message, index=None, column=None):
        super().__init__(message, index)
        self.column = column


class ColumnMismatch(DataError):
    """Prediction input columns disagree with the fitted model."""


class ConfigError(TruncLassoError, ValueError):
    """Invalid configuration key or value; carries the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
