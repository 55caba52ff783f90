"""Exception hierarchy shared across the package.

Two families matter for callers: ValidationError (bad inputs, bad
configuration, infeasible requests) and NumericError (a computation that
started from valid inputs failed at run time). The CLI maps the former to
exit code 1 and the latter to exit code 2.
"""


class GCSRError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GCSRError):
    """Invalid input data, configuration, or arguments."""


class FormatError(ValidationError):
    """A file is missing or does not match the expected on-disk format."""


class ShapeError(ValidationError):
    """Array dimensions do not chain."""


class EmptyMaskError(ValidationError):
    """An operation that needs at least one selected node got none."""


class EmptyInputError(ValidationError):
    """An operation received an empty vector where values are required."""


class DegenerateDegreeError(ValidationError):
    """A zero-degree row cannot be normalized without self-loops."""


class DegenerateStructureError(ValidationError):
    """The graph has no edges to extract structure statistics from."""


class InfeasibleSizeError(ValidationError):
    """Target size too small to give every class at least one node."""


class SamplingInfeasibleError(ValidationError):
    """A class does not have enough source nodes to sample from."""


class SegmentTooLongError(ValidationError):
    """Requested segment is longer than the stored trajectories."""


class UndefinedMetricError(ValidationError):
    """The metric is undefined for this input (e.g. a single class)."""


class NumericError(GCSRError):
    """Runtime numerical failure."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ZeroDenominatorError(NumericError):
    """A matching-loss denominator vanished (degenerate expert segment)."""


class NonConvergenceError(NumericError):
    """An iterative solver hit its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
