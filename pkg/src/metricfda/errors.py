"""Exception hierarchy shared by all metricfda modules."""


class MetricFdaError(Exception):
    """Base class for all library errors."""


class LengthMismatchError(MetricFdaError, ValueError):
    """A sequence does not have the length required by its grid or peer."""


class NotMonotoneError(MetricFdaError, ValueError):
    """CDF values decrease by more than the monotonicity tolerance."""


class RangeViolationError(MetricFdaError, ValueError):
    """CDF values fall outside [0, 1] or violate the endpoint bounds."""


class GridMismatchError(MetricFdaError, ValueError):
    """Two objects that must share a grid or metric configuration do not."""


class AsymmetricInputError(MetricFdaError, ValueError):
    """A matrix that must be symmetric is not, beyond tolerance."""


class NotNegativeTypeError(MetricFdaError):
    """The centered kernel has an eigenvalue below -psd_tol * lambda_max.

    Diagnostic: the supplied metric is not of negative type at this sample.
    Carries ``min_eigenvalue`` and ``max_eigenvalue`` for reporting.
    """

    def __init__(self, msg, min_eigenvalue=None, max_eigenvalue=None):
        super().__init__(msg)
        self.min_eigenvalue = min_eigenvalue
        self.max_eigenvalue = max_eigenvalue


class InsufficientRankError(MetricFdaError, ValueError):
    """More components requested than the numerical rank supports."""


class MissingColumnError(MetricFdaError, ValueError):
    """A required column is absent from an input file."""


class CsvParseError(MetricFdaError, ValueError):
    """A data row could not be parsed; carries the 1-based line number."""

    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


class EmptyInputError(MetricFdaError, ValueError):
    """The input stream contains no data rows."""


class ZeroTotalMassError(MetricFdaError, ValueError):
    """A (unit, time) cell has zero total mass; no CDF can be formed."""


class AgeGridMismatchError(MetricFdaError, ValueError):
    """A cell's ages do not exactly match the configured age grid."""


class NoCommonTimesError(MetricFdaError, ValueError):
    """The units share fewer than two time points."""


class IncompletePanelError(MetricFdaError, ValueError):
    """Some (unit, time) cells are missing; carries the missing cell list."""

    def __init__(self, msg, missing=()):
        super().__init__(msg)
        self.missing = tuple(missing)


class GridTooNarrowError(MetricFdaError, ValueError):
    """The age grid does not cover +/- 4 sigma of a generated distribution."""


class WrongMetricError(MetricFdaError, TypeError):
    """The operation requires a different point-metric kind."""


class NonpositiveWeightsError(MetricFdaError, ValueError):
    """Quadrature weights must be strictly positive."""


class DimensionMismatchError(MetricFdaError, ValueError):
    """Matrix or vector dimensions are inconsistent."""
