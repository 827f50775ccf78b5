"""Exception types raised across the package.

Everything derives from :class:`XcpError` so callers (notably the CLI) can
map failures to exit codes without enumerating modules.
"""


class XcpError(Exception):
    """Base class for all package errors."""


class IndexOutOfRangeError(XcpError, IndexError):
    """A coordinate lies outside the declared tensor dimensions."""


class DuplicateCoordinateError(XcpError, ValueError):
    """The same (user, service, time) triple appears more than once."""


class NegativeValueError(XcpError, ValueError):
    """A measurement is negative or non-finite."""


class InvalidConfigError(XcpError, ValueError):
    """A configuration value violates its declared constraints."""


class DimMismatchError(XcpError, ValueError):
    """Model dimensions do not match the tensor they are applied to."""


class ExpansionNotOneError(XcpError, ValueError):
    """Operation requires an expansion dimension of exactly 1."""


class NonFiniteAccumulatorError(XcpError, ArithmeticError):
    """An update numerator/denominator overflowed or became NaN."""


class EmptyTrainSetError(XcpError, ValueError):
    """Training requested on an empty entry set."""


class EmptyEvalSetError(XcpError, ValueError):
    """Evaluation requested on an empty entry set."""


class BadRatiosError(XcpError, ValueError):
    """Split ratios are negative or do not sum to 1."""


class MalformedLineError(XcpError, ValueError):
    """A data file line cannot be parsed.

    Carries the 1-based line number for diagnostics.
    """

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DensityTooHighError(XcpError, ValueError):
    """Requested synthetic density exceeds the tensor size."""


class DegenerateTableError(XcpError, ValueError):
    """Result table too small to rank (needs >= 2 models, >= 1 row)."""
