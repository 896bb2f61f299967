"""Exception hierarchy shared by all tensorfill modules."""


class TensorfillError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(TensorfillError, ValueError):
    """Array dimensions are inconsistent with the requested operation."""


class ReliabilityCodeError(TensorfillError, ValueError):
    """A reliability grid holds a code outside {0, 1, 3, 255}."""


class EmptyPatchError(TensorfillError, ValueError):
    """A patch (or series) has no valid observation to complete from."""


class DegenerateSpectrumError(TensorfillError, ValueError):
    """All singular values of an unfolding are zero."""


class NumericalError(TensorfillError, ArithmeticError):
    """A solver diverged, produced non-finite values, or failed to converge."""


class ParameterError(TensorfillError, ValueError):
    """A parameter is out of its admissible range."""


class CorruptStackError(TensorfillError, IOError):
    """On-disk stack files disagree with their header."""


class SeriesParseError(TensorfillError, ValueError):
    """A single-series CSV row could not be parsed."""
