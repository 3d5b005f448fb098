"""Exception hierarchy.

The CLI maps these onto exit codes: input problems exit 2, data
insufficiency or degeneracy exits 3, optimizer non-convergence exits 4.
"""

from __future__ import annotations


class TailcastError(Exception):
    """Base class for every error raised by this package."""


class InputError(TailcastError, ValueError):
    """An argument is outside the domain of the operation."""


class ParameterError(InputError):
    """Distribution parameters are invalid (e.g. nonpositive scale)."""


class ParseError(InputError):
    """The event stream could not be parsed."""

    def __init__(self, message: str, row_errors=()):
        super().__init__(message)
        self.row_errors = list(row_errors)


class EmptySeriesError(ParseError):
    """The input contained no event rows at all."""


class CoverageError(InputError):
    """A rescale plan does not cover every week of a series."""


class DataError(TailcastError):
    """Base for errors caused by the data rather than by the caller."""


class DegenerateInputError(DataError, ValueError):
    """Data are valid but carry no usable variation (all zeros, zero variance...)."""


class InsufficientDataError(DataError, ValueError):
    """Too few observations (exceedances, events, interarrivals) for the request."""


class EmptyTailError(InsufficientDataError):
    """No observation exceeds the requested threshold."""


class FitError(TailcastError):
    """Maximum likelihood did not converge. ``fit`` holds the best iterate."""

    def __init__(self, message: str, fit=None):
        super().__init__(message)
        self.fit = fit


class GofError(TailcastError):
    """Too many bootstrap refits failed for the p-value to be meaningful."""
