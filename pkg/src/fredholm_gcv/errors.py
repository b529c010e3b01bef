"""Exception hierarchy.

Input problems derive from :class:`DomainError` (CLI exit code 2); numerical
breakdowns derive from :class:`NumericalError` (CLI exit code 1).
"""


class FredholmError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FredholmError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(FredholmError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


class SvdConvergenceError(NumericalError):
    """The singular value decomposition did not converge."""


class RankDeficiencyError(NumericalError):
    """The kernel restricted to the stabilizer null space is numerically singular."""


class GcvDenominatorError(DomainError):
    """The GCV trace denominator is not positive.

    This happens when the data carry no more components than the model can
    fit exactly, so it is reported as an input problem.
    """


class QuadratureConvergenceError(NumericalError):
    """Grid doubling hit its cap before the integral converged."""


class InfeasibleSearchError(FredholmError):
    """No candidate of the search space could be evaluated."""


class DisjointIntervalError(DomainError):
    """Two solutions share no common abscissa interval."""


class DataFormatError(DomainError):
    """A dataset or configuration file could not be parsed.

    ``row`` is 1-based and counts physical lines of the file; ``column`` is
    the header name when it is known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
