"""Exception hierarchy.

Every error raised by the library derives from :class:`PdfairError`. The
intermediate classes decide the CLI exit code: :class:`ConfigError` maps to 1,
:class:`DataError` to 2 and :class:`NumericError` to 3.
"""


class PdfairError(Exception):
    pass


class DataError(PdfairError, ValueError):
    pass


class NumericError(PdfairError, ArithmeticError):
    pass


class ConfigError(PdfairError, ValueError):
    """Invalid run configuration or flag combination (CLI exit code 1)."""


class MissingColumn(DataError):
    pass


class BadTarget(DataError):
    pass


class ParseError(DataError):
    pass


class DegenerateConfig(DataError):
    pass


class TooFewRows(DataError):
    pass


class AllMissingColumn(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class UnknownAttribute(DataError):
    pass


class EmptyBins(DataError):
    pass


class PartitionViolation(DataError):
    pass


class UnknownReference(DataError):
    pass


class InsufficientGroups(DataError):
    pass


class MismatchedTestSets(DataError):
    pass


class RankOutOfRange(NumericError, ValueError):
    pass


class NonFiniteInput(NumericError, ValueError):
    pass


class DimensionMismatch(NumericError, ValueError):
    pass


class SingularSystem(NumericError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    """Logistic fit stopped at ``max_iters`` before the gradient tolerance."""
