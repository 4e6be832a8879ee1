"""Exception hierarchy shared across the package.

Three failure categories are distinguished so the CLI can map them to
distinct exit codes: bad arguments, numerical breakdown, and malformed
files.
"""


class EigenspeakerError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(EigenspeakerError, ValueError):
    """An input violates a documented precondition (shape, range, emptiness)."""


class NumericError(EigenspeakerError, RuntimeError):
    """A computation broke down numerically (singularity, non-convergence,
    degenerate data)."""


class FormatError(EigenspeakerError, ValueError):
    """A file on disk is not a valid container of the expected kind."""
