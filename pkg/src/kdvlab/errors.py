"""Exception types shared across the package.

Each class maps to a CLI exit code (see :mod:`kdvlab.cli`).
"""


class KdvLabError(Exception):
    exit_code = 3


class PreconditionError(KdvLabError, ValueError):
    """An operation was called on data violating its documented precondition."""

    exit_code = 3


class ConfigError(KdvLabError, ValueError):
    """Invalid parameters or solver configuration."""

    exit_code = 2


class NumericFailure(KdvLabError, ArithmeticError):
    """A numerical check or computation failed (overflow, degenerate fit, ...)."""

    exit_code = 3
