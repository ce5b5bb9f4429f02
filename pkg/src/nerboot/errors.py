"""Shared exception types, mapped to CLI exit codes."""


class DataError(ValueError):
    """Malformed input data, file format, or configuration (exit code 2)."""


class NumericalError(ArithmeticError):
    """Non-finite loss or scores during training (exit code 3)."""
