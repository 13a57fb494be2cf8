"""Exception hierarchy shared across the package.

Each error class carries the CLI exit code used when it escapes a
subcommand: config errors exit 2, data errors 3, non-convergence 4.
"""


class SpsimError(Exception):
    exit_code = 1


class ConfigError(SpsimError):
    """Invalid or inconsistent configuration/parameters."""

    exit_code = 2


class DataError(SpsimError):
    """Unusable input data (empty streams, format mismatch, bad manifest)."""

    exit_code = 3


class ConvergenceError(SpsimError):
    """A fit failed to converge; `diagnostics` holds the optimizer state."""

    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
