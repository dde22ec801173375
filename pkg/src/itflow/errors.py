"""Exception types shared across modules, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Bad experiment/sweep configuration (exit code 2)."""


class IntegrationDivergedError(RuntimeError):
    """The operator integration produced nonfinite or non-Hermitian data (exit 3)."""

    def __init__(self, message: str, tau: float | None = None):
        super().__init__(message)
        self.tau = tau


class ResourceLimitError(RuntimeError):
    """A configured size/term-count ceiling would be exceeded (exit 4)."""


class SchemaError(ValueError):
    """Record files are missing required columns or rows (exit 2)."""
