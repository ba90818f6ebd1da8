"""Error types the CLI maps to exit codes."""


class ConfigError(Exception):
    """Bad or inconsistent run configuration (exit code 2)."""


class DataError(Exception):
    """Unreadable or malformed input data (exit code 3)."""


class NumericError(RuntimeError):
    """Training produced a non-finite value (exit code 4)."""
