class DataError(Exception):
    """Fatal problem with input data or a violated precondition (exit code 1)."""


class ConfigError(Exception):
    """Invalid or incomplete pipeline configuration (exit code 2)."""
