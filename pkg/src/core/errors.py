class ConfigError(ValueError):
    """Experiment config could not be parsed or validated (CLI exit code 2)."""


class InputError(ValueError):
    """Missing, unreadable or malformed input file (CLI exit code 3)."""
