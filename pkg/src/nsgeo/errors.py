"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data cannot support the requested computation."""


class ConfigError(ValueError):
    """Invalid tuning or configuration value."""


class ModelError(RuntimeError):
    """A fitted model is unusable for the requested operation."""
