"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes are inconsistent for the requested operation."""


class ConfigError(ValueError):
    """A model/schedule/CLI configuration is invalid."""
