"""Exception types shared across the package."""


class DPTMError(Exception):
    """Base class for all package errors."""


class ConfigError(DPTMError, ValueError):
    """Invalid configuration or parameter range."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DimensionError(DPTMError, ValueError):
    """Array shapes that must agree do not."""


class OrderingError(DPTMError, ValueError):
    """A diffusion step pair is not strictly decreasing in time."""


class ValidationError(DPTMError, ValueError):
    """Input data violates an operation's precondition."""


class SpecificationError(DPTMError, ValueError):
    """A synthetic benchmark violates its band-separation contract."""
