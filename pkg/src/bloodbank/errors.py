"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Raised when an argument violates an operation's precondition."""


class SchemaError(ValueError):
    """Raised when a CSV or JSON artifact does not match its expected schema."""
