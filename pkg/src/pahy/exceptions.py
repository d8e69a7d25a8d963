"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or parameters violate a documented precondition."""


class DomainError(ValidationError):
    """A numeric argument lies outside the domain of a function."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its declared tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BoundaryWarning(UserWarning):
    """Sampling grid does not start at 0 or end at 1."""
