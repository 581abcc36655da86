"""Exception hierarchy shared by all modules."""


class GHJMError(Exception):
    """Base class for package errors."""


class DomainError(GHJMError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(GHJMError, ValueError):
    """Array or design dimensions are inconsistent."""


class ValidationError(GHJMError, ValueError):
    """A configuration or dataset failed validation."""


class NumericalError(GHJMError, ArithmeticError):
    """A numerical procedure failed (non-finite value, non-convergence)."""
