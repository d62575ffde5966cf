"""Exception types raised by svsde."""


class SvsdeError(Exception):
    """Base class for package errors."""


class DomainError(SvsdeError, ValueError):
    """A coordinate lies outside a spline basis domain."""


class NumericError(SvsdeError, ArithmeticError):
    """Non-finite value, failed factorization or invalid distribution parameter."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ArgumentError(SvsdeError, ValueError):
    """Invalid argument to a public operation."""


class ParseError(SvsdeError, ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(SvsdeError, ValueError):
    """Input data violate a structural invariant."""
