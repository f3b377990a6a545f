"""Exception hierarchy shared across the package."""


class ConfigError(ValueError):
    """Invalid model or experiment configuration.

    ``field`` names the offending parameter so front ends can report it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


class NumericalError(ArithmeticError):
    """A numerical routine failed or produced an inadmissible value."""


class NonnegativityError(NumericalError):
    """A drift term alpha went negative beyond roundoff."""


class ConvergenceError(NumericalError):
    """An iterative or series evaluation did not converge."""
