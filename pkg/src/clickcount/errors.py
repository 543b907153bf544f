"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ClickCountError(Exception):
    exit_code = 1


class DomainError(ClickCountError, ValueError):
    """A parameter lies outside the domain of the requested quantity."""


class ValidationError(ClickCountError, ValueError):
    """A user-supplied document or sequence failed validation.

    ``index`` points at the offending entry when there is one.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class StabilityError(ClickCountError, ArithmeticError):
    """A kernel produced a value that rounding alone cannot explain."""

    exit_code = 2


class KernelOverflowError(ClickCountError, OverflowError):
    """Numeric range or precision budget exhausted at a specific (k, n)."""

    exit_code = 3

    def __init__(self, message: str, k: int | None = None, n: int | None = None):
        super().__init__(message)
        self.k = k
        self.n = n


class BudgetExceededError(ClickCountError, MemoryError):
    """The requested computation needs more work than the configured budget."""

    exit_code = 3

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


class InsufficientSupportError(ClickCountError, ValueError):
    """A truncated output range omits more probability mass than allowed."""

    exit_code = 2

    def __init__(self, message: str, remaining: float):
        super().__init__(message)
        self.remaining = remaining
