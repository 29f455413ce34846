"""Exception hierarchy shared by the library and the command line front end."""


class LhaError(Exception):
    """Base class for all library errors."""


class DomainError(LhaError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(LhaError, RuntimeError):
    """A quadrature, root search or series failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConvergenceError(NumericError):
    """A grid or truncation refinement check did not meet its tolerance."""


class StabilityError(LhaError, ArithmeticError):
    """The local harmonic path integral diverges at some position.

    ``n`` is the first Matsubara index with a non-positive mode weight, or 0
    when the zero-mode condition ``D(q) > 0`` fails.
    """

    def __init__(self, message, n=None, positions=None):
        super().__init__(message)
        self.n = n
        self.positions = positions


class NoBarrierError(LhaError):
    """No interior maximum of the potential inside the bracket."""


class UndefinedRelativeError(LhaError, ZeroDivisionError):
    """A relative error was requested for an observable with zero mean."""


class ConfigError(LhaError, ValueError):
    """Scenario configuration failed validation.

    ``problems`` holds one ``(field, message)`` pair per failure.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{field}: {msg}" for field, msg in self.problems)
        super().__init__(text or "invalid configuration")
