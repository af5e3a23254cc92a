"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class DegenerateDirection(ValueError):
    """The ray t*u never meets the Nehari set (zero nonlinear term)."""


class EmptyDomainError(ValueError):
    pass


class SolverError(RuntimeError):
    """Base for numerical failures. ``iterate`` holds the last/best state."""

    def __init__(self, message, iterate=None, history=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = history if history is not None else []


class NoConvergence(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass


class Stagnation(SolverError):
    pass


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
