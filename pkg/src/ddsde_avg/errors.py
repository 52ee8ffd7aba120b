class ConfigurationError(ValueError):
    """Invalid or incomplete experiment configuration."""


class EvaluationError(ArithmeticError):
    """A drift evaluation produced a non-finite value."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SingularEvaluationError(EvaluationError):
    """A singular kernel was evaluated at a coincident point."""

    def __init__(self, message, replica=None, particle=None, step=None):
        super().__init__(message)
        self.replica = replica
        self.particle = particle
        self.step = step


class DivergenceError(ArithmeticError):
    """A simulated state became non-finite."""

    def __init__(self, message, replica=None, step=None):
        super().__init__(message)
        self.replica = replica
        self.step = step


class ResolutionError(ValueError):
    """Time step too coarse for the oscillation or projection scale."""
