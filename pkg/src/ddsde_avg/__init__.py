"""Simulation and rate checks for averaging of McKean-Vlasov SDEs with oscillating drift."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DivergenceError,
    EvaluationError,
    ResolutionError,
    SingularEvaluationError,
)
from .model import DiffusionSpec, EmpiricalMeasure, OscillatingDriftSpec  # noqa: E402
from .simulator import InitialSampler, SimConfig, simulate_coupled  # noqa: E402

__all__ = [
    "ConfigurationError",
    "DiffusionSpec",
    "DivergenceError",
    "EmpiricalMeasure",
    "EvaluationError",
    "InitialSampler",
    "OscillatingDriftSpec",
    "ResolutionError",
    "SimConfig",
    "SingularEvaluationError",
    "simulate_coupled",
]
