"""Computable availability bounds for alternating renewal systems with heavy tails."""
from .errors import AvailBoundError
from .model import ModelParams, ParetoLaw, Regime, SystemState, validate
from .bounds import BoundParams, BoundReport, optimize_window, psi
from .kernels import BACKEND, set_backend

__version__ = "0.1.0"

__all__ = [
    "AvailBoundError", "ModelParams", "ParetoLaw", "Regime", "SystemState", "validate",
    "BoundParams", "BoundReport", "optimize_window", "psi", "BACKEND", "set_backend",
    "__version__",
]
