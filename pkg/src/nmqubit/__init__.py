"""Maximally non-Markovian qubit dynamics: closed forms, hybrid solvers and divisibility measures."""

from . import dephasing, gaussian_noise, hybrid, linops, measures, numerics, random_unitary
from .errors import (InvalidArgumentError, KernelPoleError, RateUndefinedError, SingularPropagatorError,
                     StabilityError, StiffnessError, ToleranceNotMetError, UnsupportedModelError)
from .linops import Superoperator

__version__ = "0.1.0"

__all__ = [
    "dephasing", "gaussian_noise", "hybrid", "linops", "measures", "numerics", "random_unitary",
    "Superoperator", "InvalidArgumentError", "KernelPoleError", "RateUndefinedError",
    "SingularPropagatorError", "StabilityError", "StiffnessError", "ToleranceNotMetError",
    "UnsupportedModelError",
]
