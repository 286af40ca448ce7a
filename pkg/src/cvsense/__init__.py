"""Gaussian-state modelling of entangled and separable distributed phase sensing."""

from . import analysis, fisher, gaussian, io, montecarlo, network, theory
from .gaussian import GaussianState, InvalidStateError
from .network import OpoParams, SchemeParams, sense
from .theory import gain, optimal_point, optimal_sigma, sigma_for, standard_quantum_limit

__version__ = "0.1.0"

__all__ = [
    "GaussianState",
    "InvalidStateError",
    "OpoParams",
    "SchemeParams",
    "analysis",
    "fisher",
    "gain",
    "gaussian",
    "io",
    "montecarlo",
    "network",
    "optimal_point",
    "optimal_sigma",
    "sense",
    "sigma_for",
    "standard_quantum_limit",
    "theory",
]
