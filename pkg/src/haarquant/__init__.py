"""Haar product quantizers of stochastic process paths and an explicit Poisson quantizer."""

__version__ = "0.1.0"

from . import alloc, cppq, fquant, haar, io, procsim, quant1d, ratelab, rng
from .errors import (
    BudgetError,
    DegenerateSampleError,
    DomainError,
    HaarQuantError,
    InsufficientPointsError,
    ResolutionError,
    SizeGuardError,
)

__all__ = [
    "alloc",
    "cppq",
    "fquant",
    "haar",
    "io",
    "procsim",
    "quant1d",
    "ratelab",
    "rng",
    "HaarQuantError",
    "DomainError",
    "ResolutionError",
    "DegenerateSampleError",
    "SizeGuardError",
    "InsufficientPointsError",
    "BudgetError",
]
