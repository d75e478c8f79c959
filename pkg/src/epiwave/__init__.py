"""Traveling fronts of a wild-type/mutant competition model with mutations."""

from .model import (
    Equilibrium,
    Params,
    SpectralData,
    equilibrium,
    min_speed,
    principal_eigen,
    reaction,
    spectral_data,
    validate_params,
)

__version__ = "0.1.0"

__all__ = [
    "Equilibrium",
    "Params",
    "SpectralData",
    "equilibrium",
    "min_speed",
    "principal_eigen",
    "reaction",
    "spectral_data",
    "validate_params",
]
