"""Robust orthogonalized estimation of spatially varying causal effects."""

from .bootstrap import CIBand, ResampleSeed, bootstrap_band, mc_dispersion
from .data import Dataset, ResidualDataset, read_dataset_csv
from .errors import (
    ConfigError,
    DataError,
    DegenerateExposureError,
    DomainError,
    MissingRegionError,
    NumericalError,
    RosceError,
)
from .estimator import EffectModel, effect_at, effect_on, fit
from .residualize import ResidualFit, fit_residuals
from .spatial_basis import BasisSpec, SpaceDomain, design_matrix, eval_basis

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "CIBand",
    "ConfigError",
    "DataError",
    "Dataset",
    "DegenerateExposureError",
    "DomainError",
    "EffectModel",
    "MissingRegionError",
    "NumericalError",
    "ResampleSeed",
    "ResidualDataset",
    "ResidualFit",
    "RosceError",
    "SpaceDomain",
    "bootstrap_band",
    "design_matrix",
    "effect_at",
    "effect_on",
    "eval_basis",
    "fit",
    "fit_residuals",
    "mc_dispersion",
    "read_dataset_csv",
]
