"""Matérn covariance functions for Gaussian-process confounders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor
from scipy.spatial.distance import cdist

from .errors import ConfigError, NumericalError

JITTER = 1e-8


@dataclass(frozen=True)
class MaternKernel:
    """Matérn plus white-noise covariance ``variance * M_nu(r / lengthscale) + noise * [i == j]``.

    ``nu`` must be one of 1/2, 3/2, 5/2 (closed forms).
    """

    lengthscale: float = 1.0
    variance: float = 1.0
    noise: float = 0.1
    nu: float = 1.5

    def __post_init__(self):
        if self.nu not in (0.5, 1.5, 2.5):
            raise ConfigError(f"nu must be 0.5, 1.5 or 2.5, got {self.nu}")
        if not self.lengthscale > 0:
            raise ConfigError("lengthscale must be positive")
        if self.variance < 0 or self.noise < 0:
            raise ConfigError("variances must be non-negative")

    def correlation(self, r):
        x = np.asarray(r, dtype=float) / self.lengthscale
        if self.nu == 0.5:
            return np.exp(-x)
        if self.nu == 1.5:
            a = np.sqrt(3.0) * x
            return (1.0 + a) * np.exp(-a)
        a = np.sqrt(5.0) * x
        return (1.0 + a + a * a / 3.0) * np.exp(-a)

    def smooth_gram(self, a, b=None) -> np.ndarray:
        """Matérn part only, between location sets ``a`` and ``b``."""
        a = np.asarray(a, dtype=float).reshape(len(a), -1)
        b = a if b is None else np.asarray(b, dtype=float).reshape(len(b), -1)
        return self.variance * self.correlation(cdist(a, b))

    def gram(self, locations) -> np.ndarray:
        """Covariance of one observation per row of ``locations`` (white noise on the diagonal)."""
        K = self.smooth_gram(locations)
        K[np.diag_indices_from(K)] += self.noise
        return K

    def to_dict(self) -> dict:
        return {"lengthscale": self.lengthscale, "variance": self.variance, "noise": self.noise, "nu": self.nu}


def cholesky(K: np.ndarray):
    """Cholesky factor of ``K + JITTER * I`` (lower, scipy ``cho_factor`` form)."""
    try:
        return cho_factor(K + JITTER * np.eye(K.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance matrix is not positive definite after jitter {JITTER:g}") from exc
