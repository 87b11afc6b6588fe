"""Nuisance predictors for E[y|s] and E[z|s] and the resulting residuals.

Both conditional means are modelled as ``psi(s)' lambda`` with
``psi(s) = [1, phi(s)]`` and fitted by a square-root LASSO whose intercept is
unpenalized and whose remaining weights are ``sqrt(mean(psi_k^2) / n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sqrtlasso
from .data import Dataset
from .errors import ConfigError
from .spatial_basis import BasisSpec, design_matrix


@dataclass(frozen=True)
class ResidualFit:
    lambda_w: np.ndarray | None
    lambda_v: np.ndarray | None
    w_hat: np.ndarray
    v_hat: np.ndarray
    # RMS of the raw exposure; used to tell numerically-zero v_hat from real variation
    exposure_scale: float = 0.0
    converged: bool = True

    @classmethod
    def from_residuals(cls, w_hat, v_hat) -> ResidualFit:
        """Wrap residuals that were produced outside this module."""
        w = np.asarray(w_hat, dtype=float)
        v = np.asarray(v_hat, dtype=float)
        return cls(None, None, w, v, float(np.sqrt(np.mean(v**2))))


def with_intercept(Phi: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((Phi.shape[0], 1)), Phi])


def penalty_weights(Psi: np.ndarray) -> np.ndarray:
    """Weights ``sqrt(mean(psi_k^2) / n)``, zero for the leading intercept column."""
    gamma = np.sqrt(np.mean(Psi**2, axis=0) / Psi.shape[0])
    gamma[0] = 0.0
    return gamma


def fit_nuisance(Psi: np.ndarray, target: np.ndarray) -> sqrtlasso.Solution:
    return sqrtlasso.solve(sqrtlasso.Problem(target, Psi, penalty_weights(Psi)))


def residualize_design(Phi: np.ndarray, y: np.ndarray, z: np.ndarray, cross_fit: int | None = None) -> ResidualFit:
    """Residualise ``y`` and ``z`` against the basis matrix ``Phi`` (no intercept column)."""
    if not np.any(Phi):
        raise ConfigError("every basis column is zero on the sample; no location is covered")
    Psi = with_intercept(Phi)
    sol_w = fit_nuisance(Psi, y)
    sol_v = fit_nuisance(Psi, z)
    lam_w, lam_v = sol_w.coefficients, sol_v.coefficients
    if cross_fit:
        w_hat, v_hat = _cross_fitted(Psi, y, z, cross_fit)
    else:
        w_hat = y - Psi @ lam_w
        v_hat = z - Psi @ lam_v
    return ResidualFit(
        lam_w,
        lam_v,
        w_hat,
        v_hat,
        float(np.sqrt(np.mean(z**2))),
        sol_w.converged and sol_v.converged,
    )


def _cross_fitted(Psi, y, z, folds: int):
    n = len(y)
    if folds < 2 or folds > n:
        raise ConfigError(f"cross_fit needs between 2 and n folds, got {folds}")
    fold = np.arange(n) % folds
    w_hat = np.empty(n)
    v_hat = np.empty(n)
    for k in range(folds):
        test = fold == k
        train = ~test
        w_hat[test] = y[test] - Psi[test] @ fit_nuisance(Psi[train], y[train]).coefficients
        v_hat[test] = z[test] - Psi[test] @ fit_nuisance(Psi[train], z[train]).coefficients
    return w_hat, v_hat


def fit_residuals(data: Dataset, spec: BasisSpec, *, cross_fit: int | None = None) -> ResidualFit:
    """Fit both nuisance predictors and return the empirical residuals.

    Parameters
    ----------
    data : Dataset
        Observations; their domain must equal ``spec.domain``.
    spec : BasisSpec
        Basis for the nuisance predictors. Normally the same basis as the
        effect model, but any spec over the same domain works.
    cross_fit : int, optional
        When given, residuals are computed out-of-fold over this many
        interleaved folds. The stored ``lambda_w`` / ``lambda_v`` are always the
        full-sample fits.
    """
    if data.domain != spec.domain:
        raise ConfigError("dataset domain does not match the basis domain")
    Phi = design_matrix(spec, data.s)
    return residualize_design(Phi, data.y, data.z, cross_fit)


def predict_conditional_mean(fit: ResidualFit, spec: BasisSpec, s, which: str = "outcome") -> float:
    """``psi(s)' lambda`` for the outcome or exposure predictor at one location."""
    if which == "outcome":
        lam = fit.lambda_w
    elif which == "exposure":
        lam = fit.lambda_v
    else:
        raise ValueError(f"which must be 'outcome' or 'exposure', got {which!r}")
    if lam is None:
        raise ConfigError("this fit carries residuals only, no predictor coefficients")
    Phi = design_matrix(spec, s)
    if Phi.shape[0] != 1:
        raise ValueError("predict_conditional_mean takes one location")
    return float(lam[0] + Phi[0] @ lam[1:])
