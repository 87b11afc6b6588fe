"""Effect estimators: the robust orthogonalized fit and comparison baselines.

The robust fit regresses the outcome residual on ``v_hat * phi(s)`` with a
square-root LASSO whose weights ``sqrt(mean((v_hat phi_k)^2) / n)`` bound the
per-coordinate second moment of the unobserved exposure-residual error. Those
weights are stored on the model as ``delta_bounds``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg
from scipy.linalg import cho_solve

from . import sqrtlasso
from .data import Dataset, ResidualDataset
from .errors import ConfigError, DegenerateExposureError, MissingRegionError
from .kernels import MaternKernel, cholesky
from .residualize import ResidualFit
from .spatial_basis import BasisSpec, SpaceDomain, design_matrix

METHODS = ("rosce", "direct_ls", "naive_region_ls", "gls_sre", "residual_ls")
RIDGE = 1e-10
# v_hat counts as identically zero below this fraction of the exposure's RMS
DEGENERATE_RTOL = 1e-10


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EffectModel:
    theta: np.ndarray
    spec: BasisSpec | None
    method: str
    domain: SpaceDomain
    delta_bounds: np.ndarray | None = None
    info: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise ConfigError("theta must be finite")
        object.__setattr__(self, "theta", theta)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "domain": _domain_to_dict(self.domain),
            "spec": None if self.spec is None else self.spec.to_dict(),
            "theta": self.theta.tolist(),
            "delta_bounds": None if self.delta_bounds is None else np.asarray(self.delta_bounds).tolist(),
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EffectModel:
        spec = None if d.get("spec") is None else BasisSpec.from_dict(d["spec"])
        db = d.get("delta_bounds")
        return cls(
            np.array(d["theta"], dtype=float),
            spec,
            d["method"],
            _domain_from_dict(d["domain"]),
            None if db is None else np.array(db, dtype=float),
            dict(d.get("info", {})),
        )


def _domain_to_dict(domain: SpaceDomain) -> dict:
    if domain.is_discrete:
        return {"kind": "discrete", "d": domain.d}
    return {"kind": "continuous", "bounds": [list(b) for b in domain.bounds]}


def _domain_from_dict(d: dict) -> SpaceDomain:
    if d["kind"] == "discrete":
        return SpaceDomain.discrete(d["d"])
    return SpaceDomain.continuous(d["bounds"])


def effect_on(model: EffectModel, locations) -> np.ndarray:
    """``phi(s)' theta`` at every location (a constant for basis-free models)."""
    if model.spec is None:
        locs = model.domain.check_locations(locations)
        return np.full(len(locs), model.theta[0])
    return design_matrix(model.spec, locations) @ model.theta


def effect_at(model: EffectModel, s) -> float:
    vals = effect_on(model, s)
    if vals.shape[0] != 1:
        raise ValueError("effect_at takes one location; use effect_on for many")
    return float(vals[0])


# -- design-level kernels (shared with the bootstrap) -------------------------


def check_exposure(v_hat: np.ndarray, scale: float = 0.0) -> None:
    rms = float(np.sqrt(np.mean(v_hat**2)))
    if rms == 0.0 or rms <= DEGENERATE_RTOL * scale:
        raise DegenerateExposureError("exposure residuals are identically zero; the effect is not identified")


def rosce_design(Phi: np.ndarray, w_hat: np.ndarray, v_hat: np.ndarray):
    """Solve the robust program on a precomputed basis matrix.

    Returns ``(theta, weights, solution)``.
    """
    X = v_hat[:, None] * Phi
    gamma = np.sqrt(np.mean(X**2, axis=0) / X.shape[0])
    sol = sqrtlasso.solve(sqrtlasso.Problem(w_hat, X, gamma))
    return sol.coefficients, gamma, sol


def least_squares(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    """Minimum-norm LS via SVD; ridge fallback when ``A`` is numerically rank deficient.

    If the SVD driver fails to converge, a pivoted-QR solve is used instead.
    """
    try:
        coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    except np.linalg.LinAlgError:
        coef, _, rank, _ = scipy.linalg.lstsq(A, b, lapack_driver="gelsy")
    if rank >= A.shape[1]:
        return coef, False
    n = A.shape[0]
    G = A.T @ A / n + RIDGE * np.eye(A.shape[1])
    return np.linalg.solve(G, A.T @ b / n), True


def direct_ls_design(Phi: np.ndarray, y: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, bool]:
    A = np.hstack([z[:, None] * Phi, Phi])
    coef, ridged = least_squares(A, y)
    return coef[: Phi.shape[1]], ridged


def region_slopes(regions: np.ndarray, y: np.ndarray, z: np.ndarray, d: int) -> np.ndarray:
    counts = np.bincount(regions - 1, minlength=d)
    missing = np.flatnonzero(counts == 0) + 1
    if missing.size:
        raise MissingRegionError(missing)
    szz = np.bincount(regions - 1, weights=z * z, minlength=d)
    if np.any(szz == 0):
        bad = (np.flatnonzero(szz == 0) + 1).tolist()
        raise DegenerateExposureError(f"exposure is identically zero in region(s) {bad}")
    szy = np.bincount(regions - 1, weights=z * y, minlength=d)
    return szy / szz


def gls_slope(K: np.ndarray, y: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """GLS slope of ``y`` on ``z`` (no intercept) and its model-based variance."""
    cf = cholesky(K)
    Kz = cho_solve(cf, z)
    denom = float(z @ Kz)
    if denom <= 0:
        raise DegenerateExposureError("exposure has zero GLS norm")
    return float(Kz @ y) / denom, 1.0 / denom


# -- public fits --------------------------------------------------------------


def fit_rosce(fit: ResidualFit, data_locations, spec: BasisSpec) -> EffectModel:
    """Robust orthogonalized effect fit from nuisance residuals.

    Coordinates whose design column vanishes on the sample get weight zero and
    are pinned at zero; they are listed in ``info["dead_coordinates"]``.
    """
    Phi = design_matrix(spec, data_locations)
    w, v = np.asarray(fit.w_hat, dtype=float), np.asarray(fit.v_hat, dtype=float)
    if not (len(w) == len(v) == Phi.shape[0]):
        raise ConfigError("residuals and locations are not aligned")
    check_exposure(v, fit.exposure_scale)
    theta, gamma, sol = rosce_design(Phi, w, v)
    return EffectModel(
        theta,
        spec,
        "rosce",
        spec.domain,
        gamma,
        {
            "converged": sol.converged,
            "sweeps": sol.iterations,
            "objective": sol.objective_value,
            "dead_coordinates": np.flatnonzero(gamma == 0).tolist(),
        },
    )


def fit_rosce_residual_data(data: ResidualDataset, spec: BasisSpec) -> EffectModel:
    return fit_rosce(ResidualFit.from_residuals(data.w_hat, data.v_hat), data.s, spec)


def fit_residual_ls(data: ResidualDataset, spec: BasisSpec) -> EffectModel:
    """Plain LS on the residual regression, ignoring errors in the regressors."""
    Phi = design_matrix(spec, data.s)
    check_exposure(data.v_hat)
    theta, ridged = least_squares(data.v_hat[:, None] * Phi, data.w_hat)
    if ridged:
        warnings.warn("residual design is rank deficient; ridge fallback used", RankDeficiencyWarning, stacklevel=2)
    return EffectModel(theta, spec, "residual_ls", spec.domain, info={"ridge_fallback": ridged})


def fit_direct_ls(data: Dataset, spec: BasisSpec) -> EffectModel:
    """Joint unpenalized LS of ``y`` on ``[z * phi(s), phi(s)]``; returns the effect block."""
    Phi = design_matrix(spec, data.s)
    theta, ridged = direct_ls_design(Phi, data.y, data.z)
    if ridged:
        warnings.warn(
            f"joint design ({Phi.shape[0]} x {2 * Phi.shape[1]}) is rank deficient; ridge {RIDGE:g} fallback used",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return EffectModel(theta, spec, "direct_ls", spec.domain, info={"ridge_fallback": ridged})


def fit_naive_region_ls(data: Dataset) -> EffectModel:
    """Per-region slope of ``y`` on ``z`` through the origin."""
    if not data.domain.is_discrete:
        raise ConfigError("naive_region_ls needs discrete space")
    theta = region_slopes(data.s, data.y, data.z, data.domain.d)
    return EffectModel(theta, BasisSpec.indicators(data.domain.d), "naive_region_ls", data.domain)


def fit_gls_sre(data: Dataset, kernel: MaternKernel) -> EffectModel:
    """Constant effect with the spatial term treated as correlated noise.

    The slope is ``(z' K^-1 z)^-1 z' K^-1 y`` where ``K`` is the kernel's Gram
    matrix on the sample (Matérn plus white noise).
    """
    if data.domain.is_discrete:
        raise ConfigError("gls_sre needs continuous space")
    slope, var = gls_slope(kernel.gram(data.s), data.y, data.z)
    return EffectModel(
        np.array([slope]), None, "gls_sre", data.domain, info={"model_variance": var, "kernel": kernel.to_dict()}
    )


def resolve_method(method: str, data) -> str:
    """Map the ``ls`` alias to the LS variant that matches the data level."""
    if method == "ls":
        return "residual_ls" if isinstance(data, ResidualDataset) else "direct_ls"
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS + ('ls',)}")
    return method


def fit(data: Dataset | ResidualDataset, method: str, spec: BasisSpec | None = None, *, kernel=None) -> EffectModel:
    """Fit any supported method to observation- or residual-level data."""
    method = resolve_method(method, data)
    if isinstance(data, ResidualDataset):
        if method == "rosce":
            return fit_rosce_residual_data(data, spec)
        if method == "residual_ls":
            return fit_residual_ls(data, spec)
        raise ConfigError(f"method {method!r} needs observation-level data (y, z)")
    if method == "rosce":
        from .residualize import fit_residuals

        return fit_rosce(fit_residuals(data, spec), data.s, spec)
    if method == "direct_ls":
        return fit_direct_ls(data, spec)
    if method == "naive_region_ls":
        return fit_naive_region_ls(data)
    if method == "gls_sre":
        if kernel is None:
            raise ConfigError("gls_sre needs a kernel")
        return fit_gls_sre(data, kernel)
    raise ConfigError(f"method {method!r} needs residual-level data")
