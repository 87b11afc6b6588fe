"""Pivotal bootstrap bands and Monte Carlo dispersion of effect estimates.

Replicate ``b`` draws its randomness from
``SeedSequence(seed, spawn_key=(b,))``, so results depend only on the seed and
the replicate index. Replicates may run on several threads (set
``ROSCE_NUM_THREADS``); results are always gathered in index order.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import estimator as est
from .data import Dataset, ResidualDataset, location_columns
from .errors import ConfigError, DegenerateExposureError, MissingRegionError, RosceError
from .kernels import MaternKernel
from .residualize import residualize_design
from .spatial_basis import BasisSpec, SpaceDomain, design_matrix

THREADS_ENV = "ROSCE_NUM_THREADS"
REDRAW_FACTOR = 10


@dataclass(frozen=True)
class ResampleSeed:
    seed: int

    def generator(self, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(int(index),)))


@dataclass(frozen=True)
class CIBand:
    grid: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    replicates: int
    replicate_values: np.ndarray | None = None

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (self.lower <= values) & (values <= self.upper)

    def to_csv(self, domain: SpaceDomain) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(location_columns(domain) + ["point", "lower", "upper"])
        for i in range(len(self.point)):
            w.writerow(_loc_cells(domain, self.grid[i]) + [repr(float(v)) for v in (self.point[i], self.lower[i], self.upper[i])])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "grid": np.asarray(self.grid).tolist(),
            "point": self.point.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "level": self.level,
            "replicates": self.replicates,
        }


def _loc_cells(domain: SpaceDomain, loc) -> list[str]:
    if domain.is_discrete:
        return [str(int(loc))]
    return [repr(float(v)) for v in np.atleast_1d(loc)]


def pivotal_interval(point, replicate_values, alpha: float):
    """``[2 t - q(1 - alpha/2), 2 t - q(alpha/2)]`` per column of the replicate matrix."""
    q_lo, q_hi = np.quantile(replicate_values, [alpha / 2, 1 - alpha / 2], axis=0)
    return 2 * point - q_hi, 2 * point - q_lo


def percentile_interval(replicate_values, alpha: float):
    q_lo, q_hi = np.quantile(replicate_values, [alpha / 2, 1 - alpha / 2], axis=0)
    return q_lo, q_hi


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def grid_estimator(
    data: Dataset | ResidualDataset,
    method: str,
    spec: BasisSpec | None,
    grid,
    *,
    refit_nuisance: bool = True,
    kernel: MaternKernel | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``f(idx)`` giving the effect on ``grid`` fitted to rows ``idx`` of ``data``.

    ``f(np.arange(n))`` reproduces the full-sample fit of :func:`estimator.fit`.
    Basis matrices are built once and row-indexed per replicate.
    """
    method = est.resolve_method(method, data)
    domain = data.domain
    grid = domain.check_locations(grid)
    if method == "gls_sre":
        if kernel is None:
            raise ConfigError("gls_sre needs a kernel")
        if domain.is_discrete:
            raise ConfigError("gls_sre needs continuous space")
        K_smooth = kernel.smooth_gram(data.s)
        ones = np.ones(len(grid))

        def gls(idx):
            K = K_smooth[np.ix_(idx, idx)]
            K[np.diag_indices_from(K)] += kernel.noise
            return est.gls_slope(K, data.y[idx], data.z[idx])[0] * ones

        return gls
    if method == "naive_region_ls":
        if not domain.is_discrete:
            raise ConfigError("naive_region_ls needs discrete space")
        return lambda idx: est.region_slopes(data.s[idx], data.y[idx], data.z[idx], domain.d)[grid - 1]
    if spec is None:
        raise ConfigError(f"method {method!r} needs a basis spec")
    Phi = design_matrix(spec, data.s)
    Phi_grid = design_matrix(spec, grid)
    if isinstance(data, ResidualDataset):
        w, v = data.w_hat, data.v_hat
        if method == "rosce":

            def rosce_resid(idx):
                est.check_exposure(v[idx])
                return Phi_grid @ est.rosce_design(Phi[idx], w[idx], v[idx])[0]

            return rosce_resid
        if method == "residual_ls":

            def resid_ls(idx):
                est.check_exposure(v[idx])
                return Phi_grid @ est.least_squares(v[idx, None] * Phi[idx], w[idx])[0]

            return resid_ls
        raise ConfigError(f"method {method!r} needs observation-level data")
    y, z = data.y, data.z
    if method == "direct_ls":
        return lambda idx: Phi_grid @ est.direct_ls_design(Phi[idx], y[idx], z[idx])[0]
    if method != "rosce":
        raise ConfigError(f"method {method!r} needs residual-level data")
    full = None if refit_nuisance else residualize_design(Phi, y, z)

    def rosce(idx):
        if full is None:
            rf = residualize_design(Phi[idx], y[idx], z[idx])
            w_hat, v_hat, scale = rf.w_hat, rf.v_hat, rf.exposure_scale
        else:
            w_hat, v_hat, scale = full.w_hat[idx], full.v_hat[idx], full.exposure_scale
        est.check_exposure(v_hat, scale)
        return Phi_grid @ est.rosce_design(Phi[idx], w_hat, v_hat)[0]

    return rosce


def replicate_matrix(estimate: Callable, n: int, B: int, seed: ResampleSeed | int) -> tuple[np.ndarray, int]:
    """Run ``B`` bootstrap replicates; returns the ``(B, G)`` matrix and the total number of draws.

    A replicate whose resample leaves the effect unidentified (no exposure
    variation, an empty region) is redrawn from the same stream. More than
    ``10 * B`` draws in total is an error.
    """
    seed = seed if isinstance(seed, ResampleSeed) else ResampleSeed(seed)
    cap = REDRAW_FACTOR * B

    def one(b):
        rng = seed.generator(b)
        for draws in range(1, cap + 1):
            idx = rng.integers(0, n, size=n)
            try:
                return estimate(idx), draws
            except (DegenerateExposureError, MissingRegionError):
                continue
        return None, cap + 1

    threads = n_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    total = sum(r[1] for r in results)
    if total > cap or any(r[0] is None for r in results):
        raise RosceError(f"bootstrap needed more than {cap} draws for {B} usable replicates")
    return np.vstack([r[0] for r in results]), total


def bootstrap_band(
    data: Dataset | ResidualDataset,
    spec: BasisSpec | None,
    grid,
    B: int = 1000,
    alpha: float = 0.05,
    seed: ResampleSeed | int = 0,
    *,
    method: str = "rosce",
    refit_nuisance: bool = True,
    kernel: MaternKernel | None = None,
    keep_replicates: bool = False,
) -> CIBand:
    """Pointwise pivotal bootstrap band for the effect on ``grid``.

    Each replicate resamples whole observations with replacement and reruns
    the chosen method; for ``rosce`` that includes refitting both nuisance
    predictors unless ``refit_nuisance`` is false, in which case the
    full-sample residuals are resampled instead.
    """
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if B < 100:
        raise ConfigError("need at least 100 bootstrap replicates")
    grid = data.domain.check_locations(grid)
    estimate = grid_estimator(data, method, spec, grid, refit_nuisance=refit_nuisance, kernel=kernel)
    point = estimate(np.arange(data.n))
    reps, _ = replicate_matrix(estimate, data.n, B, seed)
    lower, upper = pivotal_interval(point, reps, alpha)
    return CIBand(grid, point, lower, upper, 1 - alpha, B, reps if keep_replicates else None)


@dataclass(frozen=True)
class Dispersion:
    grid: np.ndarray
    quantiles: tuple[float, float]
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]
    estimates: dict[str, np.ndarray]

    def to_csv(self, domain: SpaceDomain) -> str:
        lo_name, hi_name = (f"q{100 * q:g}" for q in self.quantiles)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(location_columns(domain) + ["method", lo_name, hi_name])
        for m in self.lower:
            for i in range(len(self.grid)):
                w.writerow(
                    _loc_cells(domain, self.grid[i]) + [m, repr(float(self.lower[m][i])), repr(float(self.upper[m][i]))]
                )
        return buf.getvalue()


def mc_dispersion(
    dgp,
    n_sims: int,
    quantiles: tuple[float, float] = (0.05, 0.95),
    grid=None,
    seed: int = 0,
    *,
    methods: Sequence[str] = ("rosce",),
    spec: BasisSpec | None = None,
    kernel: MaternKernel | None = None,
) -> Dispersion:
    """Per-location quantiles of effect estimates over independent datasets.

    ``dgp`` is anything with ``sample(rng) -> SynthOutput`` (a
    :class:`synth.SynthConfig` or :class:`synth.EivConfig`). Simulation ``i``
    uses the stream of :class:`ResampleSeed` index ``i``.
    """
    if n_sims < 1:
        raise ConfigError("need at least one simulation")
    q_lo, q_hi = quantiles
    if not 0 <= q_lo <= q_hi <= 1:
        raise ConfigError(f"quantiles must satisfy 0 <= q_lo <= q_hi <= 1, got {quantiles}")
    if spec is None:
        spec = getattr(dgp, "spec", None)
    stream = ResampleSeed(seed)
    estimates: dict[str, list] = {m: [] for m in methods}
    for i in range(n_sims):
        out = dgp.sample(stream.generator(i))
        if grid is None:
            grid = default_grid(out.data)
        for m in methods:
            model = est.fit(out.data, m, spec, kernel=kernel)
            estimates[m].append(est.effect_on(model, grid))
    mats = {m: np.vstack(v) for m, v in estimates.items()}
    lower = {m: np.quantile(a, q_lo, axis=0) for m, a in mats.items()}
    upper = {m: np.quantile(a, q_hi, axis=0) for m, a in mats.items()}
    grid = out.data.domain.check_locations(grid)
    return Dispersion(grid, (q_lo, q_hi), lower, upper, mats)


def default_grid(data: Dataset | ResidualDataset, points_per_axis: int = 101) -> np.ndarray:
    """All regions, or a regular grid over the data's bounding box."""
    domain = data.domain
    if domain.is_discrete:
        return np.arange(1, domain.d + 1)
    axes = [np.linspace(data.s[:, k].min(), data.s[:, k].max(), points_per_axis) for k in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])
