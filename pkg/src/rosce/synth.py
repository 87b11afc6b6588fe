"""Seeded synthetic data with spatial confounding.

All generators follow ``y = tau(s) z + beta(s) + eps_y`` with
``z = E[z|s] + eps_z``. A generator's output is a pure function of its
configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .data import Dataset, ResidualDataset
from .errors import ConfigError
from .kernels import MaternKernel, cholesky
from .spatial_basis import BasisSpec, SpaceDomain, design_matrix

GP_RANGE = (0.0, 10.0)
DEFAULT_GP_NOISE_SD_Z = 1.0


@dataclass(frozen=True)
class EffectFn:
    """Named effect surface.

    kinds: ``zero``, ``constant`` (``value``), ``cosine_1d`` (``period``),
    ``cosine_2d`` (``period``), ``cosine_discrete`` (``d``), ``parametric``
    (``theta``, ``spec``).
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __call__(self, locations) -> np.ndarray:
        p = self.params
        s = np.asarray(locations, dtype=float)
        if self.kind == "zero":
            return np.zeros(len(s))
        if self.kind == "constant":
            return np.full(len(s), float(p["value"]))
        if self.kind == "cosine_1d":
            return np.cos(2 * np.pi * s.reshape(len(s), -1)[:, 0] / p["period"])
        if self.kind == "cosine_2d":
            s = s.reshape(len(s), -1)
            return np.cos(2 * np.pi * s[:, 0] / p["period"] + 2 * np.pi * s[:, 1] / p["period"])
        if self.kind == "cosine_discrete":
            return np.cos(2 * np.pi * s.reshape(-1) / (2 * p["d"]))
        if self.kind == "parametric":
            return design_matrix(p["spec"], locations) @ np.asarray(p["theta"])
        raise ConfigError(f"unknown effect kind {self.kind!r}")


@dataclass(frozen=True)
class Nuisance:
    """Exposure-independent spatial term ``beta(s)``.

    kinds: ``none``, ``gp_matern`` (``kernel``: the confounder is a GP draw at
    the sample locations), ``bspline_random`` (``spec``, ``scale``: fresh
    ``eta ~ N(0, scale^2 I)`` per draw), ``linear_region`` (``2 - s``).
    """

    kind: str = "none"
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExposureLink:
    """``E[z|s] = nuisance_coef * beta(s) + effect_coef * tau(s)``."""

    nuisance_coef: float = 0.0
    effect_coef: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    domain: SpaceDomain
    effect: EffectFn
    nuisance: Nuisance
    exposure_link: ExposureLink
    noise_sd_y: float
    noise_sd_z: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.noise_sd_y < 0 or self.noise_sd_z < 0:
            raise ConfigError("noise standard deviations must be non-negative")
        if self.nuisance.kind == "linear_region" and not self.domain.is_discrete:
            raise ConfigError("linear_region nuisance needs discrete space")
        if self.nuisance.kind == "gp_matern" and self.domain.is_discrete:
            raise ConfigError("gp_matern nuisance needs continuous space")

    def sample(self, seed) -> SynthOutput:
        return simulate(self, seed)


@dataclass(frozen=True)
class Truth:
    tau: Callable[[Any], np.ndarray]
    tau_values: np.ndarray
    beta: np.ndarray
    confounder: np.ndarray | None = None
    eps_y: np.ndarray | None = None
    eps_z: np.ndarray | None = None
    v_tilde: np.ndarray | None = None
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SynthOutput:
    data: Dataset | ResidualDataset
    truth: Truth


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _locations(domain: SpaceDomain, n: int, rng: np.random.Generator) -> np.ndarray:
    if domain.is_discrete:
        return rng.integers(1, domain.d + 1, size=n)
    lo = np.array([b[0] for b in domain.bounds])
    hi = np.array([b[1] for b in domain.bounds])
    return lo + (hi - lo) * rng.random((n, domain.dim))


def simulate(config: SynthConfig, seed) -> SynthOutput:
    """Draw one dataset. Random draws happen in a fixed order:
    locations, nuisance, exposure noise, outcome noise."""
    rng = _rng(seed)
    n = config.n
    s = _locations(config.domain, n, rng)
    nz = config.nuisance
    params: dict[str, Any] = {}
    confounder = None
    if nz.kind == "none":
        beta = np.zeros(n)
    elif nz.kind == "gp_matern":
        kernel: MaternKernel = nz.params["kernel"]
        K = kernel.gram(s)
        beta = np.tril(cholesky(K)[0]) @ rng.standard_normal(n)
        confounder = beta
    elif nz.kind == "bspline_random":
        spec0: BasisSpec = nz.params["spec"]
        eta = nz.params.get("scale", 1.0) * rng.standard_normal(spec0.dim)
        beta = design_matrix(spec0, s) @ eta
        params["eta"] = eta
    elif nz.kind == "linear_region":
        beta = 2.0 - s.astype(float)
    else:
        raise ConfigError(f"unknown nuisance kind {nz.kind!r}")
    tau = config.effect(s)
    link = config.exposure_link
    eps_z = config.noise_sd_z * rng.standard_normal(n)
    z = link.nuisance_coef * beta + link.effect_coef * tau + eps_z
    eps_y = config.noise_sd_y * rng.standard_normal(n)
    y = tau * z + beta + eps_y
    data = Dataset(y, z, s, config.domain)
    truth = Truth(config.effect, tau, beta, confounder, eps_y, eps_z, params=params)
    return SynthOutput(data, truth)


# -- named experiments ----------------------------------------------------------


def gp_example_config(
    case: str = "fixed_zero",
    n: int = 300,
    kernel: MaternKernel | None = None,
    noise_sd_z: float = DEFAULT_GP_NOISE_SD_Z,
) -> SynthConfig:
    """Confounder ``c(s)`` drawn from a Matérn GP on ``[0, 10]``; ``y = tau z + c``, ``z = c + eps``."""
    if n < 2:
        raise ConfigError("n must be at least 2")
    width = GP_RANGE[1] - GP_RANGE[0]
    kernel = kernel or MaternKernel(lengthscale=0.1 * width)
    case = case.replace("-", "_")
    if case == "fixed_zero":
        effect = EffectFn("zero")
    elif case == "heterogeneous":
        effect = EffectFn("cosine_1d", {"period": width})
    else:
        raise ConfigError(f"case must be 'fixed_zero' or 'heterogeneous', got {case!r}")
    return SynthConfig(
        SpaceDomain.continuous([GP_RANGE]),
        effect,
        Nuisance("gp_matern", {"kernel": kernel}),
        ExposureLink(nuisance_coef=1.0),
        noise_sd_y=0.0,
        noise_sd_z=noise_sd_z,
        n=n,
    )


def gen_gp_example(case: str = "fixed_zero", n: int = 300, seed=0, **kwargs) -> SynthOutput:
    return simulate(gp_example_config(case, n, **kwargs), seed)


def nuisance_basis_2d() -> BasisSpec:
    return BasisSpec.bsplines([(0.0, 10.0), (0.0, 10.0)], [(10, 0.2)])


def experiment_2d_config(n: int = 676) -> SynthConfig:
    if n < 2:
        raise ConfigError("n must be at least 2")
    spec0 = nuisance_basis_2d()
    return SynthConfig(
        spec0.domain,
        EffectFn("cosine_2d", {"period": 20.0}),
        Nuisance("bspline_random", {"spec": spec0, "scale": 1.0}),
        ExposureLink(nuisance_coef=0.5),
        noise_sd_y=0.2,
        noise_sd_z=1.0,
        n=n,
    )


def gen_2d_experiment(n: int = 676, seed=0) -> SynthOutput:
    return simulate(experiment_2d_config(n), seed)


def effect_basis_2d() -> BasisSpec:
    """Three-resolution basis used to estimate the 2-D effect."""
    return BasisSpec.bsplines([(0.0, 10.0), (0.0, 10.0)], [(10, 0.2), (10, 0.4), (10, 0.85)])


def discrete_config(n: int = 500, d: int = 5) -> SynthConfig:
    if n < d:
        raise ConfigError(f"need n >= d, got n={n}, d={d}")
    return SynthConfig(
        SpaceDomain.discrete(d),
        EffectFn("cosine_discrete", {"d": d}),
        Nuisance("linear_region"),
        ExposureLink(effect_coef=1.0),
        noise_sd_y=0.2,
        noise_sd_z=1.0,
        n=n,
    )


def gen_discrete_experiment(n: int = 500, d: int = 5, seed=0) -> SynthOutput:
    return simulate(discrete_config(n, d), seed)


@dataclass(frozen=True)
class EivConfig:
    """Residual-level errors-in-variables data on ``[0, 10]``.

    ``v_hat`` and the unobserved ``v_tilde`` are independent standard normals,
    ``w_hat = tau(s) (v_hat + v_tilde)`` and ``tau(s) = phi(s)' theta0``. The
    locations are an even grid. ``theta0 ~ N(0, I)`` is drawn once from
    ``theta_seed`` so it stays fixed across repeated samples.
    """

    n: int = 41
    d_theta: int = 10
    theta_seed: int = 0
    support_fraction: float = 0.2
    v_tilde_scale: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be at least 2")

    @property
    def spec(self) -> BasisSpec:
        return BasisSpec.bsplines([(0.0, 10.0)], [(self.d_theta, self.support_fraction)])

    @property
    def theta0(self) -> np.ndarray:
        # own stream, so theta0 never shares draws with sample(theta_seed)
        ss = np.random.SeedSequence(self.theta_seed, spawn_key=(0,))
        return np.random.default_rng(ss).standard_normal(self.d_theta)

    @property
    def effect(self) -> EffectFn:
        return EffectFn("parametric", {"theta": self.theta0, "spec": self.spec})

    def sample(self, seed) -> SynthOutput:
        rng = _rng(seed)
        s = np.linspace(0.0, 10.0, self.n)
        tau = self.effect(s)
        v_hat = rng.standard_normal(self.n)
        v_tilde = self.v_tilde_scale * rng.standard_normal(self.n)
        w_hat = tau * (v_hat + v_tilde)
        data = ResidualDataset(w_hat, v_hat, s, self.spec.domain)
        truth = Truth(self.effect, tau, np.zeros(self.n), v_tilde=v_tilde, params={"theta0": self.theta0})
        return SynthOutput(data, truth)


def gen_eiv_experiment(n: int = 41, d_theta: int = 10, seed=0, theta_seed: int | None = None, **kwargs) -> SynthOutput:
    """One errors-in-variables draw; ``theta0`` comes from ``theta_seed`` (defaults to ``seed``)."""
    cfg = EivConfig(n, d_theta, seed if theta_seed is None else theta_seed, **kwargs)
    return cfg.sample(seed)


def linear_config(n: int = 200, tau: float = 1.0) -> SynthConfig:
    """No confounding: ``y = tau z + eps_y`` on ``[0, 10]`` with ``z`` independent of ``s``."""
    return SynthConfig(
        SpaceDomain.continuous([GP_RANGE]),
        EffectFn("constant", {"value": tau}),
        Nuisance("none"),
        ExposureLink(),
        noise_sd_y=0.5,
        noise_sd_z=1.0,
        n=n,
    )


def with_n(config, n: int):
    return replace(config, n=n)
