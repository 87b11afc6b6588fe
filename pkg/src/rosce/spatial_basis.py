"""Spatial basis vectors for continuous and discrete space.

Continuous space uses compactly supported cubic B-splines placed on a uniform
lattice per axis, combined across axes by a Kronecker product and stacked
across resolution levels. Discrete space uses region indicators.

Kronecker order is axis-1-major: in 2-D the component ``(k1, k2)`` sits at
flat index ``k1 * N2 + k2`` (this is what ``np.kron`` produces).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Cubic pieces in the local coordinate f = 4 s / L - c + 2, one row per unit
# interval [0,1), [1,2), [2,3), [3,4]; columns are coefficients of 1, f, f^2, f^3.
PIECE_COEFFS: tuple[tuple[Fraction, ...], ...] = (
    (Fraction(0), Fraction(0), Fraction(0), Fraction(1, 6)),
    (Fraction(2, 3), Fraction(-2), Fraction(2), Fraction(-1, 2)),
    (Fraction(-22, 3), Fraction(10), Fraction(-4), Fraction(1, 2)),
    (Fraction(32, 3), Fraction(-8), Fraction(2), Fraction(-1, 6)),
)
_COEFFS = np.array([[float(c) for c in row] for row in PIECE_COEFFS])

MIN_COMPONENTS = 4


def bspline(s, c, L: float) -> np.ndarray:
    """Evaluate cubic B-spline components, broadcasting ``s`` against ``c``.

    Component ``c`` is centred at ``c * L / 4`` and vanishes outside
    ``[(c - 2) L / 4, (c + 2) L / 4]``.
    """
    if not np.isfinite(L) or L <= 0:
        raise DomainError(f"support length must be positive, got {L!r}")
    s = np.asarray(s, dtype=float)
    c = np.asarray(c, dtype=float)
    u = 4.0 * s / L - c
    inside = np.abs(u) < 2.0
    f = np.where(inside, u + 2.0, 0.0)
    piece = np.clip(np.floor(f), 0, 3).astype(np.intp)
    a = _COEFFS[piece]
    val = ((a[..., 3] * f + a[..., 2]) * f + a[..., 1]) * f + a[..., 0]
    return np.where(inside, val, 0.0)


def bspline_scalar(s: float, c: float, L: float) -> float:
    """Scalar version of :func:`bspline`."""
    return float(bspline(s, c, L))


def knot_layout(axis_bounds: Sequence[float], n_components: int, support: float) -> np.ndarray:
    """Knot indices ``c`` of ``n_components`` uniformly spaced components.

    Centres sit at the midpoints of ``n_components`` equal cells spanning
    ``axis_bounds``; the returned values are ``c = 4 * centre / support`` so they
    plug straight into :func:`bspline`. The support must exceed the cell width,
    otherwise points halfway between centres would not be covered.
    """
    lo, hi = (float(b) for b in axis_bounds)
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ConfigError(f"axis bounds must satisfy lower < upper, got [{lo}, {hi}]")
    if int(n_components) != n_components or n_components < MIN_COMPONENTS:
        raise ConfigError(
            f"a cubic B-spline axis needs at least {MIN_COMPONENTS} components, got {n_components}"
        )
    if not np.isfinite(support) or support <= 0:
        raise ConfigError(f"support must be positive, got {support!r}")
    width = (hi - lo) / n_components
    if support <= width:
        raise ConfigError(
            f"support {support:g} does not exceed the component spacing {width:g}; "
            "parts of the axis would be uncovered"
        )
    centres = lo + (np.arange(n_components) + 0.5) * width
    return 4.0 * centres / support


@dataclass(frozen=True)
class SpaceDomain:
    """Continuous box ``bounds`` (one ``(lower, upper)`` per axis) or ``d`` discrete regions."""

    kind: str
    bounds: tuple[tuple[float, float], ...] = ()
    d: int = 0

    def __post_init__(self):
        if self.kind == "continuous":
            if not 1 <= len(self.bounds) <= 3:
                raise ConfigError("continuous space must have 1, 2 or 3 axes")
            for lo, hi in self.bounds:
                if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                    raise ConfigError(f"axis bounds must be finite with lower < upper, got [{lo}, {hi}]")
        elif self.kind == "discrete":
            if int(self.d) != self.d or self.d < 1:
                raise ConfigError(f"discrete space needs d >= 1 regions, got {self.d!r}")
        else:
            raise ConfigError(f"unknown space kind {self.kind!r}")

    @classmethod
    def continuous(cls, bounds) -> SpaceDomain:
        bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
        return cls("continuous", tuple((float(lo), float(hi)) for lo, hi in bounds))

    @classmethod
    def discrete(cls, d: int) -> SpaceDomain:
        return cls("discrete", d=int(d))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def dim(self) -> int:
        return 1 if self.is_discrete else len(self.bounds)

    def check_locations(self, locations) -> np.ndarray:
        """Validate and normalise locations.

        Returns an ``(n, dim)`` float array for continuous space and an ``(n,)``
        integer array of 1-based regions for discrete space.
        """
        if self.is_discrete:
            arr = np.atleast_1d(np.asarray(locations, dtype=float)).reshape(-1)
            if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                raise DomainError("discrete regions must be integers")
            bad = (arr < 1) | (arr > self.d)
            if np.any(bad):
                raise DomainError(f"regions outside 1..{self.d}: {np.unique(arr[bad]).tolist()}")
            return arr.astype(np.int64)
        arr = np.asarray(locations, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1) if self.dim == 1 else arr.reshape(1, -1)
        if arr.shape[1] != self.dim:
            raise DomainError(f"expected {self.dim}-dimensional locations, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("locations must be finite")
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        bad = np.any((arr < lo) | (arr > hi), axis=1)
        if np.any(bad):
            raise DomainError(
                f"{int(bad.sum())} location(s) outside the domain bounds {list(self.bounds)}, "
                f"first at {arr[bad][0].tolist()}"
            )
        return arr


@dataclass(frozen=True)
class Level:
    """One resolution level: per-axis component counts and supports (native units)."""

    n_components: tuple[int, ...]
    support: tuple[float, ...]


@dataclass(frozen=True)
class BasisSpec:
    domain: SpaceDomain
    levels: tuple[Level, ...] = ()
    _knots: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.domain.is_discrete:
            if self.levels:
                raise ConfigError("discrete bases take no B-spline levels")
            return
        if not self.levels:
            raise ConfigError("a continuous basis needs at least one level")
        knots = []
        for level in self.levels:
            if len(level.n_components) != self.domain.dim or len(level.support) != self.domain.dim:
                raise ConfigError("each level needs one component count and one support per axis")
            knots.append(
                tuple(
                    knot_layout(b, n, L)
                    for b, n, L in zip(self.domain.bounds, level.n_components, level.support)
                )
            )
        object.__setattr__(self, "_knots", tuple(knots))

    @classmethod
    def bsplines(cls, bounds, levels) -> BasisSpec:
        """Build a continuous spec from ``(n_components, support_fraction)`` pairs.

        Either entry may be a scalar (shared by all axes) or a per-axis sequence.
        Supports are given as fractions of each axis range.
        """
        domain = SpaceDomain.continuous(bounds)
        ranges = [hi - lo for lo, hi in domain.bounds]
        built = []
        for n, frac in levels:
            n = _per_axis(n, domain.dim, int)
            frac = _per_axis(frac, domain.dim, float)
            built.append(Level(n, tuple(f * r for f, r in zip(frac, ranges))))
        return cls(domain, tuple(built))

    @classmethod
    def indicators(cls, d: int) -> BasisSpec:
        return cls(SpaceDomain.discrete(d))

    @property
    def dim(self) -> int:
        """Number of basis functions (length of the coefficient vector)."""
        if self.domain.is_discrete:
            return self.domain.d
        return sum(int(np.prod(level.n_components)) for level in self.levels)

    def to_dict(self) -> dict[str, Any]:
        if self.domain.is_discrete:
            return {"kind": "discrete", "d": self.domain.d}
        ranges = [hi - lo for lo, hi in self.domain.bounds]
        return {
            "kind": "continuous",
            "bounds": [list(b) for b in self.domain.bounds],
            "levels": [
                {
                    "n_components": list(level.n_components),
                    "support_fraction": [L / r for L, r in zip(level.support, ranges)],
                }
                for level in self.levels
            ],
        }

    @classmethod
    def from_dict(cls, cfg: dict[str, Any]) -> BasisSpec:
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        if kind == "discrete":
            allowed = {"d"}
        elif kind == "continuous":
            allowed = {"bounds", "levels"}
        else:
            raise ConfigError(f"basis kind must be 'continuous' or 'discrete', got {kind!r}")
        unknown = set(cfg) - allowed
        if unknown:
            raise ConfigError(f"unknown basis keys: {sorted(unknown)}")
        if kind == "discrete":
            if "d" not in cfg:
                raise ConfigError("discrete basis needs 'd'")
            return cls.indicators(cfg["d"])
        levels = []
        for lvl in cfg.get("levels", []):
            extra = set(lvl) - {"n_components", "support_fraction"}
            if extra:
                raise ConfigError(f"unknown level keys: {sorted(extra)}")
            try:
                levels.append((lvl["n_components"], lvl["support_fraction"]))
            except KeyError as exc:
                raise ConfigError(f"basis level is missing {exc.args[0]!r}") from None
        if "bounds" not in cfg:
            raise ConfigError("continuous basis needs 'bounds'")
        return cls.bsplines(cfg["bounds"], levels)


def _per_axis(value, dim: int, cast) -> tuple:
    if np.ndim(value) == 0:
        return (cast(value),) * dim
    value = tuple(cast(v) for v in value)
    if len(value) != dim:
        raise ConfigError(f"expected {dim} per-axis values, got {len(value)}")
    return value


def design_matrix(spec: BasisSpec, locations) -> np.ndarray:
    """Stack basis vectors for many locations into an ``(n, spec.dim)`` matrix."""
    locs = spec.domain.check_locations(locations)
    if spec.domain.is_discrete:
        out = np.zeros((locs.shape[0], spec.domain.d))
        out[np.arange(locs.shape[0]), locs - 1] = 1.0
        return out
    blocks = []
    for level, knots in zip(spec.levels, spec._knots):
        block = np.ones((locs.shape[0], 1))
        for axis, (c, L) in enumerate(zip(knots, level.support)):
            phi = bspline(locs[:, axis, None], c[None, :], L)
            # row-wise Kronecker product keeps axis-1-major ordering
            block = (block[:, :, None] * phi[:, None, :]).reshape(locs.shape[0], -1)
        blocks.append(block)
    return np.hstack(blocks)


def eval_basis(spec: BasisSpec, s) -> np.ndarray:
    """Basis vector at a single location."""
    locs = spec.domain.check_locations(s)
    if locs.shape[0] != 1:
        raise DomainError("eval_basis takes exactly one location; use design_matrix for many")
    return design_matrix(spec, locs)[0]
