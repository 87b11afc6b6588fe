"""Observation containers and their CSV format.

Columns are ``y,z,s1[,s2[,s3]]`` for continuous space and ``y,z,region`` for
discrete space (1-based integer regions). Residual-level data, where the
nuisance has already been partialled out, uses ``w_hat,v_hat,s1...`` or
``w_hat,v_hat,region``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .spatial_basis import SpaceDomain


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    domain: SpaceDomain

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        s = self.domain.check_locations(self.s)
        if not (len(y) == len(z) == len(s)):
            raise DataError(f"y, z and s lengths differ: {len(y)}, {len(z)}, {len(s)}")
        if len(y) < 2:
            raise DataError("need at least two observations")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise DataError("y and z must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return len(self.y)

    def take(self, idx) -> Dataset:
        return Dataset(self.y[idx], self.z[idx], self.s[idx], self.domain)


@dataclass(frozen=True)
class ResidualDataset:
    """Residualised outcome ``w_hat`` and exposure ``v_hat`` at locations ``s``."""

    w_hat: np.ndarray
    v_hat: np.ndarray
    s: np.ndarray
    domain: SpaceDomain

    def __post_init__(self):
        w = np.asarray(self.w_hat, dtype=float).reshape(-1)
        v = np.asarray(self.v_hat, dtype=float).reshape(-1)
        s = self.domain.check_locations(self.s)
        if not (len(w) == len(v) == len(s)):
            raise DataError(f"w_hat, v_hat and s lengths differ: {len(w)}, {len(v)}, {len(s)}")
        if len(w) < 2:
            raise DataError("need at least two observations")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise DataError("w_hat and v_hat must be finite")
        object.__setattr__(self, "w_hat", w)
        object.__setattr__(self, "v_hat", v)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return len(self.w_hat)

    def take(self, idx) -> ResidualDataset:
        return ResidualDataset(self.w_hat[idx], self.v_hat[idx], self.s[idx], self.domain)


def location_columns(domain: SpaceDomain) -> list[str]:
    if domain.is_discrete:
        return ["region"]
    return [f"s{k + 1}" for k in range(domain.dim)]


def _fmt(x) -> str:
    return repr(float(x))


def dataset_to_csv(data: Dataset | ResidualDataset) -> str:
    residual = isinstance(data, ResidualDataset)
    head = ["w_hat", "v_hat"] if residual else ["y", "z"]
    a, b = (data.w_hat, data.v_hat) if residual else (data.y, data.z)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(head + location_columns(data.domain))
    for i in range(data.n):
        if data.domain.is_discrete:
            loc = [str(int(data.s[i]))]
        else:
            loc = [_fmt(v) for v in data.s[i]]
        writer.writerow([_fmt(a[i]), _fmt(b[i])] + loc)
    return buf.getvalue()


def read_dataset_csv(text: str, *, bounds=None, d: int | None = None) -> Dataset | ResidualDataset:
    """Parse the CSV schema above.

    The space is inferred from the location columns. Continuous bounds default
    to the data bounding box and the region count to the largest label seen;
    pass ``bounds`` / ``d`` to override. Raises :class:`DataError` with the
    offending line and column on any schema violation.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("empty CSV: a header row is required")
    header = [h.strip() for h in rows[0]]
    if "w_hat" in header or "v_hat" in header:
        value_cols = ["w_hat", "v_hat"]
    else:
        value_cols = ["y", "z"]
    for col in value_cols:
        if col not in header:
            raise DataError(f"line 1: missing required column {col!r}")
    if "region" in header:
        loc_cols = ["region"]
    else:
        loc_cols = [c for c in ("s1", "s2", "s3") if c in header]
        if not loc_cols:
            raise DataError("line 1: missing location column(s): need 'region' or 's1'")
        if loc_cols != ["s1", "s2", "s3"][: len(loc_cols)]:
            raise DataError(f"line 1: location columns must be s1, s2, s3 in order, got {loc_cols}")
    extra = set(header) - set(value_cols) - set(loc_cols)
    if extra:
        raise DataError(f"line 1: unexpected column(s) {sorted(extra)}")
    pos = [header.index(c) for c in value_cols + loc_cols]
    values = np.empty((len(rows) - 1, len(pos)))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        for j, p in enumerate(pos):
            try:
                values[lineno - 2, j] = float(row[p])
            except ValueError:
                raise DataError(f"line {lineno}, column {header[p]!r}: cannot parse {row[p]!r} as a number") from None
            if not np.isfinite(values[lineno - 2, j]):
                raise DataError(f"line {lineno}, column {header[p]!r}: non-finite value")
    if values.shape[0] < 2:
        raise DataError("need at least two data rows")
    locs = values[:, 2:]
    if loc_cols == ["region"]:
        regions = locs[:, 0]
        bad = np.flatnonzero((regions != np.round(regions)) | (regions < 1))
        if bad.size:
            raise DataError(f"line {bad[0] + 2}, column 'region': regions must be integers >= 1")
        domain = SpaceDomain.discrete(d if d is not None else int(regions.max()))
        locs = regions.astype(int)
    else:
        if bounds is None:
            lo, hi = locs.min(axis=0), locs.max(axis=0)
            if np.any(hi <= lo):
                raise DataError("locations are constant along an axis; pass explicit bounds")
            bounds = np.column_stack([lo, hi])
        domain = SpaceDomain.continuous(bounds)
    cls = ResidualDataset if value_cols[0] == "w_hat" else Dataset
    return cls(values[:, 0], values[:, 1], locs, domain)
