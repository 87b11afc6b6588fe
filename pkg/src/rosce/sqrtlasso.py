"""Weighted square-root LASSO.

Solves::

    minimize_theta  sqrt(mean((r - X theta)^2)) + sum_k gamma_k |theta_k|

by cyclic coordinate descent with an exact one-dimensional minimisation per
coordinate. Gram quantities ``X'X/n``, ``X'r/n`` and ``r'r/n`` are formed once,
after which a full sweep costs ``O(p^2)``. Unpenalized columns (for instance an
intercept) are simply coordinates with ``gamma_k = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DataError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 10_000
# Residual norms below this fraction of ||r|| count as an exact fit, where the
# square-root loss is not differentiable and its floor has been reached.
NONSMOOTH_RTOL = 1e-12
# Below this ratio of explained-away to total partial residual the Gram-based
# value suffers from cancellation and is recomputed from the data.
_CANCEL_RTOL = 1e-8


@dataclass(frozen=True)
class Problem:
    response: np.ndarray
    design: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.response, dtype=float).reshape(-1)
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataError(f"need n >= 1 and p >= 1, got design shape {X.shape}")
        if r.shape[0] != n:
            raise DataError(f"response has length {r.shape[0]} but design has {n} rows")
        if w.shape[0] != p:
            raise DataError(f"{w.shape[0]} penalty weights for {p} columns")
        if not np.all(np.isfinite(r)):
            raise DataError("response contains non-finite values")
        if not np.all(np.isfinite(X)):
            raise DataError("design contains non-finite values")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("penalty weights must be finite and non-negative")
        object.__setattr__(self, "response", r)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class Solution:
    coefficients: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    # objective after each completed sweep
    trace: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def objective(problem: Problem, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    res = problem.response - problem.design @ theta
    return float(np.sqrt(np.mean(res**2)) + problem.weights @ np.abs(theta))


def kkt_residual(problem: Problem, candidate) -> float | None:
    """Largest violation of the subgradient optimality conditions.

    Returns ``0.0`` at an exact optimum. When the candidate interpolates the
    response and some weight is positive, the square-root loss has no gradient
    there and ``None`` is returned to flag the nonsmooth point.
    """
    theta = np.asarray(candidate, dtype=float)
    X, r, gamma = problem.design, problem.response, problem.weights
    res = r - X @ theta
    rnorm = np.linalg.norm(res)
    if rnorm == 0.0 or rnorm <= NONSMOOTH_RTOL * np.linalg.norm(r):
        return 0.0 if not np.any(gamma > 0) else None
    grad = -(X.T @ res) / (problem.n * (rnorm / math.sqrt(problem.n)))
    return float(_kkt_violation(grad, theta, gamma))


def _kkt_violation(grad, theta, gamma):
    nz = theta != 0
    viol = np.where(nz, np.abs(grad + gamma * np.sign(theta)), np.maximum(np.abs(grad) - gamma, 0.0))
    return viol.max() if viol.size else 0.0


def solve(
    problem: Problem,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    initial=None,
) -> Solution:
    """Minimise the weighted square-root LASSO objective.

    Convergence requires the largest coordinate change in a sweep to drop below
    ``tol`` and the KKT residual to drop below ``10 * tol``. Hitting
    ``max_sweeps`` first returns the last iterate with ``converged=False``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    X, r, gamma = problem.design, problem.response, problem.weights
    n = problem.n
    theta = np.zeros(problem.p) if initial is None else np.array(initial, dtype=float)
    if not np.any(r):
        # zero is optimal for any non-negative weights
        theta = np.zeros(problem.p)
        return Solution(theta, 0.0, 0, True, np.zeros(0))
    G = (X.T @ X) / n
    xr = (X.T @ r) / n
    rr = float(r @ r) / n
    # column-major so per-coordinate column access is contiguous
    X = np.asfortranarray(X)
    sweeps, converged, trace = _coordinate_descent(X, r, G, xr, rr, gamma, theta, tol, int(max_sweeps))
    return Solution(theta, objective(problem, theta), int(sweeps), bool(converged), trace[:sweeps])


@numba.njit(cache=True, nogil=True)
def _coord_min_m(a, b, c, m, g):
    # argmin_t sqrt(c - 2 b t + a t^2) + g |t|, where m = c - b^2 / a
    if g == 0.0:
        return b / a
    if abs(b) <= g * math.sqrt(c):
        return 0.0
    den = a - g * g
    if den <= 0.0:
        return 0.0
    shift = g * math.sqrt(a * m / den)
    return (b - shift) / a if b > 0 else (b + shift) / a


@numba.njit(cache=True, nogil=True)
def _exact_residual(X, r, theta):
    return r - X @ theta


@numba.njit(cache=True, nogil=True)
def _loss_sq(rr, xr, theta, Gt):
    val = rr - 2.0 * (xr @ theta) + theta @ Gt
    return val if val > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _update(j, new, theta, Gt, G):
    delta = new - theta[j]
    if delta != 0.0:
        theta[j] = new
        for k in range(Gt.shape[0]):
            Gt[k] += delta * G[k, j]
    return abs(delta)


@numba.njit(cache=True, nogil=True)
def _step(j, X, r, G, xr, rr, gamma, theta, Gt):
    a = G[j, j]
    if a <= 0.0:
        return _update(j, 0.0, theta, Gt, G)
    tj = theta[j]
    bfull = xr[j] - Gt[j]
    b = bfull + a * tj
    c = _loss_sq(rr, xr, theta, Gt) + 2.0 * tj * bfull + a * tj * tj
    if c < 0.0:
        c = 0.0
    m = c - b * b / a
    if m < _CANCEL_RTOL * c:
        # near-exact fit along this column: recompute the partial residual directly
        e = _exact_residual(X, r, theta)
        n = X.shape[0]
        xe = 0.0
        ee = 0.0
        for i in range(n):
            e[i] += X[i, j] * tj
            xe += X[i, j] * e[i]
            ee += e[i] * e[i]
        b = xe / n
        c = ee / n
        t = b / a
        mm = 0.0
        for i in range(n):
            d = e[i] - t * X[i, j]
            mm += d * d
        m = mm / n
    if m < 0.0:
        m = 0.0
    return _update(j, _coord_min_m(a, b, c, m, gamma[j]), theta, Gt, G)


@numba.njit(cache=True, nogil=True)
def _kkt_exact(X, r, gamma, theta, rnorm_floor):
    n = X.shape[0]
    res = _exact_residual(X, r, theta)
    rnorm = math.sqrt(res @ res)
    if rnorm <= rnorm_floor:
        return -1.0
    grad = -(X.T @ res) / (n * (rnorm / math.sqrt(n)))
    worst = 0.0
    for k in range(theta.shape[0]):
        if theta[k] != 0.0:
            v = abs(grad[k] + gamma[k] * (1.0 if theta[k] > 0 else -1.0))
        else:
            v = abs(grad[k]) - gamma[k]
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(X, r, G, xr, rr, gamma, theta, tol, max_sweeps):
    p = theta.shape[0]
    Gt = G @ theta
    trace = np.empty(max_sweeps)
    rnorm_floor = NONSMOOTH_RTOL * math.sqrt(rr * X.shape[0])
    converged = False
    sweeps = 0
    for sweep in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            chg = _step(j, X, r, G, xr, rr, gamma, theta, Gt)
            if chg > biggest:
                biggest = chg
        pen = 0.0
        for k in range(p):
            pen += gamma[k] * abs(theta[k])
        trace[sweep] = math.sqrt(_loss_sq(rr, xr, theta, Gt)) + pen
        sweeps = sweep + 1
        if biggest < tol:
            kkt = _kkt_exact(X, r, gamma, theta, rnorm_floor)
            if kkt < 10.0 * tol:
                converged = True
                break
    # exact re-solve of unpenalized coordinates so their score equations hold
    for j in range(p):
        if gamma[j] == 0.0:
            _step(j, X, r, G, xr, rr, gamma, theta, Gt)
    return sweeps, converged, trace
