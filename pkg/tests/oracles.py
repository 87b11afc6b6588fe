"""Reference computations that share no code with the package.

Each oracle solves the same mathematical problem by a different route:
exact rational arithmetic, scipy's B-spline machinery, derivative-free line
searches, or a conic solver.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np
from scipy.interpolate import BSpline

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def cubic_piece_exact(piece: int, f: Fraction) -> Fraction:
    """Uniform cubic B-spline piece on local coordinate ``f`` in ``[0, 4]``, from the
    textbook truncated-power form ``sum_j (-1)^j C(4, j) (f - j)_+^3 / 6``."""
    total = Fraction(0)
    for j in range(piece + 1):
        total += (-1) ** j * math.comb(4, j) * (f - j) ** 3
    return total / 6


def bspline_scipy(s, c: float, L: float) -> np.ndarray:
    """Cardinal cubic B-spline with knots ``(c - 2 + k) L / 4``, k = 0..4, via scipy."""
    knots = (c - 2 + np.arange(5)) * L / 4
    elem = BSpline.basis_element(knots, extrapolate=False)
    out = elem(np.asarray(s, dtype=float))
    return np.nan_to_num(out, nan=0.0)


def sqrt_lasso_objective(r, X, gamma, theta) -> float:
    res = r - X @ theta
    return float(np.sqrt(np.mean(res**2)) + np.dot(gamma, np.abs(theta)))


def golden_section(fun, lo: float, hi: float, tol: float = 1e-11, max_iter: int = 400) -> float:
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def _ls_bracket(r, X) -> float:
    coef = np.linalg.lstsq(X, r, rcond=None)[0]
    return 4.0 * float(np.max(np.abs(coef))) + 1.0


def nested_line_search(r, X, gamma, bracket: float | None = None) -> np.ndarray:
    """Minimise the square-root-LASSO objective by nested exact line searches.

    The outer coordinate is optimised by golden section over the profile
    function obtained by minimising the remaining coordinates recursively.
    Convex in every coordinate, so every profile is unimodal. Practical for
    ``p <= 3``.
    """
    r = np.asarray(r, dtype=float)
    X = np.asarray(X, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    p = X.shape[1]
    R = _ls_bracket(r, X) if bracket is None else bracket

    def profile(fixed: tuple[float, ...]) -> tuple[float, tuple[float, ...]]:
        k = len(fixed)
        if k == p:
            theta = np.array(fixed)
            return sqrt_lasso_objective(r, X, gamma, theta), fixed
        tol = 1e-11 if k == 0 else 1e-10
        best = golden_section(lambda t: profile(fixed + (t,))[0], -R, R, tol=tol)
        return profile(fixed + (best,))

    _, first = profile(())
    return polish(r, X, gamma, np.array(first), 1e-3 * R)


def polish(r, X, gamma, theta, radius: float, rounds: int = 5) -> np.ndarray:
    """Coordinate-wise golden-section refinement in a small bracket around ``theta``.

    The penalty is separable, so cyclic exact coordinate minimisation converges
    to the global minimum from any nearby start."""
    theta = np.array(theta, dtype=float)
    for _ in range(rounds):
        for j in range(theta.size):
            def along(t, j=j):
                th = theta.copy()
                th[j] = t
                return sqrt_lasso_objective(r, X, gamma, th)

            theta[j] = golden_section(along, theta[j] - radius, theta[j] + radius, tol=1e-14)
    return theta


def conic_sqrt_lasso(r, X, gamma) -> np.ndarray:
    """Solve the same program as a second-order cone problem with cvxpy."""
    import cvxpy as cp

    n, p = X.shape
    theta = cp.Variable(p)
    obj = cp.norm(r - X @ theta, 2) / math.sqrt(n) + gamma @ cp.abs(theta)
    prob = cp.Problem(cp.Minimize(obj))
    with warnings.catch_warnings():
        # reduced-accuracy status is fine: the result is polished below
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    return polish(r, X, gamma, np.asarray(theta.value, dtype=float), 1e-4)


def sqrt_lasso_reference(r, X, gamma) -> np.ndarray:
    """Nested line search for tiny problems, conic solver otherwise."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] <= 3:
        return nested_line_search(r, X, gamma)
    return conic_sqrt_lasso(np.asarray(r, dtype=float), X, np.asarray(gamma, dtype=float))


def quantile_linear(values, q: float) -> float:
    """Sample quantile with linear interpolation between order statistics (type 7)."""
    x = sorted(float(v) for v in values)
    h = (len(x) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (h - lo) * (x[hi] - x[lo])
