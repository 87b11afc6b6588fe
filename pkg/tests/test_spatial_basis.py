from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import numpy.testing as nptest
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bspline_scipy, cubic_piece_exact
from rosce.errors import ConfigError, DomainError
from rosce.spatial_basis import (
    PIECE_COEFFS,
    BasisSpec,
    SpaceDomain,
    bspline,
    bspline_scalar,
    design_matrix,
    eval_basis,
    knot_layout,
)

KNOTS = list(range(-2, 13))
SUPPORTS = [0.5, 2.0, 8.5]


def _piece_exact(piece: int, f: Fraction) -> Fraction:
    a0, a1, a2, a3 = PIECE_COEFFS[piece]
    return a0 + a1 * f + a2 * f**2 + a3 * f**3


def _derivative(coeffs, order: int):
    c = list(coeffs)
    for _ in range(order):
        c = [k * c[k] for k in range(1, len(c))]
    return c


class TestPieces:
    @pytest.mark.parametrize("piece", range(4))
    @pytest.mark.parametrize("f", [Fraction(k, 7) for k in range(8)])
    def test_pieces_match_truncated_power_form(self, piece, f):
        x = piece + f
        assert _piece_exact(piece, x) == cubic_piece_exact(piece, x)

    @pytest.mark.parametrize("boundary", [1, 2, 3])
    @pytest.mark.parametrize("order", [0, 1, 2])
    def test_c2_at_piece_boundaries_exact(self, boundary, order):
        left = _derivative(PIECE_COEFFS[boundary - 1], order)
        right = _derivative(PIECE_COEFFS[boundary], order)
        x = Fraction(boundary)
        lval = sum(c * x**k for k, c in enumerate(left))
        rval = sum(c * x**k for k, c in enumerate(right))
        assert lval == rval

    @pytest.mark.parametrize("order", [0, 1, 2])
    def test_c2_at_support_ends_exact(self, order):
        first = _derivative(PIECE_COEFFS[0], order)
        last = _derivative(PIECE_COEFFS[3], order)
        assert sum(c * Fraction(0) ** k for k, c in enumerate(first)) == 0
        assert sum(c * Fraction(4) ** k for k, c in enumerate(last)) == 0

    def test_centre_and_shoulder_values_exact(self):
        assert _piece_exact(2, Fraction(2)) == Fraction(2, 3)
        assert _piece_exact(1, Fraction(2)) == Fraction(2, 3)
        assert _piece_exact(0, Fraction(1)) == Fraction(1, 6)
        assert _piece_exact(1, Fraction(1)) == Fraction(1, 6)


class TestBspline:
    @pytest.mark.parametrize("c", KNOTS)
    @pytest.mark.parametrize("L", SUPPORTS)
    def test_centre_and_shoulders(self, c, L):
        assert bspline_scalar(c * L / 4, c, L) == pytest.approx(2 / 3, abs=1e-12)
        assert bspline_scalar((c - 1) * L / 4, c, L) == pytest.approx(1 / 6, abs=1e-12)
        assert bspline_scalar((c + 1) * L / 4, c, L) == pytest.approx(1 / 6, abs=1e-12)

    @pytest.mark.parametrize("c", KNOTS)
    @pytest.mark.parametrize("L", SUPPORTS)
    def test_outside_support_is_exactly_zero(self, c, L):
        assert bspline_scalar((c + 3) * L / 4, c, L) == 0.0
        lo, hi = (c - 2) * L / 4, (c + 2) * L / 4
        s = np.concatenate([np.linspace(lo - 3 * L, lo, 200), np.linspace(hi, hi + 3 * L, 200)])
        u = 4 * s / L - c
        vals = bspline(s, c, L)
        assert np.all(vals[np.abs(u) >= 2] == 0.0)

    @pytest.mark.parametrize("c", KNOTS)
    @pytest.mark.parametrize("L", SUPPORTS)
    def test_matches_scipy_on_dense_grid(self, c, L):
        s = np.linspace((c - 3) * L / 4, (c + 3) * L / 4, 2001)
        nptest.assert_allclose(bspline(s, c, L), bspline_scipy(s, c, L), atol=1e-12, rtol=0)

    @pytest.mark.parametrize("c", KNOTS)
    @pytest.mark.parametrize("L", SUPPORTS)
    def test_nonnegative_and_bounded(self, c, L):
        s = np.linspace((c - 3) * L / 4, (c + 3) * L / 4, 4001)
        vals = bspline(s, c, L)
        assert vals.min() >= 0.0
        assert vals.max() <= 2 / 3 + 1e-15

    @pytest.mark.parametrize("c", KNOTS)
    @pytest.mark.parametrize("L", SUPPORTS)
    @pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
    def test_continuity_across_boundaries(self, c, L, k):
        # value and one-sided first differences agree across every joint
        h = 1e-6 * L
        s0 = (c + k) * L / 4
        left = bspline(np.array([s0 - 2 * h, s0 - h]), c, L)
        right = bspline(np.array([s0 + h, s0 + 2 * h]), c, L)
        mid = bspline_scalar(s0, c, L)
        assert abs(left[1] - mid) < 1e-5 and abs(right[0] - mid) < 1e-5
        slope_l = (left[1] - left[0]) / h
        slope_r = (right[1] - right[0]) / h
        assert slope_l == pytest.approx(slope_r, abs=1e-4 * 4 / L + 1e-6)

    def test_rejects_nonpositive_support(self):
        with pytest.raises(DomainError):
            bspline_scalar(0.0, 0, 0.0)
        with pytest.raises(DomainError):
            bspline(np.zeros(3), 1, -2.0)

    @given(
        st.floats(-50, 50, allow_nan=False),
        st.integers(-2, 12),
        st.sampled_from(SUPPORTS),
    )
    def test_matches_scipy_anywhere(self, s, c, L):
        assert bspline_scalar(s, c, L) == pytest.approx(float(bspline_scipy(np.array([s]), c, L)[0]), abs=1e-12)


class TestKnotLayout:
    @pytest.mark.parametrize("n, L", [(4, 10.0), (10, 2.0), (10, 4.0), (10, 8.5), (7, 3.0)])
    def test_covers_axis_on_dense_grid(self, n, L):
        c = knot_layout((0.0, 10.0), n, L)
        s = np.linspace(0.0, 10.0, 20001)
        total = bspline(s[:, None], c[None, :], L).sum(axis=1)
        assert total.min() > 0.0

    def test_four_components_are_evenly_spaced(self):
        c = knot_layout((0.0, 10.0), 4, 10.0)
        centres = c * 10.0 / 4
        nptest.assert_allclose(np.diff(centres), 2.5)
        assert len(c) == 4

    def test_ten_components(self):
        c = knot_layout((0.0, 10.0), 10, 2.0)
        centres = c * 2.0 / 4
        nptest.assert_allclose(centres, np.arange(10) + 0.5)

    def test_deterministic(self):
        a = knot_layout((-3.0, 7.0), 9, 2.5)
        b = knot_layout((-3.0, 7.0), 9, 2.5)
        assert a.tobytes() == b.tobytes()

    @pytest.mark.parametrize(
        "bounds, n, L",
        [((0.0, 0.0), 10, 2.0), ((1.0, 0.0), 10, 2.0), ((0.0, 10.0), 3, 4.0), ((0.0, 10.0), 10, 0.0), ((0.0, 10.0), 10, 1.0)],
    )
    def test_rejects_bad_layouts(self, bounds, n, L):
        with pytest.raises(ConfigError):
            knot_layout(bounds, n, L)


class TestSpaceDomain:
    @pytest.mark.parametrize("bounds", [[(0.0, 0.0)], [(1.0, 0.0)], [(0.0, np.inf)], [(0, 1)] * 4])
    def test_bad_continuous(self, bounds):
        with pytest.raises(ConfigError):
            SpaceDomain.continuous(bounds)

    @pytest.mark.parametrize("d", [0, -3, 2.5])
    def test_bad_discrete(self, d):
        with pytest.raises(ConfigError):
            SpaceDomain("discrete", d=d)

    def test_out_of_domain(self):
        dom = SpaceDomain.continuous([(0.0, 10.0)])
        with pytest.raises(DomainError):
            dom.check_locations([10.5])
        with pytest.raises(DomainError):
            SpaceDomain.discrete(5).check_locations([0, 3])
        with pytest.raises(DomainError):
            SpaceDomain.discrete(5).check_locations([1.5])


class TestEvalBasis:
    def test_discrete_one_hot(self):
        spec = BasisSpec.indicators(5)
        nptest.assert_array_equal(eval_basis(spec, 3), [0, 0, 1, 0, 0])

    @pytest.mark.parametrize("d", [1, 2, 5, 50])
    def test_discrete_rows_sum_to_one(self, d):
        Phi = design_matrix(BasisSpec.indicators(d), np.arange(1, d + 1))
        assert np.all(Phi.sum(axis=1) == 1.0)
        assert set(np.unique(Phi)) <= {0.0, 1.0}

    def test_two_d_single_level_length(self):
        spec = BasisSpec.bsplines([(0, 10), (0, 10)], [(10, 0.2)])
        assert eval_basis(spec, [3.3, 7.1]).shape == (100,)
        assert spec.dim == 100

    def test_two_d_three_levels_length(self):
        spec = BasisSpec.bsplines([(0, 10), (0, 10)], [(10, 0.2), (10, 0.4), (10, 0.85)])
        assert eval_basis(spec, [3.3, 7.1]).shape == (300,)

    @given(st.floats(0, 10), st.floats(0, 10))
    @settings(max_examples=60)
    def test_tensor_is_flattened_outer_product(self, s1, s2):
        spec2 = BasisSpec.bsplines([(0, 10), (0, 10)], [((10, 6), (0.2, 0.4))])
        ax1 = BasisSpec.bsplines([(0, 10)], [(10, 0.2)])
        ax2 = BasisSpec.bsplines([(0, 10)], [(6, 0.4)])
        outer = np.outer(eval_basis(ax1, s1), eval_basis(ax2, s2))
        got = eval_basis(spec2, [s1, s2])
        nptest.assert_array_equal(got, outer.reshape(-1))
        # axis-1-major: component (k1, k2) sits at k1 * N2 + k2
        k1, k2 = 3, 4
        assert got[k1 * 6 + k2] == outer[k1, k2]

    def test_nonnegative_continuous(self):
        spec = BasisSpec.bsplines([(0, 10), (0, 10)], [(10, 0.2), (10, 0.85)])
        rng = np.random.default_rng(0)
        assert design_matrix(spec, rng.uniform(0, 10, (500, 2))).min() >= 0.0

    def test_out_of_domain_raises(self):
        spec = BasisSpec.bsplines([(0, 10)], [(10, 0.2)])
        with pytest.raises(DomainError):
            eval_basis(spec, 11.0)
        with pytest.raises(DomainError):
            eval_basis(BasisSpec.indicators(5), 6)

    def test_deterministic(self):
        spec = BasisSpec.bsplines([(0, 10), (0, 10)], [(10, 0.2), (10, 0.4)])
        a = eval_basis(spec, [1.234, 5.678])
        b = eval_basis(spec, [1.234, 5.678])
        assert a.tobytes() == b.tobytes()

    def test_three_d_uses_same_rule(self):
        spec = BasisSpec.bsplines([(0, 1)] * 3, [(4, 0.5)])
        assert eval_basis(spec, [0.2, 0.5, 0.9]).shape == (64,)


class TestSerialization:
    @pytest.mark.parametrize(
        "spec",
        [
            BasisSpec.bsplines([(0, 10)], [(10, 0.2)]),
            BasisSpec.bsplines([(0, 10), (-5, 5)], [(10, 0.2), (10, 0.4), (10, 0.85)]),
            BasisSpec.indicators(7),
        ],
    )
    def test_round_trip(self, spec):
        back = BasisSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert back == spec

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            BasisSpec.from_dict({"kind": "discrete", "d": 3, "colour": "red"})
        with pytest.raises(ConfigError):
            BasisSpec.from_dict(
                {"kind": "continuous", "bounds": [[0, 1]], "levels": [{"n_components": 4, "support_fraction": 0.5, "x": 1}]}
            )

    def test_discrete_with_levels_rejected(self):
        from rosce.spatial_basis import Level

        with pytest.raises(ConfigError):
            BasisSpec(SpaceDomain.discrete(3), (Level((4,), (1.0,)),))
