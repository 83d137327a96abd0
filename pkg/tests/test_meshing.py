"""Abscissae, grids and piecewise polynomial evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddecol.errors import DomainError
from ddecol.meshing import (
    AbscissaeKind,
    PiecewisePolynomial,
    build_grid,
    colloc_derivatives,
    eval_derivs_many,
    eval_periodic,
    eval_piecewise,
    eval_values_many,
    locate,
    make_abscissae,
    restrict_function,
    right_end_value,
    wrap_times,
)

GL = AbscissaeKind.GAUSS_LEGENDRE
CH = AbscissaeKind.CHEBYSHEV_EXTREMA


class TestAbscissae:
    def test_gauss_legendre_m2_closed_form(self):
        a = make_abscissae(GL, 2)
        expected = np.array([(3 - np.sqrt(3)) / 6, (3 + np.sqrt(3)) / 6])
        np.testing.assert_allclose(a.c, expected, rtol=0, atol=1e-14)
        assert not a.includes_right_end

    def test_gauss_legendre_m1_is_midpoint(self):
        np.testing.assert_allclose(make_abscissae(GL, 1).c, [0.5], atol=1e-15)

    def test_chebyshev_m2(self):
        a = make_abscissae(CH, 2)
        np.testing.assert_allclose(a.c, [0.5, 1.0], atol=1e-15)
        assert a.includes_right_end
        assert a.c[-1] == 1.0

    @pytest.mark.parametrize("m", range(1, 9))
    def test_chebyshev_formula(self, m):
        a = make_abscissae(CH, m)
        j = np.arange(1, m + 1)
        np.testing.assert_allclose(a.c, (1 - np.cos(j * np.pi / m)) / 2, atol=1e-15)

    @pytest.mark.parametrize("kind", [GL, CH])
    @pytest.mark.parametrize("m", range(1, 11))
    def test_abscissae_sorted_in_unit_interval(self, kind, m):
        a = make_abscissae(kind, m)
        assert a.c.shape == (m,)
        assert np.all(np.diff(a.c) > 0)
        assert a.c[0] > 0.0 and a.c[-1] <= 1.0
        assert a.includes_right_end == (a.c[-1] == 1.0)

    def test_gauss_legendre_orthogonality_accuracy(self):
        # roots of the shifted Legendre polynomial: P_m(2c - 1) = 0
        for m in (3, 5, 8):
            a = make_abscissae(GL, m)
            coeffs = np.zeros(m + 1)
            coeffs[m] = 1.0
            vals = np.polynomial.legendre.legval(2 * a.c - 1, coeffs)
            assert np.max(np.abs(vals)) < 1e-14

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            make_abscissae(GL, 0)
        with pytest.raises(ValueError):
            make_abscissae("nonsense", 3)
        with pytest.raises(ValueError):
            make_abscissae(AbscissaeKind.CUSTOM, c=[0.5, 0.5])
        with pytest.raises(ValueError):
            make_abscissae(AbscissaeKind.CUSTOM, c=[0.0, 0.5])
        with pytest.raises(ValueError):
            make_abscissae(AbscissaeKind.CUSTOM, c=[0.5, 1.2])

    def test_custom_right_end_detection(self):
        assert make_abscissae(AbscissaeKind.CUSTOM, c=[0.3, 1.0]).includes_right_end
        assert not make_abscissae(AbscissaeKind.CUSTOM, c=[0.3, 0.9]).includes_right_end


class TestGrid:
    def test_outer_nodes(self):
        g = build_grid(4, make_abscissae(GL, 2))
        np.testing.assert_array_equal(g.outer, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert g.h == 0.25
        assert g.n_rep == 9

    def test_chebyshev_collocation_nodes(self):
        g = build_grid(2, make_abscissae(CH, 2))
        np.testing.assert_allclose(g.colloc.ravel(), [0.25, 0.5, 0.75, 1.0], atol=1e-15)
        # right-end abscissae coincide bitwise with outer nodes
        assert g.colloc[0, -1] == g.outer[1]
        assert g.colloc[1, -1] == g.outer[2]

    def test_rep_node_count_and_order(self):
        g = build_grid(5, make_abscissae(GL, 3))
        assert g.rep_nodes.shape == (16,)
        assert g.rep_nodes[0] == 0.0
        assert np.all(np.diff(g.rep_nodes) > 0)

    def test_invalid_L(self):
        with pytest.raises(ValueError):
            build_grid(0, make_abscissae(GL, 2))


class TestLocate:
    def test_interior_nodes_use_left_interval(self):
        g = build_grid(4, make_abscissae(GL, 2))
        k, xi = locate(g, [0.25, 0.5, 0.75])
        np.testing.assert_array_equal(k, [0, 1, 2])
        np.testing.assert_allclose(xi, [1.0, 1.0, 1.0])

    def test_endpoints_and_clamping(self):
        g = build_grid(4, make_abscissae(GL, 2))
        k, xi = locate(g, [0.0, 1.0, 1.0 + 9e-13, -9e-13])
        np.testing.assert_array_equal(k, [0, 3, 3, 0])
        assert xi[1] == 1.0 and xi[2] == 1.0 and xi[3] == 0.0

    def test_outside_domain_raises(self):
        g = build_grid(4, make_abscissae(GL, 2))
        with pytest.raises(DomainError):
            locate(g, [0.5, 1.001])
        with pytest.raises(DomainError):
            locate(g, [-1e-3])


def _poly_on_grid(grid, coeffs):
    """Exact piecewise representation of a global polynomial."""
    vals = np.polyval(coeffs, grid.rep_nodes)
    return PiecewisePolynomial(grid, vals[:, None])


class TestPiecewisePolynomial:
    def test_constant_reproduction(self):
        g = build_grid(3, make_abscissae(GL, 2))
        p = PiecewisePolynomial(g, np.full((g.n_rep, 1), 0.7))
        for t in (0.0, 0.1, 1 / 3, 0.5, 0.99, 1.0):
            v, d = eval_piecewise(p, t)
            assert abs(v[0] - 0.7) < 1e-14
            assert abs(d[0]) < 1e-12

    def test_quadratic_reproduction_m2(self):
        g = build_grid(5, make_abscissae(GL, 2))
        p = _poly_on_grid(g, [1.0, 0.0, 0.0])  # q(t) = t^2
        v, d = eval_piecewise(p, 0.3)
        assert abs(v[0] - 0.09) < 1e-13
        assert abs(d[0] - 0.6) < 1e-12

    @pytest.mark.parametrize("kind", [GL, CH])
    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_polynomial_reproduction(self, kind, m):
        rng = np.random.default_rng(42 + m)
        g = build_grid(4, make_abscissae(kind, m))
        coeffs = rng.standard_normal(m + 1)
        p = _poly_on_grid(g, coeffs)
        ts = rng.uniform(0, 1, 100)
        vals = eval_values_many(p, ts)[:, 0]
        ders = eval_derivs_many(p, ts)[:, 0]
        scale = max(1.0, np.max(np.abs(vals)))
        assert np.max(np.abs(vals - np.polyval(coeffs, ts))) < 1e-12 * scale
        assert np.max(np.abs(ders - np.polyval(np.polyder(coeffs), ts))) < 1e-10 * scale

    def test_smooth_function_interpolation_error(self):
        f = lambda t: np.sin(np.pi * t / 2)
        g = build_grid(10, make_abscissae(GL, 3))
        p = restrict_function(f, g)
        ts = np.linspace(0, 1, 777)
        err = np.max(np.abs(eval_values_many(p, ts)[:, 0] - f(ts)))
        # degree-3 interpolation on h = 0.1: C * h^4 with a small constant
        assert 0 < err < 5e-6

    def test_evaluation_at_rep_nodes_returns_stored(self):
        rng = np.random.default_rng(7)
        g = build_grid(6, make_abscissae(GL, 3))
        vals = rng.standard_normal((g.n_rep, 2))
        p = PiecewisePolynomial(g, vals)
        got = eval_values_many(p, g.rep_nodes)
        np.testing.assert_array_equal(got, vals)

    def test_projection_identity(self):
        rng = np.random.default_rng(3)
        for kind in (GL, CH):
            g = build_grid(4, make_abscissae(kind, 3))
            vals = rng.standard_normal((g.n_rep, 1))
            p = PiecewisePolynomial(g, vals)
            p2 = restrict_function(lambda t: eval_values_many(p, [t])[0], g)
            np.testing.assert_array_equal(p2.values, p.values)

    @pytest.mark.parametrize("kind", [GL, CH])
    def test_continuity_at_interior_nodes(self, kind):
        rng = np.random.default_rng(11)
        g = build_grid(5, make_abscissae(kind, 3))
        p = PiecewisePolynomial(g, rng.standard_normal((g.n_rep, 1)))
        scale = np.max(np.abs(p.values))
        for i in range(1, g.L):
            left = eval_values_many(p, [g.outer[i]])[0, 0]
            # interval i's chained left value is its polynomial's value at xi=0
            right = p.interval_values[i, 0, 0]
            assert abs(left - right) <= 1e-12 * max(1.0, scale)

    def test_left_limit_derivative_convention(self):
        # build a kinked but continuous piecewise function and check that the
        # derivative at the interior node is the left interval's
        g = build_grid(2, make_abscissae(CH, 2))
        f = lambda t: min(t, 0.5)  # kink at the mesh point 0.5
        p = restrict_function(f, g)
        _, d = eval_piecewise(p, 0.5)
        assert abs(d[0] - 1.0) < 1e-12

    def test_colloc_derivatives_match_pointwise(self):
        rng = np.random.default_rng(5)
        for kind in (GL, CH):
            g = build_grid(4, make_abscissae(kind, 3))
            p = PiecewisePolynomial(g, rng.standard_normal((g.n_rep, 2)))
            a = colloc_derivatives(p)
            b = eval_derivs_many(p, g.colloc.ravel())
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_right_end_value_matches_eval(self):
        rng = np.random.default_rng(9)
        for kind in (GL, CH):
            g = build_grid(3, make_abscissae(kind, 4))
            p = PiecewisePolynomial(g, rng.standard_normal((g.n_rep, 1)))
            np.testing.assert_allclose(
                right_end_value(p), eval_values_many(p, [1.0])[0], rtol=1e-13, atol=1e-13
            )

    def test_bad_shape_raises(self):
        g = build_grid(3, make_abscissae(GL, 2))
        with pytest.raises(ValueError):
            PiecewisePolynomial(g, np.zeros((g.n_rep + 1, 1)))
        with pytest.raises(ValueError):
            PiecewisePolynomial(g, np.zeros(g.n_rep))


@settings(max_examples=40, deadline=None)
@given(
    m=st.integers(1, 6),
    kind=st.sampled_from([GL, CH]),
    xi=st.floats(0.0, 1.0),
)
def test_partition_of_unity(m, kind, xi):
    from ddecol.meshing import _value_rows

    a = make_abscissae(kind, m)
    rows = _value_rows(a, np.array([xi]))
    assert abs(rows.sum() - 1.0) < 1e-13


@settings(max_examples=30, deadline=None)
@given(
    m=st.integers(1, 5),
    L=st.integers(1, 7),
    kind=st.sampled_from([GL, CH]),
    data=st.data(),
)
def test_polynomial_reproduction_property(m, L, kind, data):
    coeffs = data.draw(
        st.lists(st.floats(-2, 2), min_size=m + 1, max_size=m + 1).map(np.asarray)
    )
    g = build_grid(L, make_abscissae(kind, m))
    p = _poly_on_grid(g, coeffs)
    ts = np.linspace(0, 1, 37)
    scale = max(1.0, np.max(np.abs(np.polyval(coeffs, ts))))
    assert np.max(np.abs(eval_values_many(p, ts)[:, 0] - np.polyval(coeffs, ts))) < 1e-12 * scale


class TestPeriodicWrap:
    def test_wrap_identity(self):
        ts = np.array([-1.0, -0.75, -0.5, -0.25, 0.0])
        np.testing.assert_array_equal(wrap_times(ts), [0.0, 0.25, 0.5, 0.75, 0.0])

    def test_wrap_below_minus_one_raises(self):
        with pytest.raises(DomainError):
            wrap_times(np.array([-1.01]))

    def test_eval_periodic_wraps_exactly(self):
        from ddecol.collocation import solution_from_values

        rng = np.random.default_rng(13)
        g = build_grid(4, make_abscissae(GL, 2))
        sol = solution_from_values(
            g, rng.standard_normal((g.n_rep, 1)), rng.standard_normal((g.n_rep, 1)), 5.0
        )
        for s in (-0.3, -0.9, -1e-9):
            a = eval_periodic(sol, s)
            b = eval_periodic(sol, s + 1.0)
            for u, v in zip(a, b):
                np.testing.assert_array_equal(u, v)

    def test_eval_periodic_minus_one_is_zero(self):
        from ddecol.collocation import solution_from_values

        rng = np.random.default_rng(14)
        g = build_grid(3, make_abscissae(CH, 2))
        sol = solution_from_values(
            g, rng.standard_normal((g.n_rep, 1)), rng.standard_normal((g.n_rep, 1)), 5.0
        )
        a = eval_periodic(sol, -1.0)
        b = eval_periodic(sol, 0.0)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)
