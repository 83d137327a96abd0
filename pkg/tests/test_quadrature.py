"""Quadrature rules: frozen node/weight values, exactness, convergence."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddecol.quadrature import QuadratureKind, integrate, make_rule

CC = QuadratureKind.CLENSHAW_CURTIS
GL = QuadratureKind.GAUSS_LEGENDRE


class TestFrozenValues:
    def test_clenshaw_curtis_three_nodes(self):
        r = make_rule(CC, 3, -1.0, 1.0)
        np.testing.assert_allclose(r.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(r.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)

    def test_clenshaw_curtis_two_nodes_is_trapezoid(self):
        r = make_rule(CC, 2, 0.0, 1.0)
        np.testing.assert_allclose(r.nodes, [0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(r.weights, [0.5, 0.5], atol=1e-15)

    def test_gauss_one_node_on_0_2(self):
        r = make_rule(GL, 1, 0.0, 2.0)
        np.testing.assert_allclose(r.nodes, [1.0], atol=1e-15)
        np.testing.assert_allclose(r.weights, [2.0], atol=1e-15)

    def test_gauss_two_nodes_reference(self):
        r = make_rule(GL, 2, -1.0, 1.0)
        np.testing.assert_allclose(r.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(r.weights, [1.0, 1.0], atol=1e-15)


class TestRuleInvariants:
    @pytest.mark.parametrize("kind,n", [(CC, 2), (CC, 5), (CC, 20), (GL, 1), (GL, 7), (GL, 20)])
    @pytest.mark.parametrize("a,b", [(-1.0, 1.0), (-3.0, -1.0), (0.25, 9.5)])
    def test_weights_sum_to_length(self, kind, n, a, b):
        r = make_rule(kind, n, a, b)
        assert abs(r.weights.sum() - (b - a)) < 1e-13 * (b - a)
        assert r.nodes.min() >= a - 1e-14 and r.nodes.max() <= b + 1e-14
        assert np.all(np.diff(r.nodes) > 0)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_gauss_exactness_degree_2n_minus_1(self, n):
        r = make_rule(GL, n, -1.0, 1.0)
        for deg in range(2 * n):
            exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
            assert abs(r.weights @ r.nodes**deg - exact) < 1e-13

    @pytest.mark.parametrize("n", [2, 3, 5, 9])
    def test_clenshaw_curtis_exactness_degree_n_minus_1(self, n):
        r = make_rule(CC, n, -1.0, 1.0)
        for deg in range(n):
            exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
            assert abs(r.weights @ r.nodes**deg - exact) < 1e-13

    def test_odd_polynomial_killed_by_symmetry(self):
        r = make_rule(GL, 2, -1.0, 1.0)
        assert abs(integrate(r, lambda x: x**3)) < 1e-15

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.floats(-10, 9),
        length=st.floats(0.1, 10),
        kind=st.sampled_from([CC, GL]),
        n=st.integers(3, 12),
    )
    def test_affine_rescaling_consistency(self, a, length, kind, n):
        b = a + length
        r = make_rule(kind, n, a, b)
        ref = make_rule(kind, n, -1.0, 1.0)
        mapped = a + (b - a) * (ref.nodes + 1) / 2
        np.testing.assert_allclose(r.nodes, mapped, rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(r.weights, ref.weights * (b - a) / 2, rtol=1e-13, atol=1e-14)


class TestIntegrate:
    def test_constant(self):
        r = make_rule(CC, 5, -3.0, -1.0)
        assert abs(integrate(r, lambda x: 2.5) - 5.0) < 1e-13

    def test_exp_on_shifted_interval(self):
        r = make_rule(CC, 9, -3.0, -1.0)
        exact = np.exp(-1.0) - np.exp(-3.0)
        assert abs(integrate(r, np.exp) - exact) < 1e-8

    def test_scalar_only_integrand_fallback(self):
        r = make_rule(GL, 4, 0.0, 1.0)
        f = lambda x: float(x) ** 2  # rejects array input
        assert abs(integrate(r, f) - 1 / 3) < 1e-14

    def test_vector_valued_integrand(self):
        r = make_rule(GL, 4, 0.0, 1.0)
        out = integrate(r, lambda x: np.stack([x, x**2], axis=-1))
        np.testing.assert_allclose(out, [0.5, 1 / 3], atol=1e-14)

    @pytest.mark.parametrize("kind", [CC, GL])
    @pytest.mark.parametrize("f,exact", [(np.exp, np.e - np.exp(-1)), (np.sin, 0.0)])
    def test_geometric_convergence_on_analytic(self, kind, f, exact):
        errs = []
        for n in (4, 8, 16, 32):
            errs.append(abs(integrate(make_rule(kind, n, -1.0, 1.0), f) - exact))
        for e1, e2 in zip(errs, errs[1:]):
            if e1 < 1e-13:
                break
            assert e2 < 0.5 * e1


class TestValidation:
    def test_bad_interval(self):
        with pytest.raises(ValueError):
            make_rule(CC, 5, 1.0, 1.0)
        with pytest.raises(ValueError):
            make_rule(GL, 5, 2.0, 1.0)
        with pytest.raises(ValueError):
            make_rule(GL, 5, -np.inf, 1.0)

    def test_bad_node_counts(self):
        with pytest.raises(ValueError):
            make_rule(CC, 1, -1.0, 1.0)
        with pytest.raises(ValueError):
            make_rule(GL, 0, -1.0, 1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_rule("simpson", 3, -1.0, 1.0)
