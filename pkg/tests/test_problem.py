"""Delayed-state accessors, kernel integrals, and phase conditions."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddecol import (
    AnchorPhase,
    CoupledSystem,
    DelayExceedsPeriodError,
    IntegralPhase,
    QuadratureSpec,
    accessor_from_functions,
    accessor_from_solution,
    build_grid,
    kernel_integral,
    make_abscissae,
    phase_residual,
    quadratic_exact,
    restrict_function,
    restrict_reference,
    solution_from_values,
)

GAMMA = 4.0


def exact_accessor(gamma, times):
    exact = quadratic_exact(gamma)
    return accessor_from_functions(times, lambda t: exact(t)[0], lambda t: exact(t)[1])


class TestStateAccessor:
    def test_wraps_negative_arguments_by_one_period(self):
        acc = accessor_from_functions(
            [0.1, 0.4], lambda t: np.sin(2 * np.pi * t)[:, None],
            lambda t: np.cos(2 * np.pi * t)[:, None],
        )
        got = acc.x_at(-0.3)
        want = np.sin(2 * np.pi * (np.array([0.1, 0.4]) - 0.3))[:, None]
        np.testing.assert_allclose(got, want, atol=1e-15)

    def test_shared_theta_array_shape(self):
        acc = exact_accessor(GAMMA, np.linspace(0, 1, 7))
        out = acc.x_at(np.array([-0.75, -0.5, 0.0]))
        assert out.shape == (7, 3, 1)

    def test_per_time_theta_rows(self):
        times = np.array([0.0, 0.25, 0.5])
        acc = accessor_from_functions(
            times, lambda t: t[:, None], lambda t: t[:, None]
        )
        theta = np.array([[-0.1, 0.0], [-0.2, 0.0], [-0.3, 0.0]])
        out = acc.x_at(theta)
        assert out.shape == (3, 2, 1)
        np.testing.assert_allclose(out[:, 1, 0], times, atol=1e-15)
        np.testing.assert_allclose(
            out[:, 0, 0], (times + theta[:, 0]) % 1.0, atol=1e-12
        )

    def test_per_time_theta_row_count_mismatch(self):
        acc = exact_accessor(GAMMA, [0.0, 0.5])
        with pytest.raises(ValueError):
            acc.x_at(np.zeros((3, 2)))

    def test_theta_outside_window_raises(self):
        acc = exact_accessor(GAMMA, [0.0])
        with pytest.raises(DelayExceedsPeriodError):
            acc.x_at(-1.2)
        with pytest.raises(DelayExceedsPeriodError):
            acc.x_at(0.5)

    def test_accessor_from_solution_matches_interpolant(self):
        exact = quadratic_exact(GAMMA)
        grid = build_grid(6, make_abscissae("gauss_legendre", 3))
        sol = restrict_reference(exact, grid)
        times = np.array([0.05, 0.3, 0.99])
        acc = accessor_from_solution(sol, times)
        x0 = acc.x_at(0.0)
        want, _ = exact(times)
        np.testing.assert_allclose(x0, want, atol=1e-4)
        assert acc.grid is grid

    def test_missing_derivative_evaluator(self):
        acc = exact_accessor(GAMMA, [0.0])
        with pytest.raises(ValueError):
            acc.y_deriv_at(0.0)


class TestKernelIntegral:
    @pytest.mark.parametrize(
        "kind,n", [("clenshaw_curtis", 20), ("gauss_legendre", 12),
                   ("mesh_gauss_legendre", 40)]
    )
    def test_constant_kernel_integrates_to_window_length(self, kind, n):
        exact = quadratic_exact(GAMMA)
        grid = build_grid(5, make_abscissae("gauss_legendre", 3))
        sol = restrict_reference(exact, grid)
        acc = accessor_from_solution(sol, np.linspace(0, 1, 9))
        f = kernel_integral(
            lambda s, xv, yv: np.ones_like(xv), -3.0, -1.0,
            QuadratureSpec(kind, n), needs=("x",),
        )
        np.testing.assert_allclose(f(acc, 4.0), 2.0, atol=1e-12)

    def test_quadratic_renewal_identity(self):
        # the distributed delay of x(1-x) over the exact orbit reproduces
        # (2/gamma) x(t) for the closed-form solution
        exact = quadratic_exact(GAMMA)
        times = np.linspace(0, 1, 17)
        acc = accessor_from_functions(
            times, lambda t: exact(t)[0], lambda t: exact(t)[1]
        )
        f = kernel_integral(
            lambda s, xv, yv: xv * (1.0 - xv), -3.0, -1.0,
            QuadratureSpec("clenshaw_curtis", 40), needs=("x",),
        )
        got = f(acc, exact.omega)
        want = (2.0 / GAMMA) * exact(times)[0]
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_value_at_time_zero_is_half_sigma(self):
        exact = quadratic_exact(GAMMA)
        acc = accessor_from_functions(
            [0.0], lambda t: exact(t)[0], lambda t: exact(t)[1]
        )
        f = kernel_integral(
            lambda s, xv, yv: xv * (1.0 - xv), -3.0, -1.0,
            QuadratureSpec("clenshaw_curtis", 40), needs=("x",),
        )
        sigma = exact.meta["sigma"]
        assert f(acc, 4.0)[0, 0] == pytest.approx(sigma / 2.0, abs=1e-12)

    def test_mesh_aligned_is_exact_on_interpolant(self):
        # on a piecewise-polynomial state the mesh-aligned composite rule is
        # exact, so raising the node budget must not change the result, and
        # adaptive quadrature split at the interpolant's breakpoints agrees;
        # a fixed rule of comparable size is off by its kink error instead
        from scipy.integrate import quad

        exact = quadratic_exact(GAMMA)
        grid = build_grid(7, make_abscissae("gauss_legendre", 3))
        sol = restrict_reference(exact, grid)
        times = np.linspace(0, 1, 11)
        kern = lambda s, xv, yv: xv * (1.0 - xv)

        def functional(spec):
            acc = accessor_from_solution(sol, times)
            return kernel_integral(kern, -3.0, -1.0, spec, needs=("x",))(acc, 4.0)

        coarse = functional(QuadratureSpec("mesh_gauss_legendre", 60))
        fine = functional(QuadratureSpec("mesh_gauss_legendre", 240))
        np.testing.assert_allclose(coarse, fine, atol=1e-13)

        t0 = times[3]
        single = accessor_from_solution(sol, [t0])

        def integrand(s):
            v = single.x_at(np.array([s / 4.0]))[0, 0, 0]
            return v * (1.0 - v)

        breaks = sorted(
            s
            for k in range(7)
            for n in (-2, -1, 0)
            if -3 < (s := 4.0 * (k / 7.0 - t0 + n)) < -1
        )
        want, _ = quad(integrand, -3.0, -1.0, points=breaks, limit=200)
        assert coarse[3, 0] == pytest.approx(want, abs=1e-12)

        fixed = functional(QuadratureSpec("gauss_legendre", 60))
        assert np.abs(fixed - fine).max() > 1e-9

    def test_window_validation(self):
        kern = lambda s, xv, yv: xv
        with pytest.raises(ValueError):
            kernel_integral(kern, -1.0, -3.0)
        with pytest.raises(ValueError):
            kernel_integral(kern, -1.0, 0.5)

    def test_period_shorter_than_delay_raises(self):
        exact = quadratic_exact(GAMMA)
        acc = accessor_from_functions(
            [0.0], lambda t: exact(t)[0], lambda t: exact(t)[1]
        )
        f = kernel_integral(lambda s, xv, yv: xv, -3.0, -1.0, needs=("x",))
        with pytest.raises(DelayExceedsPeriodError):
            f(acc, 2.5)

    def test_sigma_only_kernel_broadcasts(self):
        exact = quadratic_exact(GAMMA)
        acc = accessor_from_functions(
            [0.0, 0.5], lambda t: exact(t)[0], lambda t: exact(t)[1]
        )
        f = kernel_integral(lambda s, xv, yv: s, -2.0, -1.0,
                            QuadratureSpec("gauss_legendre", 8), needs=())
        np.testing.assert_allclose(f(acc, 4.0), -1.5, atol=1e-13)


class TestCoupledSystemValidation:
    def test_rejects_bad_dimensions_and_tau(self):
        rhs = lambda acc, omega: None
        with pytest.raises(ValueError):
            CoupledSystem(d_x=0, d_y=1, tau=1.0, rhs_F=rhs, rhs_G=rhs)
        with pytest.raises(ValueError):
            CoupledSystem(d_x=1, d_y=1, tau=-2.0, rhs_F=rhs, rhs_G=rhs)
        with pytest.raises(ValueError):
            CoupledSystem(d_x=1, d_y=1, tau=float("inf"), rhs_F=rhs, rhs_G=rhs)


class TestPhaseConditions:
    def make_solution(self):
        exact = quadratic_exact(GAMMA)
        grid = build_grid(10, make_abscissae("gauss_legendre", 3))
        return restrict_reference(exact, grid)

    def test_anchor_phase_reads_value_at_zero(self):
        sol = self.make_solution()
        target = 0.25
        r = phase_residual(AnchorPhase(which="x", target=target), sol)
        assert r == pytest.approx(sol.mu.values[0, 0] - target, abs=1e-15)

    def test_anchor_phase_y_component(self):
        sol = self.make_solution()
        r = phase_residual(AnchorPhase(which="y", target=0.0), sol)
        assert r == pytest.approx(sol.nu.values[0, 0], abs=1e-15)

    def test_anchor_phase_validates_which_and_component(self):
        with pytest.raises(ValueError):
            AnchorPhase(which="z")
        sol = self.make_solution()
        with pytest.raises(ValueError):
            phase_residual(AnchorPhase(which="x", component=3), sol)

    def test_integral_phase_vanishes_at_its_reference(self):
        # the orbital condition integral(<v, v_ref'>) is (1/2) d/ds |v|^2
        # integrated over the period when v = v_ref, hence ~0
        sol = self.make_solution()
        r = phase_residual(IntegralPhase(reference=sol), sol)
        assert abs(r) < 1e-12

    def test_integral_phase_detects_time_shift(self):
        exact = quadratic_exact(GAMMA)
        grid = build_grid(10, make_abscissae("gauss_legendre", 3))
        ref = restrict_reference(exact, grid)
        x, y = exact(np.mod(grid.rep_nodes + 0.1, 1.0))
        shifted = solution_from_values(grid, x, y, exact.omega)
        assert abs(phase_residual(IntegralPhase(reference=ref), shifted)) > 1e-3

    def test_custom_phase_object(self):
        sol = self.make_solution()

        class Custom:
            def residual(self, s):
                return float(s.omega) - 4.0

        assert phase_residual(Custom(), sol) == pytest.approx(0.0, abs=1e-15)

    def test_unsupported_phase_raises(self):
        with pytest.raises(TypeError):
            phase_residual(42, self.make_solution())
