import numpy as np
import pytest

from radialnls import (
    EquationParams,
    RadialField,
    apply_lap_gamma,
    build_grid,
    embed_field,
    gradient_norm_sq,
    integrate,
    solve_cn,
)
from radialnls.fields import random_smooth_field
from radialnls.radial_grid import inner_product


def gaussian_field(grid, width=1.0):
    return RadialField(grid, np.exp(-((grid.r / width) ** 2)).astype(complex))


class TestBuildGrid:
    def test_rejects_small_n(self):
        with pytest.raises(ValueError, match="n too small"):
            build_grid(4, 10.0)

    def test_rejects_bad_rmax(self):
        with pytest.raises(ValueError):
            build_grid(100, 0.5)
        with pytest.raises(ValueError):
            build_grid(100, -3.0)

    def test_node_layout(self):
        g = build_grid(100, 10.0)
        assert g.h == pytest.approx(0.1)
        assert g.r[0] == pytest.approx(0.05)
        assert g.r[99] == pytest.approx(9.95)
        assert np.allclose(np.diff(g.r), g.h)

    def test_fine_layout(self):
        g = build_grid(2048, 64.0)
        assert g.h == pytest.approx(0.03125)
        assert g.r[0] == pytest.approx(0.015625)
        assert g.r_max == pytest.approx(64.0)


class TestIntegrate:
    def test_zero(self, grid_small):
        assert integrate(grid_small, np.zeros(grid_small.n)) == 0.0

    def test_gaussian_closed_form(self):
        # int e^{-2r^2} dx = (pi/2)^{3/2}; staggered midpoint is
        # spectrally accurate for smooth even integrands
        g = build_grid(4096, 16.0)
        val = integrate(g, np.exp(-2.0 * g.r**2))
        assert val == pytest.approx((np.pi / 2.0) ** 1.5, rel=1e-6)

    def test_inverse_r_weight(self):
        # int e^{-2r^2}/r dx = 4 pi int r e^{-2r^2} dr = pi; the odd
        # integrand needs the finer spacing R_max=8 at n=4096 for 1e-6
        g = build_grid(4096, 8.0)
        val = integrate(g, np.exp(-2.0 * g.r**2) / g.r)
        assert val == pytest.approx(np.pi, rel=1e-6)

    def test_second_order_on_odd_integrand(self):
        vals = []
        for n in (2048, 4096):
            g = build_grid(n, 16.0)
            vals.append(integrate(g, np.exp(-2.0 * g.r**2) / g.r))
        err = [abs(v - np.pi) for v in vals]
        assert 3.0 < err[0] / err[1] < 5.0

    def test_rejects_nonfinite(self, grid_small):
        bad = np.zeros(grid_small.n)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            integrate(grid_small, bad)


class TestGradientNorm:
    def test_zero(self, grid_small):
        f = RadialField(grid_small, np.zeros(grid_small.n, dtype=complex))
        assert gradient_norm_sq(f) == 0.0

    def test_constant_boundary_only(self, grid_small):
        f = RadialField(grid_small, np.ones(grid_small.n, dtype=complex))
        # only the Dirichlet face at R_max contributes
        expected = 4.0 * np.pi * grid_small.r_max**2 / grid_small.h
        assert gradient_norm_sq(f) == pytest.approx(expected, rel=1e-12)

    def test_gaussian_closed_form(self):
        # oracle: 16 pi int r^4 e^{-2r^2} dr = (3/2) pi^{3/2} / sqrt(2)
        g = build_grid(4096, 16.0)
        exact = 1.5 * np.pi**1.5 / np.sqrt(2.0)
        assert gradient_norm_sq(gaussian_field(g)) == pytest.approx(exact, rel=1e-4)

    def test_second_order(self):
        exact = 1.5 * np.pi**1.5 / np.sqrt(2.0)
        errs = []
        for n in (2048, 4096):
            g = build_grid(n, 16.0)
            errs.append(abs(gradient_norm_sq(gaussian_field(g)) - exact))
        assert 3.0 < errs[0] / errs[1] < 5.0


class TestLapGamma:
    def test_zero(self, grid_small, params_default):
        f = RadialField(grid_small, np.zeros(grid_small.n, dtype=complex))
        out = apply_lap_gamma(f, params_default)
        assert np.all(out.values == 0.0)

    def test_quadratic_form_identity(self, grid_small, params_default, rng):
        # summation by parts: -<Lu, u> = ||grad u||^2 + int gamma r^-mu |u|^2
        for _ in range(5):
            f = random_smooth_field(grid_small, rng)
            lhs = -np.real(
                inner_product(grid_small, f.values, apply_lap_gamma(f, params_default).values)
            )
            pot = integrate(
                grid_small,
                params_default.gamma / grid_small.r**params_default.mu * np.abs(f.values) ** 2,
            )
            rhs = gradient_norm_sq(f) + pot
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_symmetry(self, grid_small, params_default, rng):
        u = random_smooth_field(grid_small, rng)
        v = random_smooth_field(grid_small, rng)
        lu = apply_lap_gamma(u, params_default).values
        lv = apply_lap_gamma(v, params_default).values
        a = inner_product(grid_small, lu, v.values)
        b = inner_product(grid_small, u.values, lv)
        assert a.real == pytest.approx(b.real, rel=1e-12, abs=1e-12)

    def test_negative_semidefinite(self, grid_small, params_default, rng):
        for _ in range(5):
            f = random_smooth_field(grid_small, rng)
            quad = -np.real(
                inner_product(grid_small, f.values, apply_lap_gamma(f, params_default).values)
            )
            assert quad >= 0.0

    def test_gaussian_node_value(self, params_default):
        # Delta_gamma e^{-r^2} at r = 1 is (4-6)/e - 1/e = -3/e, up to O(h^2)
        g = build_grid(4096, 16.0)
        f = gaussian_field(g)
        out = apply_lap_gamma(f, params_default)
        j = int(np.argmin(np.abs(g.r - 1.0)))
        expected = (4.0 * g.r[j] ** 2 - 6.0) * np.exp(-g.r[j] ** 2) - np.exp(
            -g.r[j] ** 2
        ) / g.r[j]
        assert out.values[j].real == pytest.approx(expected, abs=5e-4)


class TestSolveCN:
    def test_zero(self, grid_small, params_default):
        f = RadialField(grid_small, np.zeros(grid_small.n, dtype=complex))
        v = solve_cn(f, 1e-3, params_default)
        assert np.all(v.values == 0.0)

    def test_norm_preservation(self, grid_small, params_default, rng):
        f = random_smooth_field(grid_small, rng, complex_phase=True)
        m0 = integrate(grid_small, np.abs(f.values) ** 2)
        v = solve_cn(f, 1e-3, params_default)
        m1 = integrate(grid_small, np.abs(v.values) ** 2)
        assert m1 == pytest.approx(m0, rel=1e-12)

    def test_small_tau_identity(self, grid_small, params_default, rng):
        f = random_smooth_field(grid_small, rng)
        lap = apply_lap_gamma(f, params_default).values
        scale = np.sqrt(integrate(grid_small, np.abs(lap) ** 2))
        tau = 1e-9
        v = solve_cn(f, tau, params_default)
        diff = np.sqrt(integrate(grid_small, np.abs(v.values - f.values) ** 2))
        assert diff <= 2.0 * tau * scale

    def test_rejects_zero_tau(self, grid_small, params_default):
        f = RadialField(grid_small, np.zeros(grid_small.n, dtype=complex))
        with pytest.raises(ValueError):
            solve_cn(f, 0.0, params_default)


class TestFieldValidation:
    def test_wrong_length(self, grid_small):
        with pytest.raises(ValueError):
            RadialField(grid_small, np.zeros(3, dtype=complex))

    def test_nonfinite_rejected(self, grid_small):
        vals = np.zeros(grid_small.n, dtype=complex)
        vals[0] = np.inf
        with pytest.raises(ValueError):
            RadialField(grid_small, vals)


class TestEmbed:
    def test_zero_pad_same_h(self, grid_small):
        f = gaussian_field(grid_small)
        big = build_grid(2 * grid_small.n, 2 * grid_small.r_max)
        g = embed_field(f, big)
        assert np.allclose(g.values[: grid_small.n], f.values)
        assert np.all(g.values[grid_small.n :] == 0.0)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            EquationParams(gamma=-1.0, mu=1.0, omega=1.0)
        with pytest.raises(ValueError):
            EquationParams(gamma=1.0, mu=2.5, omega=1.0)
        with pytest.raises(ValueError):
            EquationParams(gamma=1.0, mu=1.0, omega=0.0)
        # gamma = 0 is the exact free-limit mode
        EquationParams(gamma=0.0, mu=1.0, omega=1.0)
