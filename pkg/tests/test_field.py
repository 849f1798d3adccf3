import numpy as np
import pytest

from ekmanflow.field import (
    Field,
    Grid,
    PHYSICAL,
    SPECTRAL,
    dealias,
    diff,
    fractional_h32_norm,
    inner,
    l2_norm,
    lp_norm,
    random_field,
    sobolev_norm,
    transform,
    vertical_integral,
)


def sine_field(grid, ny_z=None):
    """(sin x, 0), z-independent, on the grid."""
    x = grid.x[:, None, None]
    data = np.zeros(grid.shape)
    data[0] = np.sin(x) * np.ones((1, grid.n_y, grid.n_z + 1))
    return Field(grid, data, PHYSICAL)


class TestGrid:
    def test_lobatto_endpoints(self, unit_grid):
        assert unit_grid.z[0] == 0.0
        assert unit_grid.z[-1] == pytest.approx(-unit_grid.h, abs=1e-15)

    def test_quadrature_weights_sum_to_depth(self, unit_grid):
        assert unit_grid.wz.sum() == pytest.approx(unit_grid.h, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            Grid(n_x=7, n_y=8, n_z=24, L_x=1, L_y=1, h=1)
        with pytest.raises(ValueError):
            Grid(n_x=8, n_y=8, n_z=8, L_x=1, L_y=1, h=1)


class TestTransform:
    def test_constant_field(self, unit_grid):
        fld = Field(unit_grid, np.full(unit_grid.shape, 3.25), PHYSICAL)
        s = fld.to_spectral()
        assert s.data[0, 0, 0, 0] == pytest.approx(3.25)
        off = s.data.copy()
        off[:, 0, 0, :] = 0.0
        assert np.abs(off).max() <= 1e-14

    def test_cosine_two_conjugate_modes(self, unit_grid):
        x = unit_grid.x[:, None, None]
        data = np.zeros(unit_grid.shape)
        data[0] = np.cos(2 * np.pi * x / unit_grid.L_x)
        s = Field(unit_grid, data, PHYSICAL).to_spectral()
        assert s.data[0, 1, 0, 0] == pytest.approx(0.5, abs=1e-13)
        assert s.data[0, -1, 0, 0] == pytest.approx(0.5, abs=1e-13)
        s.data[0, 1, 0, :] = 0.0
        s.data[0, -1, 0, :] = 0.0
        assert np.abs(s.data).max() <= 1e-13

    def test_round_trip(self, unit_grid):
        fld = random_field(unit_grid, seed=3, amplitude=1.0).to_physical()
        back = fld.to_spectral().to_physical()
        assert np.abs(back.data - fld.data).max() <= 1e-12 * np.abs(fld.data).max()

    def test_noop(self, unit_grid):
        fld = random_field(unit_grid, seed=3, amplitude=1.0)
        assert transform(fld, SPECTRAL) is fld


class TestDiff:
    def test_x_derivative_of_cosine(self, unit_grid):
        g = unit_grid
        x = g.x[:, None, None]
        data = np.zeros(g.shape)
        data[0] = np.cos(x) * np.ones((1, g.n_y, g.n_z + 1))
        d = diff(Field(g, data, PHYSICAL), "x").to_physical()
        assert np.abs(d.data[0] + np.sin(x)).max() <= 1e-10

    def test_z_derivative_polynomial_exact(self, unit_grid):
        g = unit_grid
        data = np.zeros(g.shape)
        data[0] = g.z**2
        d = diff(Field(g, data, PHYSICAL), "z")
        assert np.abs(d.data[0] - 2 * g.z).max() <= 1e-12

    def test_z_derivative_exponential(self):
        g = Grid(n_x=8, n_y=8, n_z=32, L_x=1.0, L_y=1.0, h=1.0)
        data = np.zeros(g.shape)
        data[:] = np.exp(g.z)
        d = diff(Field(g, data, PHYSICAL), "z")
        assert np.abs(d.data - np.exp(g.z)).max() <= 1e-10

    def test_commutes_with_transform(self, unit_grid):
        v = random_field(unit_grid, seed=5, amplitude=1.0)
        a = diff(v.to_physical(), "z").to_spectral().data
        b = diff(v, "z").data
        assert np.abs(a - b).max() <= 1e-11 * (1 + np.abs(b).max())


class TestVerticalIntegral:
    def test_constant(self, unit_grid):
        g = unit_grid
        one = Field(g, np.ones(g.shape), PHYSICAL)
        full = vertical_integral(one, to="surface")
        assert np.abs(full - g.h).max() <= 1e-12 * g.h

    def test_polynomial_antiderivative(self, unit_grid):
        g = unit_grid
        data = np.zeros(g.shape)
        data[0] = 2 * g.z
        cum = vertical_integral(Field(g, data, PHYSICAL), to="z")
        expect = g.z**2 - g.h**2
        assert np.abs(cum.data[0] - expect).max() <= 1e-13

    def test_exponential_antiderivative(self):
        g = Grid(n_x=8, n_y=8, n_z=32, L_x=1.0, L_y=1.0, h=1.0)
        data = np.zeros(g.shape)
        data[:] = np.exp(g.z)
        cum = vertical_integral(Field(g, data, PHYSICAL), to="z")
        expect = np.exp(g.z) - np.exp(-1.0)
        assert np.abs(cum.data - expect).max() <= 1e-10

    def test_vanishes_at_bottom(self, unit_grid):
        v = random_field(unit_grid, seed=9, amplitude=2.0)
        cum = vertical_integral(v, to="z")
        assert np.abs(cum.data[..., -1]).max() <= 1e-13


class TestNorms:
    def test_l2_of_sine(self, unit_grid):
        fld = sine_field(unit_grid)
        assert l2_norm(fld) == pytest.approx(np.pi * np.sqrt(2.0), rel=1e-12)
        assert sobolev_norm(fld, 0) == pytest.approx(np.pi * np.sqrt(2.0), rel=1e-12)

    def test_h1_of_sine(self, unit_grid):
        fld = sine_field(unit_grid)
        assert sobolev_norm(fld, 1) ** 2 == pytest.approx(4 * np.pi**2, rel=1e-12)

    def test_h2_random_polynomial_vs_dense_quadrature(self, unit_grid):
        from oracles import DenseOps

        g = unit_grid
        rng = np.random.default_rng(0)
        x, y, z = g.x[:, None, None], g.y[None, :, None], g.z[None, None, :]
        data = np.zeros(g.shape)
        for comp in range(2):
            c = rng.normal(size=5)
            data[comp] = (c[0] + c[1] * np.sin(x) + c[2] * np.cos(y)
                          + c[3] * np.sin(x) * np.cos(y)) * (z**2 + c[4] * z)
        fld = Field(g, data, PHYSICAL)
        ops = DenseOps(g.n_x, g.n_y, g.n_z, g.L_x, g.L_y, g.h)
        total = 0.0
        derivs = {(0, 0, 0): data}
        for _ in range(2):
            new = {}
            for (a1, a2, a3), arr in derivs.items():
                new[(a1 + 1, a2, a3)] = ops.dx(arr)
                new[(a1, a2 + 1, a3)] = ops.dy(arr)
                new[(a1, a2, a3 + 1)] = ops.dz(arr)
            derivs.update(new)
        seen = set()
        for (a1, a2, a3) in derivs:
            if (a1, a2, a3) in seen or a1 + a2 + a3 > 2:
                continue
            seen.add((a1, a2, a3))
            total += ops.volume_integral(derivs[(a1, a2, a3)] ** 2)
        assert sobolev_norm(fld, 2) == pytest.approx(np.sqrt(total), rel=1e-10)

    def test_h32_definitional(self, unit_grid):
        v = random_field(unit_grid, seed=1, amplitude=1.0)
        expect = np.sqrt(sobolev_norm(v, 1) * sobolev_norm(v, 2))
        assert fractional_h32_norm(v) == pytest.approx(expect, rel=1e-14)
        assert fractional_h32_norm(Field.zeros(unit_grid)) == 0.0

    def test_unsupported_order(self, unit_grid):
        with pytest.raises(ValueError, match="supported"):
            sobolev_norm(Field.zeros(unit_grid), 5)

    def test_lp_constant(self, unit_grid):
        g = unit_grid
        c = 1.5
        vol = g.L_x * g.L_y * g.h
        fld = Field(g, np.full(g.shape, c), PHYSICAL)
        # both components equal c: magnitude is c*sqrt(2)
        mag = c * np.sqrt(2)
        assert lp_norm(fld, 2) == pytest.approx(mag * np.sqrt(vol), rel=1e-12)
        assert lp_norm(fld, 4) == pytest.approx(mag * vol**0.25, rel=1e-12)
        assert lp_norm(fld, np.inf) == pytest.approx(mag, rel=1e-14)

    def test_l4_of_sine(self, unit_grid):
        fld = sine_field(unit_grid)
        # int sin^4 over [0,2pi) = 3pi/4; times L_y = 2pi and h = 1
        expect = (0.75 * np.pi * 2 * np.pi) ** 0.25
        assert lp_norm(fld, 4) == pytest.approx(expect, rel=1e-12)

    def test_zero_field(self, unit_grid):
        z = Field.zeros(unit_grid, PHYSICAL)
        for p in (2, 4, np.inf):
            assert lp_norm(z, p) == 0.0

    def test_parseval(self, unit_grid):
        v = random_field(unit_grid, seed=11, amplitude=1.0)
        a = l2_norm(v.to_physical())
        b = l2_norm(v)
        assert a == pytest.approx(b, rel=1e-11)

    def test_inner_consistent_with_norm(self, unit_grid):
        v = random_field(unit_grid, seed=12, amplitude=1.0)
        assert inner(v, v) == pytest.approx(l2_norm(v) ** 2, rel=1e-12)


class TestDealias:
    def test_low_modes_unchanged(self, unit_grid):
        g = unit_grid
        x = g.x[:, None, None]
        data = np.zeros(g.shape)
        data[0] = np.sin(2 * x)
        fld = Field(g, data, PHYSICAL)
        out = dealias(fld).to_physical()
        assert np.abs(out.data - data).max() <= 1e-13

    def test_nyquist_mode_zeroed(self, unit_grid):
        g = unit_grid
        s = Field.zeros(g, SPECTRAL)
        s.data[0, g.n_x // 2, 0, :] = 1.0
        out = dealias(s)
        assert np.abs(out.data).max() == 0.0

    def test_idempotent(self, unit_grid):
        v = random_field(unit_grid, seed=7, amplitude=1.0)
        once = dealias(v)
        twice = dealias(once)
        assert np.array_equal(once.data, twice.data)


class TestRandomField:
    def test_deterministic(self, unit_grid):
        a = random_field(unit_grid, seed=42, amplitude=1.0)
        b = random_field(unit_grid, seed=42, amplitude=1.0)
        assert np.array_equal(a.data, b.data)

    def test_zero_amplitude(self, unit_grid):
        v = random_field(unit_grid, seed=1, amplitude=0.0)
        assert np.abs(v.data).max() == 0.0

    def test_boundary_structure(self, unit_grid):
        amp = 2.0
        v = random_field(unit_grid, seed=5, amplitude=amp)
        assert np.abs(v.data[..., -1]).max() <= 1e-14 * amp
        dz = diff(v, "z")
        assert np.abs(dz.data[..., 0]).max() <= 1e-10 * amp

    def test_amplitude_is_peak_speed(self, unit_grid):
        v = random_field(unit_grid, seed=6, amplitude=0.7)
        assert lp_norm(v, np.inf) == pytest.approx(0.7, rel=1e-12)

    def test_physical_values_real(self, unit_grid):
        v = random_field(unit_grid, seed=8, amplitude=1.0)
        n = unit_grid.n_x * unit_grid.n_y
        raw = np.fft.ifft2(v.data * n, axes=(1, 2))
        assert np.abs(raw.imag).max() <= 1e-12 * np.abs(raw.real).max()


def test_spectral_convergence_beats_algebraic():
    """H^2 error of (e^z sin x, 0) vs the closed form collapses superalgebraically."""
    closed = np.sqrt(12 * np.pi**2 * (1 - np.exp(-2)) / 2)
    errors = []
    sizes = [16, 24, 32, 48]
    for n_z in sizes:
        g = Grid(n_x=16, n_y=8, n_z=n_z, L_x=2 * np.pi, L_y=2 * np.pi, h=1.0)
        data = np.zeros(g.shape)
        data[0] = np.sin(g.x)[:, None, None] * np.exp(g.z)[None, None, :]
        errors.append(abs(sobolev_norm(Field(g, data, PHYSICAL), 2) - closed))
    # local algebraic order between consecutive sizes must keep increasing
    orders = [np.log(errors[i] / errors[i + 1]) / np.log(sizes[i + 1] / sizes[i])
              for i in range(2)]
    assert errors[-1] <= 1e-9 * closed
    assert errors[0] / max(errors[-1], 1e-300) > 1e4 or errors[0] <= 1e-12
    assert orders[1] > orders[0] or errors[2] <= 1e-12
