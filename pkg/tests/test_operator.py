import numpy as np
import pytest

from ekmanflow.field import Field, Grid, PHYSICAL, SPECTRAL, inner, l2_norm, random_field
from ekmanflow.hydrostatics import project, project_keep_bc
from ekmanflow.model import PhysicalParams
from ekmanflow.operator import (
    BoundaryConditionWarning,
    LinearizedOp,
    apply_A,
    apply_F,
    bilinear_ratio,
    boundary_residuals,
    estimate_spectral_bound,
)

from conftest import scaled_stable_params
from oracles import DenseOps, diffusion_spectral_bound


def low_mode_field(grid, seed, bc=True, n_modes=2):
    """Random field supported on |m| <= n_modes (alias-free products)."""
    rng = np.random.default_rng(seed)
    s = Field.zeros(grid, SPECTRAL)
    zh = (grid.z + grid.h) / grid.h
    prof = zh**2 * (3 - 2 * zh) if bc else np.ones_like(zh)  # flat slope at z=0
    prof2 = zh**2 * (1 - zh) ** 2
    for mx in range(-n_modes, n_modes + 1):
        for my in range(-n_modes, n_modes + 1):
            amp = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
            s.data[:, mx, my, :] += amp[:, :1] * prof + amp[:, 1:] * prof2
    # symmetrize for real physical values
    ix = (-np.arange(grid.n_x)) % grid.n_x
    iy = (-np.arange(grid.n_y)) % grid.n_y
    s.data = 0.5 * (s.data + np.conj(s.data[:, ix][:, :, iy]))
    return s


class TestApplyF:
    def test_constant_field_gives_zero(self, unit_grid):
        fld = Field(unit_grid, np.full(unit_grid.shape, 1.7), PHYSICAL)
        out = apply_F(fld, fld)
        assert np.abs(out.data).max() <= 1e-13

    def test_closed_form_single_mode(self):
        g = Grid(n_x=16, n_y=16, n_z=16, L_x=2 * np.pi, L_y=2 * np.pi, h=1.0)
        x, z = g.x[:, None, None], g.z[None, None, :]
        data = np.zeros(g.shape)
        data[0] = np.sin(x) * (z + g.h) ** 2
        v = Field(g, data, PHYSICAL)
        out = apply_F(v, v).to_physical()
        expect = np.sin(x) * np.cos(x) * ((z + g.h) ** 4 / 3.0 - g.h**4 / 15.0)
        assert np.abs(out.data[0] - expect).max() <= 1e-12
        assert np.abs(out.data[1]).max() <= 1e-13

    def test_matches_dense_oracle(self):
        g = Grid(n_x=16, n_y=16, n_z=16, L_x=2 * np.pi, L_y=2 * np.pi, h=1.0)
        v = low_mode_field(g, 1)
        vp = low_mode_field(g, 2)
        ops = DenseOps(g.n_x, g.n_y, g.n_z, g.L_x, g.L_y, g.h)
        dense = ops.apply_F(v.to_physical().data, vp.to_physical().data)
        prod = apply_F(v, vp).to_physical().data
        scale = max(np.abs(dense).max(), 1e-300)
        assert np.abs(dense - prod).max() <= 1e-6 * scale

    @pytest.mark.parametrize("seed", range(5))
    def test_energy_cancellation(self, unit_grid, seed):
        v = project_keep_bc(low_mode_field(unit_grid, 30 + seed))
        F = apply_F(v, v)
        assert abs(inner(F, v)) <= 1e-9 * l2_norm(v) ** 3

    def test_bilinear_in_each_slot(self, unit_grid):
        a, b = 0.6, -1.1
        u = low_mode_field(unit_grid, 5)
        v = low_mode_field(unit_grid, 6)
        w = low_mode_field(unit_grid, 7)
        lhs = apply_F(u, a * v + b * w).data
        rhs = (a * apply_F(u, v) + b * apply_F(u, w)).data
        assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + np.abs(rhs).max())
        lhs2 = apply_F(a * u + b * v, w).data
        rhs2 = (a * apply_F(u, w) + b * apply_F(v, w)).data
        assert np.abs(lhs2 - rhs2).max() <= 1e-11 * (1 + np.abs(rhs2).max())


class TestApplyA:
    def test_diffusion_on_barotropic_mode(self, quiet_params):
        g = Grid(n_x=16, n_y=16, n_z=24, L_x=quiet_params.L_x,
                 L_y=quiet_params.L_y, h=quiet_params.h)
        op = LinearizedOp.build(quiet_params, g)
        data = np.zeros(g.shape)
        data[1] = np.cos(g.x)[:, None, None]  # divergence-free, z-independent
        v = Field(g, data, PHYSICAL)
        out = apply_A(op, v, check_bc=False).to_physical()
        expect = -quiet_params.nu_h * 1.0 * data  # |k|^2 = 1 on this box
        assert np.abs(out.data - expect).max() <= 1e-11

    def test_boundary_warning(self, quiet_params):
        g = Grid(n_x=16, n_y=16, n_z=24, L_x=quiet_params.L_x,
                 L_y=quiet_params.L_y, h=quiet_params.h)
        op = LinearizedOp.build(quiet_params, g)
        data = np.ones(g.shape)
        with pytest.warns(BoundaryConditionWarning):
            apply_A(op, Field(g, data, PHYSICAL))

    def test_matches_dense_oracle(self, box_params):
        g = Grid(n_x=12, n_y=12, n_z=16, L_x=box_params.L_x,
                 L_y=box_params.L_y, h=box_params.h)
        op = LinearizedOp.build(box_params, g)
        v = project_keep_bc(low_mode_field(g, 3))
        ops = DenseOps(g.n_x, g.n_y, g.n_z, g.L_x, g.L_y, g.h)
        dense = ops.apply_A(v.to_physical().data, box_params,
                            op.v_profile, op.shear_profile)
        prod = apply_A(op, v).to_physical().data
        scale = max(np.abs(dense).max(), 1e-300)
        assert np.abs(dense - prod).max() <= 1e-6 * scale

    def test_linearity(self, box_params, small_grid):
        op = LinearizedOp.build(box_params, small_grid)
        u = project_keep_bc(low_mode_field(small_grid, 8))
        v = project_keep_bc(low_mode_field(small_grid, 9))
        lhs = apply_A(op, u + v, check_bc=False).data
        rhs = (apply_A(op, u, check_bc=False) + apply_A(op, v, check_bc=False)).data
        assert np.abs(lhs - rhs).max() <= 1e-11 * (1 + np.abs(rhs).max())

    @pytest.mark.parametrize("seed", range(10))
    def test_energy_form_negative_in_stable_regime(self, box_params, small_grid, seed):
        op = LinearizedOp.build(box_params, small_grid)
        v = project_keep_bc(random_field(small_grid, 200 + seed, amplitude=1.0))
        Av = apply_A(op, v)
        assert inner(Av, v) < 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_rotation_is_skew(self, box_params, small_grid, seed):
        g = small_grid
        v = project(random_field(g, 300 + seed, amplitude=1.0))
        perp = Field(g, np.stack([-v.data[1], v.data[0]]), SPECTRAL)
        rotation = project(perp) * box_params.f
        assert abs(inner(rotation, v)) <= 1e-10 * abs(box_params.f) * l2_norm(v) ** 2


class TestBilinearRatio:
    def test_zero_field_undefined(self, unit_grid):
        assert np.isnan(bilinear_ratio(Field.zeros(unit_grid), 0))

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_scale_invariance(self, unit_grid, k):
        v = project_keep_bc(low_mode_field(unit_grid, 77))
        r1 = bilinear_ratio(v, k)
        r2 = bilinear_ratio(2.0 * v, k)
        assert abs(r2 - r1) <= 1e-11 * abs(r1)

    def test_refinement_stability(self, box_params):
        vals = []
        for n_z in (24, 32, 48):
            g = Grid(n_x=16, n_y=16, n_z=n_z, L_x=box_params.L_x,
                     L_y=box_params.L_y, h=box_params.h)
            x, y, z = g.x[:, None, None], g.y[None, :, None], g.z[None, None, :]
            zh = (z + g.h) / g.h
            data = np.zeros(g.shape)
            data[0] = np.sin(x) * np.cos(y) * zh**2 * (3 - 2 * zh)
            data[1] = np.cos(x) * zh**2 * (1 - zh)
            vals.append(bilinear_ratio(Field(g, data, PHYSICAL), 1))
        spread = (max(vals) - min(vals)) / min(vals)
        assert spread < 0.05

    def test_invalid_k(self, unit_grid):
        with pytest.raises(ValueError):
            bilinear_ratio(Field.zeros(unit_grid), 3)


class TestSpectralBound:
    def test_matches_diffusion_oracle(self, quiet_params):
        p = quiet_params
        params = PhysicalParams(nu_h=1.0, nu_z=p.nu_z, f=p.f, rho0=p.rho0,
                                g=p.g, h=p.h, tau=(0.0, 0.0), v_g=(0.0, 0.0),
                                L_x=p.L_x, L_y=p.L_y)
        g = Grid(n_x=8, n_y=8, n_z=24, L_x=params.L_x, L_y=params.L_y, h=params.h)
        op = LinearizedOp.build(params, g)
        res = estimate_spectral_bound(op, horizon=3.0, krylov_dim=20,
                                      tol=1e-6, dt=0.01, seed=0)
        oracle = diffusion_spectral_bound(params, g)
        assert res.converged, res.message
        assert res.omega0 < 0
        assert abs(res.omega0 - oracle) <= 1e-4 * abs(oracle)

    def test_horizon_consistency(self, quiet_params):
        params = PhysicalParams(nu_h=1.0, nu_z=quiet_params.nu_z, f=quiet_params.f,
                                rho0=quiet_params.rho0, g=quiet_params.g,
                                h=quiet_params.h, tau=(0.0, 0.0), v_g=(0.0, 0.0),
                                L_x=quiet_params.L_x, L_y=quiet_params.L_y)
        g = Grid(n_x=8, n_y=8, n_z=16, L_x=params.L_x, L_y=params.L_y, h=params.h)
        op = LinearizedOp.build(params, g)
        tol = 1e-5
        r1 = estimate_spectral_bound(op, horizon=2.0, krylov_dim=24, tol=tol, dt=0.01)
        r2 = estimate_spectral_bound(op, horizon=4.0, krylov_dim=24, tol=tol, dt=0.01)
        assert r1.converged and r2.converged
        assert abs(r1.omega0 - r2.omega0) <= 2 * tol + 1e-4 * abs(r1.omega0)

    def test_wind_driven_stable_is_negative(self):
        params = scaled_stable_params(target_ce=0.5)
        g = Grid(n_x=8, n_y=8, n_z=24, L_x=params.L_x, L_y=params.L_y, h=params.h)
        op = LinearizedOp.build(params, g)
        res = estimate_spectral_bound(op, horizon=3.0, krylov_dim=20,
                                      tol=1e-6, dt=0.01, seed=1)
        assert res.converged, res.message
        assert res.omega0 < 0

    def test_usage_errors(self, quiet_params, small_grid):
        op = LinearizedOp.build(quiet_params, small_grid)
        with pytest.raises(ValueError, match="krylov"):
            estimate_spectral_bound(op, horizon=1.0, krylov_dim=1)
        with pytest.raises(ValueError, match="horizon"):
            estimate_spectral_bound(op, horizon=-1.0)


def test_boundary_residuals_on_compatible_field(unit_grid):
    v = project_keep_bc(random_field(unit_grid, 55, amplitude=1.0))
    top, bottom = boundary_residuals(v)
    assert top <= 1e-10 and bottom <= 1e-12
