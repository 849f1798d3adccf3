"""Structural operators of the hydrostatic setting.

Because the pressure is independent of z, incompressibility constrains only
the vertical average of the horizontal velocity: div_H of the barotropic
mode must vanish. This module provides the barotropic/baroclinic split, the
vertical velocity reconstructed from horizontal divergence, the hydrostatic
Helmholtz projection onto fields with divergence-free average, and a
diagnostic recovery of the surface pressure from the velocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chebyshev as cheb
from .field import (
    Field,
    Grid,
    SPECTRAL,
    dealias,
    l2_norm,
    scalar_to_physical,
    vertical_integral,
)
from .model import PhysicalParams


@dataclass
class BarotropicField:
    """Vertical average of a field: per-mode complex values, shape (2, n_x, n_y)."""

    grid: Grid
    data: np.ndarray

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.data) ** 2) * self.grid.L_x * self.grid.L_y))

    def divergence(self) -> np.ndarray:
        """Per-mode horizontal divergence, shape (n_x, n_y)."""
        g = self.grid
        return 1j * (g.kx_grad[:, :, 0] * self.data[0]
                     + g.ky_grad[:, :, 0] * self.data[1])

    def divergence_l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.divergence()) ** 2) * self.grid.L_x * self.grid.L_y))

    def grad_l2(self) -> float:
        """L^2(T^2) norm of the horizontal gradient of the average."""
        g = self.grid
        k2 = g.k2[:, :, 0]
        return float(np.sqrt(np.sum(k2 * np.abs(self.data) ** 2) * g.L_x * g.L_y))


def vertical_average(v: Field) -> BarotropicField:
    s = v.to_spectral()
    avg = np.tensordot(s.data, v.grid.wz, axes=([-1], [0])) / v.grid.h
    return BarotropicField(v.grid, avg)


def baroclinic_part(v: Field) -> Field:
    s = v.to_spectral()
    avg = vertical_average(s).data
    return Field(v.grid, s.data - avg[..., None], SPECTRAL)


def reconstruct_w(v: Field) -> np.ndarray:
    """Vertical velocity w = -int_{-h}^{z} div_H v, spectral, shape (n_x, n_y, n_z+1).

    w vanishes at the bottom by construction; w at the surface equals
    -h * div_H(vbar) and vanishes iff the barotropic constraint holds.
    """
    g = v.grid
    s = v.to_spectral()
    divh = 1j * (g.kx_grad * s.data[0] + g.ky_grad * s.data[1])
    c = cheb.vals_to_coeffs(divh, axis=-1)
    return -cheb.cumint_vals(c, scale=g.h / 2.0, axis=-1)


def project(v: Field) -> Field:
    """Hydrostatic Helmholtz projection: remove the gradient part of the average.

    Per horizontal mode k != 0 subtracts (k . vbar_k) k / |k|^2, a
    z-independent correction; the (0,0) mode is untouched. Idempotent, and
    the removed part is orthogonal to the result.
    """
    s = v.to_spectral()
    corr = _gradient_correction(s)
    return Field(v.grid, s.data - corr[..., None], SPECTRAL)


def project_keep_bc(v: Field) -> Field:
    """Projection variant that preserves v(-h) = 0 and d_z v(0) = 0.

    The plain projection adds a z-independent correction, which breaks the
    bottom Dirichlet condition. Here the same per-mode correction is applied
    with a z profile of unit vertical average that vanishes at the bottom
    and has zero slope at the surface, so the constraint is enforced without
    disturbing the boundary conditions.
    """
    g = v.grid
    s = v.to_spectral()
    corr = _gradient_correction(s)
    zh = g.z + g.h
    psi = 6.0 * zh**2 / g.h**2 - 4.0 * zh**3 / g.h**3
    return Field(g, s.data - corr[..., None] * psi, SPECTRAL)


def _gradient_correction(s: Field) -> np.ndarray:
    """Per-mode gradient part of the barotropic mode, shape (2, n_x, n_y)."""
    g = s.grid
    avg = vertical_average(s).data
    kx, ky = g.kx_grad[:, :, 0], g.ky_grad[:, :, 0]
    k2 = g.k2_grad[:, :, 0].copy()
    degenerate = k2 == 0.0  # mean mode and Nyquist lines: nothing to remove
    k2[degenerate] = 1.0
    kdotv = kx * avg[0] + ky * avg[1]
    corr = np.stack([kx * kdotv, ky * kdotv]) / k2
    corr[:, degenerate] = 0.0
    return corr


@dataclass
class PressureField:
    """Diagnostic pressure: zero-mean surface part plus hydrostatic profile."""

    grid: Grid
    surface: np.ndarray  # physical (n_x, n_y), zero horizontal mean
    rho0: float
    g_accel: float

    def total(self) -> np.ndarray:
        """pi(x, y, z) = pi_s(x, y) - rho0 * g * z on the grid."""
        return self.surface[:, :, None] - self.rho0 * self.g_accel * self.grid.z


def recover_pressure(v: Field, params: PhysicalParams) -> PressureField:
    """Surface pressure from the velocity via a per-mode Poisson solve.

    Solves Delta_H pi_s = rho0 * ( -(nu_z/h) div_H(d_z v at bottom)
    + (1/h) div_H int_{-h}^0 (v . grad_H v - v div_H v) ) with the zero-mean
    gauge. Rejects input whose barotropic divergence is not numerically zero;
    the time stepper enforces the constraint by projection, so this is a
    diagnostic, not part of the evolution.
    """
    g = v.grid
    s = v.to_spectral()
    bar = vertical_average(s)
    if bar.divergence_l2() > 1e-8 * (1.0 + l2_norm(s)):
        raise ValueError("recover_pressure requires a projected field "
                         f"(barotropic divergence {bar.divergence_l2():.3e})")

    from .field import diff  # local import to keep module load cheap

    dzv = diff(s, "z")
    shear_bottom = dzv.data[:, :, :, -1]  # spectral (2, n_x, n_y) at z = -h

    phys = s.to_physical()
    vx = diff(s, "x").to_physical().data
    vy = diff(s, "y").to_physical().data
    divh = vx[0] + vy[1]
    adv = np.empty_like(phys.data)
    for i in range(2):
        adv[i] = phys.data[0] * vx[i] + phys.data[1] * vy[i] - phys.data[i] * divh
    integ = vertical_integral(dealias(Field(g, adv, "physical")), to="surface")

    kx, ky = g.kx_grad[:, :, 0], g.ky_grad[:, :, 0]
    rhs = params.rho0 * (
        -(params.nu_z / g.h) * 1j * (kx * shear_bottom[0] + ky * shear_bottom[1])
        + (1.0 / g.h) * 1j * (kx * integ[0] + ky * integ[1])
    )
    k2 = g.k2_grad[:, :, 0].copy()
    degenerate = k2 == 0.0
    k2[degenerate] = 1.0
    pi_hat = -rhs / k2
    pi_hat[degenerate] = 0.0
    surface = scalar_to_physical(g, pi_hat)
    return PressureField(grid=g, surface=surface, rho0=params.rho0, g_accel=params.g)


def momentum_residual(v: Field, params: PhysicalParams, pres: PressureField) -> float:
    """Defect of the recovered pressure in the averaged momentum balance.

    Measures || Delta_H pi_s - div_H of rho0 * ( -avg(v.grad_H v + w d_z v)
    - f vbar_perp + (nu_z/h)(d_z v at top - d_z v at bottom) ) ||_{L^2(T^2)},
    normalized. A nonzero value quantifies how far the recovery formula is
    from the full balance (it omits the Coriolis term and averages the
    advection with the opposite sign on the divergence part).
    """
    from .field import diff, scalar_to_spectral

    g = v.grid
    s = v.to_spectral()
    phys = s.to_physical()
    vx = diff(s, "x").to_physical().data
    vy = diff(s, "y").to_physical().data
    dzv = diff(s, "z")
    w_phys = scalar_to_physical(g, reconstruct_w(s))
    dzp = dzv.to_physical().data
    adv = np.stack([
        phys.data[0] * vx[i] + phys.data[1] * vy[i] + w_phys * dzp[i]
        for i in range(2)
    ])
    avg_adv = vertical_integral(Field(g, adv, "physical"), to="surface") / g.h

    bar = vertical_average(s).data
    bar_perp = np.stack([-bar[1], bar[0]])
    shear_top = dzv.data[:, :, :, 0]
    shear_bottom = dzv.data[:, :, :, -1]

    forcing = -np.stack([scalar_to_spectral(g, avg_adv[i]) for i in range(2)])
    forcing = forcing - params.f * bar_perp \
        + (params.nu_z / g.h) * (shear_top - shear_bottom)
    forcing *= params.rho0

    kx, ky = g.kx_grad[:, :, 0], g.ky_grad[:, :, 0]
    div_forcing = 1j * (kx * forcing[0] + ky * forcing[1])
    pi_hat = scalar_to_spectral(g, pres.surface)
    lap_pi = -g.k2_grad[:, :, 0] * pi_hat
    resid = lap_pi - div_forcing
    resid[g.k2_grad[:, :, 0] == 0.0] = 0.0
    num = float(np.sqrt(np.sum(np.abs(resid) ** 2) * g.L_x * g.L_y))
    den = 1.0 + float(np.sqrt(np.sum(np.abs(lap_pi) ** 2) * g.L_x * g.L_y))
    return num / den
