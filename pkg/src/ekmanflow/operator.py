"""Linearization around the Ekman spiral and its spectral bound.

The linearized evolution of a perturbation v is driven by

    A v = P(nu_h Lap_H v + nu_z d_z^2 v) - P(v_E . grad_H v + w(v) d_z v_E)
          - P(f v_perp)

with P the hydrostatic Helmholtz projection, plus the quadratic interaction
F(v, v') = P(v . grad_H v' + w(v) d_z v'). The decay rate of the nonlinear
problem is the spectral bound omega_0 = sup Re sigma(A), estimated here
matrix-free: run the linear time stepper over a horizon T to get the
propagator Phi ~ exp(T A), apply Arnoldi iteration to Phi, and read off
omega_0 = ln|lambda_max| / T from the dominant Ritz value. This targets the
rightmost part of the spectrum directly, since the slowest-decaying modes of
A dominate the modulus of Phi.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import chebyshev as cheb
from .field import (
    Field,
    Grid,
    PHYSICAL,
    SPECTRAL,
    dealias,
    diff,
    fractional_h32_norm,
    inner,
    l2_norm,
    random_field,
    scalar_to_physical,
    sobolev_norm,
)
from .hydrostatics import project, reconstruct_w
from .model import EkmanSolution, PhysicalParams, ekman_coefficients


class BoundaryConditionWarning(UserWarning):
    """Input field violates the linearization's boundary conditions."""


@dataclass
class LinearizedOp:
    """Operator data: parameters, spiral, and profiles sampled on the grid."""

    params: PhysicalParams
    ekman: EkmanSolution
    grid: Grid
    v_profile: np.ndarray      # v_E on the Lobatto points, shape (2, n_z+1)
    shear_profile: np.ndarray  # d_z v_E on the Lobatto points, shape (2, n_z+1)

    @classmethod
    def build(cls, params: PhysicalParams, grid: Grid) -> "LinearizedOp":
        ekman = ekman_coefficients(params)
        z = np.clip(grid.z, -params.h, 0.0)
        return cls(params=params, ekman=ekman, grid=grid,
                   v_profile=ekman.profile(z), shear_profile=ekman.derivative(z))


def apply_F(v: Field, vp: Field) -> Field:
    """Quadratic interaction P(v . grad_H vp + w(v) d_z vp).

    Pseudo-spectral: derivatives in spectral space, products on the grid,
    then dealias and project.
    """
    g = v.grid
    sv = dealias(v)
    svp = dealias(vp)
    gx = diff(svp, "x").to_physical().data
    gy = diff(svp, "y").to_physical().data
    gz = diff(svp, "z").to_physical().data
    pv = sv.to_physical().data
    pw = scalar_to_physical(g, reconstruct_w(sv))
    out = pv[0] * gx + pv[1] * gy + pw * gz
    return project(dealias(Field(g, out, PHYSICAL)))


def boundary_residuals(v: Field) -> tuple[float, float]:
    """(max |d_z v| at the surface, max |v| at the bottom), physical values."""
    g = v.grid
    s = v.to_spectral()
    c = cheb.vals_to_coeffs(s.data, axis=-1)
    dc = cheb.deriv_coeffs(c, scale=g.dz_scale, axis=-1)
    shear_top = dc.sum(axis=-1)           # T_k(1) = 1
    bottom = s.data[:, :, :, -1]
    shear_phys = np.stack([scalar_to_physical(g, shear_top[i]) for i in range(2)])
    bottom_phys = np.stack([scalar_to_physical(g, bottom[i]) for i in range(2)])
    return (float(np.abs(shear_phys).max()), float(np.abs(bottom_phys).max()))


def apply_A(op: LinearizedOp, v: Field, check_bc: bool = True) -> Field:
    """Hydrostatic Ekman-Stokes operator applied to a field."""
    g = op.grid
    s = v.to_spectral()
    if check_bc:
        top, bot = boundary_residuals(s)
        scale = 1.0 + l2_norm(s)
        if max(top, bot) > 1e-8 * scale:
            warnings.warn(
                f"boundary residuals (d_z v at top {top:.2e}, v at bottom {bot:.2e}) "
                f"exceed 1e-8 * {scale:.2e}", BoundaryConditionWarning)

    c = cheb.vals_to_coeffs(s.data, axis=-1)
    d2 = cheb.deriv_coeffs(cheb.deriv_coeffs(c, scale=g.dz_scale), scale=g.dz_scale)
    dzz_vals = cheb.coeffs_to_vals(d2, axis=-1)
    diffusion = -op.params.nu_h * g.k2 * s.data + op.params.nu_z * dzz_vals

    vE1 = op.v_profile[0]
    vE2 = op.v_profile[1]
    ekman_adv = 1j * (g.kx_grad * vE1 + g.ky_grad * vE2) * s.data
    w = reconstruct_w(s)
    ekman_shear = w[None, :, :, :] * op.shear_profile[:, None, None, :]

    f = op.params.f
    coriolis = np.stack([-f * s.data[1], f * s.data[0]])

    out = diffusion - ekman_adv - ekman_shear - coriolis
    return project(Field(g, out, SPECTRAL))


def bilinear_ratio(v: Field, k: int) -> float:
    """Monitored ratio of ||F(v,v)|| against the interpolation bound, k in {0,1,2}.

    Finiteness under grid refinement is the check; the bound's constant is
    not asserted. Returns NaN for the zero field (0/0 undefined).
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    if l2_norm(v) == 0.0:
        return float("nan")
    F = apply_F(v, v)
    if k == 0:
        return l2_norm(F) / fractional_h32_norm(v) ** 2
    denom = (sobolev_norm(v, k + 2) ** 0.5
             * sobolev_norm(v, k + 1)
             * sobolev_norm(v, k) ** 0.5)
    return sobolev_norm(F, k) / denom


@dataclass
class SpectralBoundResult:
    omega0: float
    dominant_modulus: float
    ritz_residual: float
    converged: bool
    complex_pair: bool
    horizon: float
    dt: float
    krylov_dim: int
    message: str = ""


def estimate_spectral_bound(op: LinearizedOp, horizon: float | None = None,
                            krylov_dim: int = 20, tol: float = 1e-6,
                            dt: float | None = None, seed: int = 0) -> SpectralBoundResult:
    """Arnoldi iteration on the linear propagator; omega_0 = ln|lambda|/horizon.

    The propagator is the linear stepper run over [0, horizon] with the
    quadratic terms switched off. One warm-up application shapes the random
    start vector before the Krylov loop. The Ritz residual reported is the
    standard Arnoldi bound ||Phi y - theta y|| / |theta|.
    """
    if horizon is None:
        horizon = 1.0 / abs(op.params.f)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if krylov_dim < 2:
        raise ValueError("krylov_dim must be >= 2")
    if dt is None:
        dt = horizon / 64.0

    from .solver import LinearPropagator

    prop = LinearPropagator(op, horizon, dt)
    start = project(random_field(op.grid, seed, amplitude=1.0, slope=1.0))
    start = prop(start)
    nrm = np.sqrt(inner(start, start))
    if nrm == 0.0:
        raise RuntimeError("propagator annihilated the start vector")
    basis = [start * (1.0 / nrm)]

    m = krylov_dim
    H = np.zeros((m + 1, m))
    k_eff = m
    for j in range(m):
        w = prop(basis[j])
        for i in range(j + 1):
            H[i, j] = inner(basis[i], w)
            w = w - H[i, j] * basis[i]
        for i in range(j + 1):  # one reorthogonalization pass
            c = inner(basis[i], w)
            H[i, j] += c
            w = w - c * basis[i]
        H[j + 1, j] = np.sqrt(max(inner(w, w), 0.0))
        if H[j + 1, j] < 1e-13:
            k_eff = j + 1
            break
        basis.append(w * (1.0 / H[j + 1, j]))

    Hk = H[:k_eff, :k_eff]
    evals, evecs = np.linalg.eig(Hk)
    idx = int(np.argmax(np.abs(evals)))
    theta = evals[idx]
    y = evecs[:, idx]
    if k_eff < m:
        residual = 0.0
    else:
        residual = float(abs(H[m, m - 1]) * abs(y[-1]) / max(abs(theta), 1e-300))
    lam = float(abs(theta))
    omega0 = float(np.log(max(lam, 1e-300)) / prop.horizon)
    converged = residual <= tol
    complex_pair = bool(abs(theta.imag) > 1e-12 * max(abs(theta), 1e-300))
    message = ""
    if not converged:
        message = f"not converged: Ritz residual {residual:.3e} > tol {tol:.1e}"
    elif omega0 >= 0.0:
        message = "unstable regime detected: omega_0 >= 0"
    return SpectralBoundResult(
        omega0=omega0, dominant_modulus=lam, ritz_residual=residual,
        converged=converged, complex_pair=complex_pair,
        horizon=prop.horizon, dt=prop.dt, krylov_dim=k_eff, message=message)
