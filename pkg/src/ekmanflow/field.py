"""Two-component velocity fields on the periodic layer T^2 x (-h, 0).

Discretization: Fourier modes in x and y (uniform grid, numpy fft layout),
Chebyshev-Lobatto collocation in z. A Field stores both components in one
array of shape (2, n_x, n_y, n_z + 1) and lives either in physical space
(real values on the grid) or in horizontal spectral space (complex Fourier
coefficients per z level; coefficient of mode (0,0) equals the horizontal
mean). Vertical point 0 is the surface z = 0, point n_z is the bottom
z = -h.

All operations return new fields; nothing mutates in place.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from . import chebyshev as cheb

PHYSICAL = "physical"
SPECTRAL = "spectral"


def fft_workers() -> int:
    """Horizontal FFT thread cap, from PE_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("PE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Fourier x Chebyshev grid; caches wavenumbers, weights and masks."""

    n_x: int
    n_y: int
    n_z: int
    L_x: float
    L_y: float
    h: float

    def __post_init__(self):
        if self.n_x < 8 or self.n_x % 2 or self.n_y < 8 or self.n_y % 2:
            raise ValueError("n_x, n_y must be even and >= 8")
        if self.n_z < 16:
            raise ValueError("n_z must be >= 16")
        if min(self.L_x, self.L_y, self.h) <= 0:
            raise ValueError("L_x, L_y, h must be positive")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (2, self.n_x, self.n_y, self.n_z + 1)

    @cached_property
    def modes_x(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x)

    @cached_property
    def modes_y(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_y, d=1.0 / self.n_y)

    @cached_property
    def kx(self) -> np.ndarray:
        """Physical wavenumbers 2 pi m / L_x, broadcast shape (n_x, 1, 1)."""
        return (2.0 * np.pi * self.modes_x / self.L_x).reshape(-1, 1, 1)

    @cached_property
    def ky(self) -> np.ndarray:
        return (2.0 * np.pi * self.modes_y / self.L_y).reshape(1, -1, 1)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 per horizontal mode, shape (n_x, n_y, 1)."""
        return self.kx**2 + self.ky**2

    @cached_property
    def kx_grad(self) -> np.ndarray:
        """Wavenumbers for odd derivatives: the Nyquist line is zeroed, the
        standard convention keeping derivatives of real fields real."""
        k = self.kx.copy()
        k[self.n_x // 2] = 0.0
        return k

    @cached_property
    def ky_grad(self) -> np.ndarray:
        k = self.ky.copy()
        k[:, self.n_y // 2] = 0.0
        return k

    @cached_property
    def k2_grad(self) -> np.ndarray:
        """Squared gradient wavenumbers; vanishes where odd derivatives do."""
        return self.kx_grad**2 + self.ky_grad**2

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * (self.L_x / self.n_x)

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.n_y) * (self.L_y / self.n_y)

    @cached_property
    def z(self) -> np.ndarray:
        """Lobatto heights, z[0] = 0 (surface), z[n_z] = -h (bottom)."""
        return (cheb.lobatto_points(self.n_z) - 1.0) * (self.h / 2.0)

    @cached_property
    def wz(self) -> np.ndarray:
        """Vertical quadrature weights; sum to h."""
        return cheb.quad_weights(self.n_z) * (self.h / 2.0)

    @cached_property
    def cheb_moments(self) -> np.ndarray:
        """avg over (-h,0) of a coefficient array = sum(cheb_moments * c)."""
        return cheb.moment_vector(self.n_z) / 2.0

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        """2/3-rule mask over horizontal modes, shape (n_x, n_y, 1)."""
        ax = np.abs(self.modes_x) <= self.n_x / 3.0
        ay = np.abs(self.modes_y) <= self.n_y / 3.0
        return (ax[:, None] & ay[None, :])[:, :, None]

    @property
    def dz_scale(self) -> float:
        """Chain-rule factor d xi / d z for the map [-h,0] -> [-1,1]."""
        return 2.0 / self.h

    @property
    def cell_area(self) -> float:
        return (self.L_x / self.n_x) * (self.L_y / self.n_y)


@dataclass
class Field:
    """Velocity field snapshot on a Grid, in physical or spectral space."""

    grid: Grid
    data: np.ndarray
    space: str

    def __post_init__(self):
        if self.data.shape != self.grid.shape:
            raise ValueError(f"field shape {self.data.shape} != grid {self.grid.shape}")
        if self.space not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown space {self.space!r}")

    @classmethod
    def zeros(cls, grid: Grid, space: str = SPECTRAL) -> "Field":
        dtype = np.float64 if space == PHYSICAL else np.complex128
        return cls(grid, np.zeros(grid.shape, dtype=dtype), space)

    @classmethod
    def from_physical(cls, grid: Grid, data: np.ndarray) -> "Field":
        return cls(grid, np.asarray(data, dtype=np.float64), PHYSICAL)

    @classmethod
    def from_spectral(cls, grid: Grid, data: np.ndarray) -> "Field":
        return cls(grid, np.asarray(data, dtype=np.complex128), SPECTRAL)

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy(), self.space)

    def to_physical(self) -> "Field":
        return transform(self, PHYSICAL)

    def to_spectral(self) -> "Field":
        return transform(self, SPECTRAL)

    def __add__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return Field(self.grid, self.data + other.data, self.space)

    def __sub__(self, other: "Field") -> "Field":
        _check_compatible(self, other)
        return Field(self.grid, self.data - other.data, self.space)

    def __mul__(self, a: float) -> "Field":
        return Field(self.grid, self.data * a, self.space)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.data, self.space)


def _check_compatible(u: Field, v: Field):
    if u.grid is not v.grid and u.grid != v.grid:
        raise ValueError("fields on different grids")
    if u.space != v.space:
        raise ValueError(f"mixed representations {u.space}/{v.space}")


def transform(fld: Field, space: str) -> Field:
    """Horizontal FFT / inverse FFT per z level; no-op if already there."""
    if fld.space == space:
        return fld
    n = fld.grid.n_x * fld.grid.n_y
    if space == SPECTRAL:
        data = sfft.fft2(fld.data, axes=(1, 2), workers=fft_workers()) / n
        return Field(fld.grid, data, SPECTRAL)
    data = sfft.ifft2(fld.data * n, axes=(1, 2), workers=fft_workers())
    return Field(fld.grid, np.ascontiguousarray(data.real), PHYSICAL)


def scalar_to_physical(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """Inverse FFT of a per-mode scalar array (n_x, n_y, ...)."""
    n = grid.n_x * grid.n_y
    return sfft.ifft2(spec * n, axes=(0, 1), workers=fft_workers()).real


def scalar_to_spectral(grid: Grid, phys: np.ndarray) -> np.ndarray:
    n = grid.n_x * grid.n_y
    return sfft.fft2(phys.astype(complex), axes=(0, 1), workers=fft_workers()) / n


def diff(fld: Field, axis: str) -> Field:
    """Spectral derivative along 'x', 'y' (returns spectral) or 'z' (keeps space)."""
    g = fld.grid
    if axis in ("x", "y"):
        s = fld.to_spectral()
        ik = 1j * (g.kx_grad if axis == "x" else g.ky_grad)
        return Field(g, s.data * ik, SPECTRAL)
    if axis == "z":
        c = cheb.vals_to_coeffs(fld.data, axis=-1)
        dc = cheb.deriv_coeffs(c, scale=g.dz_scale, axis=-1)
        vals = cheb.coeffs_to_vals(dc, axis=-1)
        if fld.space == PHYSICAL:
            vals = vals.real
        return Field(g, vals, fld.space)
    raise ValueError(f"axis must be one of x, y, z, got {axis!r}")


def dzz(fld: Field) -> Field:
    """Second vertical derivative (one transform round trip)."""
    g = fld.grid
    c = cheb.vals_to_coeffs(fld.data, axis=-1)
    c = cheb.deriv_coeffs(cheb.deriv_coeffs(c, scale=g.dz_scale), scale=g.dz_scale)
    vals = cheb.coeffs_to_vals(c, axis=-1)
    if fld.space == PHYSICAL:
        vals = vals.real
    return Field(g, vals, fld.space)


def vertical_integral(fld: Field, to: str = "z"):
    """Integral from -h: to="z" gives the antiderivative Field vanishing at
    the bottom, to="surface" gives the full-depth integral as an array
    (2, n_x, n_y) in the field's space."""
    g = fld.grid
    if to == "surface":
        out = np.tensordot(fld.data, g.wz, axes=([-1], [0]))
        return out
    if to != "z":
        raise ValueError("to must be 'z' or 'surface'")
    c = cheb.vals_to_coeffs(fld.data, axis=-1)
    vals = cheb.cumint_vals(c, scale=g.h / 2.0, axis=-1)
    if fld.space == PHYSICAL:
        vals = vals.real
    return Field(g, np.ascontiguousarray(vals), fld.space)


def inner(u: Field, v: Field) -> float:
    """L^2(Omega) inner product of two real fields (quadrature in z)."""
    g = u.grid
    us, vs = u.to_spectral(), v.to_spectral()
    zint = np.tensordot(us.data * np.conj(vs.data), g.wz, axes=([-1], [0]))
    return float(np.real(np.sum(zint)) * g.L_x * g.L_y)


def l2_norm(fld: Field) -> float:
    g = fld.grid
    if fld.space == PHYSICAL:
        zint = np.tensordot(fld.data**2, g.wz, axes=([-1], [0]))
        return float(np.sqrt(np.sum(zint) * g.cell_area))
    zint = np.tensordot(np.abs(fld.data) ** 2, g.wz, axes=([-1], [0]))
    return float(np.sqrt(np.sum(zint) * g.L_x * g.L_y))


def sobolev_norm(fld: Field, k: int) -> float:
    """H^k norm: sum of squared L^2 norms of all derivatives up to order k."""
    if k < 0 or k > 4:
        raise ValueError(f"H^k supported for 0 <= k <= 4, got k={k}")
    g = fld.grid
    s = fld.to_spectral()
    kx2 = (g.kx[:, :, 0] ** 2)  # (n_x, 1)
    ky2 = (g.ky[:, :, 0] ** 2)  # (1, n_y)
    total = 0.0
    c = cheb.vals_to_coeffs(s.data, axis=-1)
    for a3 in range(k + 1):
        if a3 > 0:
            c = cheb.deriv_coeffs(c, scale=g.dz_scale, axis=-1)
        vals = cheb.coeffs_to_vals(c, axis=-1)
        zint = np.tensordot(np.abs(vals) ** 2, g.wz, axes=([-1], [0]))  # (2,nx,ny)
        for a1 in range(k - a3 + 1):
            for a2 in range(k - a3 - a1 + 1):
                w = kx2**a1 * ky2**a2
                total += float(np.sum(zint * w))
    return float(np.sqrt(total * g.L_x * g.L_y))


def fractional_h32_norm(fld: Field) -> float:
    """Interpolation proxy for the H^{3/2} norm: sqrt(H^1 * H^2)."""
    return float(np.sqrt(sobolev_norm(fld, 1) * sobolev_norm(fld, 2)))


def lp_norm(fld: Field, p) -> float:
    """L^p norm of the pointwise Euclidean magnitude, p in {2, 4, inf}."""
    phys = fld.to_physical()
    g = fld.grid
    mag2 = phys.data[0] ** 2 + phys.data[1] ** 2
    if p == np.inf or p == "inf":
        return float(np.sqrt(mag2.max()))
    if p == 2:
        return float(np.sqrt(np.sum(np.tensordot(mag2, g.wz, axes=([-1], [0]))) * g.cell_area))
    if p == 4:
        return float(np.sum(np.tensordot(mag2**2, g.wz, axes=([-1], [0]))) * g.cell_area) ** 0.25
    raise ValueError(f"p must be 2, 4 or inf, got {p}")


def dealias(fld: Field) -> Field:
    """Zero all horizontal modes beyond the 2/3 cutoff; idempotent."""
    s = fld.to_spectral()
    return Field(fld.grid, s.data * fld.grid.dealias_keep, SPECTRAL)


def random_field(grid: Grid, seed: int, amplitude: float, slope: float = 2.0) -> Field:
    """Seeded random field with power-law horizontal spectrum.

    Horizontal Fourier amplitudes scale like (1 + |m|)^{-slope} in the integer
    mode magnitude |m|. The vertical structure is a random cubic in z times
    (z + h), corrected so the surface shear vanishes; hence v = 0 at the
    bottom and d_z v = 0 at the surface exactly. The result is scaled so the
    maximum pointwise speed equals `amplitude`.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    rng = np.random.default_rng(seed)
    n_prof = 4
    mx = grid.modes_x[:, None]
    my = grid.modes_y[None, :]
    decay = (1.0 + np.sqrt(mx**2 + my**2)) ** (-slope)
    coefs = rng.normal(size=(2, grid.n_x, grid.n_y, n_prof)) \
        + 1j * rng.normal(size=(2, grid.n_x, grid.n_y, n_prof))
    coefs *= decay[None, :, :, None]
    # Hermitian symmetrization so physical values are real; the Nyquist line
    # is excluded entirely since odd derivatives are degenerate there
    ix = (-np.arange(grid.n_x)) % grid.n_x
    iy = (-np.arange(grid.n_y)) % grid.n_y
    coefs = 0.5 * (coefs + np.conj(coefs[:, ix][:, :, iy]))
    coefs[:, grid.n_x // 2, :, :] = 0.0
    coefs[:, :, grid.n_y // 2, :] = 0.0

    z = grid.z
    h = grid.h
    corr = (z + h) ** 2 / (2.0 * h)  # vanishes at bottom, unit slope at surface
    profiles = np.empty((n_prof, grid.n_z + 1))
    for deg in range(n_prof):
        q = (z + h) * z**deg
        dq0 = 1.0 if deg == 0 else (h if deg == 1 else 0.0)
        profiles[deg] = q - dq0 * corr
    profiles /= np.maximum(np.abs(profiles).max(axis=1, keepdims=True), 1e-300)

    data = np.tensordot(coefs, profiles, axes=([3], [0]))
    fld = Field(grid, data, SPECTRAL)
    if amplitude == 0.0:
        return Field.zeros(grid, SPECTRAL)
    peak = lp_norm(fld, np.inf)
    if peak == 0.0:
        return Field.zeros(grid, SPECTRAL)
    return Field(grid, data * (amplitude / peak), SPECTRAL)
