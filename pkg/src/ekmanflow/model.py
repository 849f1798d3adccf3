"""Physical setup of the rotating ocean layer and its steady wind-driven spiral.

The layer occupies a horizontally periodic box of depth h. A constant wind
shear tau acts at the surface (Neumann condition d_z v = tau at z = 0) and
the flow matches a constant geostrophic velocity v_g at the bottom
(Dirichlet condition v = v_g at z = -h). The steady state balancing Coriolis
force against vertical diffusion,

    nu_z * v'' = f * v_perp,      v_perp = (-v2, v1),

is the finite-depth Ekman spiral. It is a four-parameter combination of
sin/cos profiles times exponentials on the boundary-layer scale
d = sqrt(2 nu_z / |f|). This module provides the closed-form coefficients,
profile and shear evaluators, the sup bound on |d_z v_E|^2, and the
dimensionless constant C_E that gates the stable regime (C_E < 1).

Sign convention: the closed forms below are for f > 0. For f < 0 the
coefficients are computed for the reflected data (tau1, -tau2), (vg1, -vg2)
and the second velocity component is negated on evaluation; this maps
solutions of the f > 0 balance onto solutions of the f < 0 balance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# exp(2h/d) appears squared in the smallness constant; beyond this ratio the
# double-precision closed forms overflow.
MAX_DEPTH_RATIO = 600.0


class ParameterError(ValueError):
    """Invalid physical parameters."""


@dataclass(frozen=True)
class PhysicalParams:
    """One physical scenario.

    nu_h, nu_z : horizontal and vertical viscosities (m^2/s)
    f          : Coriolis parameter (1/s), nonzero
    rho0       : reference density (kg/m^3)
    g          : gravity (m/s^2)
    h          : layer depth (m)
    tau        : surface wind shear, two components (1/s); note these are
                 shear units since the surface condition is d_z v = tau,
                 not a stress in Pa
    v_g        : geostrophic bottom velocity, two components (m/s)
    L_x, L_y   : horizontal periods (m)
    """

    nu_h: float
    nu_z: float
    f: float
    rho0: float
    g: float
    h: float
    tau: tuple[float, float]
    v_g: tuple[float, float]
    L_x: float
    L_y: float

    def __post_init__(self):
        object.__setattr__(self, "tau", (float(self.tau[0]), float(self.tau[1])))
        object.__setattr__(self, "v_g", (float(self.v_g[0]), float(self.v_g[1])))
        for name in ("nu_h", "nu_z", "rho0", "g", "h", "L_x", "L_y"):
            val = getattr(self, name)
            if not math.isfinite(val) or val <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {val}")
        if not math.isfinite(self.f):
            raise ParameterError(f"f must be finite, got {self.f}")
        if self.f == 0.0:
            raise ParameterError("f = 0: Ekman thickness undefined")
        for name in ("tau", "v_g"):
            pair = getattr(self, name)
            if not all(math.isfinite(c) for c in pair):
                raise ParameterError(f"{name} must be finite, got {pair}")


def layer_thickness(params: PhysicalParams) -> float:
    """Boundary-layer scale d = sqrt(2 nu_z / |f|)."""
    if params.f == 0.0:
        raise ParameterError("f = 0: Ekman thickness undefined")
    return math.sqrt(2.0 * params.nu_z / abs(params.f))


@dataclass(frozen=True)
class EkmanSolution:
    """Closed-form spiral: coefficients k1..k4, layer scale d, and evaluators."""

    k1: float
    k2: float
    k3: float
    k4: float
    d: float
    params: PhysicalParams

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.k4])

    def _check_range(self, z):
        z = np.asarray(z, dtype=float)
        h = self.params.h
        if np.any(z < -h - 1e-12 * h) or np.any(z > 1e-12 * h):
            raise ValueError(f"z out of range [-{h}, 0]")
        return z

    def profile(self, z):
        """Velocity (v1, v2) at height z in [-h, 0]; shape (2,) + shape(z)."""
        z = self._check_range(z)
        s, c = np.sin(z / self.d), np.cos(z / self.d)
        em, ep = np.exp(-z / self.d), np.exp(z / self.d)
        v1 = self.k1 * s * em + self.k2 * c * em + self.k3 * s * ep + self.k4 * c * ep
        v2 = self.k1 * c * em - self.k2 * s * em - self.k3 * c * ep + self.k4 * s * ep
        sgn = 1.0 if self.params.f > 0 else -1.0
        return np.stack([v1, sgn * v2])

    def derivative(self, z):
        """Shear (d_z v1, d_z v2) at height z in [-h, 0]."""
        z = self._check_range(z)
        s, c = np.sin(z / self.d), np.cos(z / self.d)
        em, ep = np.exp(-z / self.d), np.exp(z / self.d)
        dv1 = (self.k1 * (c - s) * em + self.k2 * (-s - c) * em
               + self.k3 * (s + c) * ep + self.k4 * (c - s) * ep) / self.d
        dv2 = (self.k1 * (-s - c) * em + self.k2 * (s - c) * em
               + self.k3 * (s - c) * ep + self.k4 * (s + c) * ep) / self.d
        sgn = 1.0 if self.params.f > 0 else -1.0
        return np.stack([dv1, sgn * dv2])

    def hydrostatic_pressure(self, z):
        """Steady pressure pi_E(z) = -rho0 * g * z."""
        return -self.params.rho0 * self.params.g * np.asarray(z, dtype=float)


def ekman_coefficients(params: PhysicalParams) -> EkmanSolution:
    """Solve the two vector boundary conditions for the spiral coefficients.

    Closed form of the 4x4 boundary-condition system for the general-solution
    basis {sin(z/d) e^{-z/d}, cos(z/d) e^{-z/d}, sin(z/d) e^{z/d},
    cos(z/d) e^{z/d}} shared by both velocity components.
    """
    d = layer_thickness(params)
    h = params.h
    H = h / d
    if 2.0 * H > MAX_DEPTH_RATIO:
        raise ParameterError(
            f"2h/d = {2*H:.1f} exceeds {MAX_DEPTH_RATIO}: spiral coefficients overflow"
        )
    sgn = 1.0 if params.f > 0 else -1.0
    t1, t2 = params.tau[0], sgn * params.tau[1]
    g1, g2 = params.v_g[0], sgn * params.v_g[1]

    E = math.exp(H)
    E2 = math.exp(2.0 * H)
    s1, c1 = math.sin(H), math.cos(H)
    s2, c2 = math.sin(2.0 * H), math.cos(2.0 * H)
    D = 2.0 * (E2 * E2 + 2.0 * E2 * c2 + 1.0)

    k1 = (-2.0 * E * (E2 - 1.0) * s1 * g1 + 2.0 * E * (E2 + 1.0) * c1 * g2
          + d * (E2 * s2 + E2 * c2 + 1.0) * t1
          - d * (-E2 * s2 + E2 * c2 + 1.0) * t2) / D
    k2 = (2.0 * E * (E2 + 1.0) * c1 * g1 + 2.0 * E * (E2 - 1.0) * s1 * g2
          - d * (-E2 * s2 + E2 * c2 + 1.0) * t1
          - d * (E2 * s2 + E2 * c2 + 1.0) * t2) / D
    k3 = E * (2.0 * (E2 - 1.0) * s1 * g1 - 2.0 * (E2 + 1.0) * c1 * g2
              + d * E * (E2 - s2 + c2) * t1
              - d * E * (E2 + s2 + c2) * t2) / D
    k4 = E * (2.0 * (E2 + 1.0) * c1 * g1 + 2.0 * (E2 - 1.0) * s1 * g2
              + d * E * (E2 + s2 + c2) * t1
              + d * E * (E2 - s2 + c2) * t2) / D
    return EkmanSolution(k1=k1, k2=k2, k3=k3, k4=k4, d=d, params=params)


def ekman_profile(sol: EkmanSolution, z):
    return sol.profile(z)


def ekman_derivative(sol: EkmanSolution, z):
    return sol.derivative(z)


def sup_derivative_bound(sol: EkmanSolution) -> float:
    """Upper bound on sup_z |d_z v_E(z)|^2 over the layer.

    Pointwise |d_z v_E|^2 expands into exponential and oscillatory terms in
    z/d; bounding the exponentials by their endpoint values and the
    oscillations by 1 gives this closed form.
    """
    k1, k2, k3, k4 = sol.k1, sol.k2, sol.k3, sol.k4
    H = sol.params.h / sol.d
    bracket = ((k1 * k1 + k2 * k2) * math.exp(2.0 * H)
               + (k3 * k3 + k4 * k4)
               + 2.0 * abs(k1 * k3 - k2 * k4)
               + 2.0 * abs(k2 * k3 + k1 * k4))
    return (2.0 / sol.d**2) * bracket


class SmallnessReport(NamedTuple):
    value: float
    stable: bool


def smallness_constant(params: PhysicalParams) -> SmallnessReport:
    """Dimensionless regime constant C_E; C_E < 1 means stable regime.

    Equals sup_derivative_bound * h^4 / (2 nu_h nu_z), using
    2/d^2 = |f|/nu_z.
    """
    sol = ekman_coefficients(params)
    bound = sup_derivative_bound(sol)
    value = bound * params.h**4 / (2.0 * params.nu_h * params.nu_z)
    return SmallnessReport(value=value, stable=bool(value < 1.0))
