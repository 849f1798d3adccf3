"""Pseudo-spectral simulator for a wind-driven rotating ocean layer.

Simulates the difference between the layer's velocity and the steady Ekman
spiral, verifies that the spiral is an equilibrium, and estimates the
exponential rate at which solutions converge to it.
"""

__version__ = "0.1.0"

from .model import (
    EkmanSolution,
    ParameterError,
    PhysicalParams,
    ekman_coefficients,
    ekman_derivative,
    ekman_profile,
    layer_thickness,
    smallness_constant,
    sup_derivative_bound,
)
from .field import Field, Grid, dealias, diff, lp_norm, random_field, sobolev_norm
from .hydrostatics import (
    baroclinic_part,
    project,
    project_keep_bc,
    reconstruct_w,
    recover_pressure,
    vertical_average,
)
from .operator import LinearizedOp, apply_A, apply_F, bilinear_ratio, estimate_spectral_bound
from .solver import SimConfig, SimState, propagate_linear, simulate, step
from .diagnostics import DiagnosticsRecord, check_energy_monotone, decay_fit, record
