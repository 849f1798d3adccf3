import math

import numpy as np
import pytest

from ekmanflow.field import Grid
from ekmanflow.model import PhysicalParams, smallness_constant


def scaled_stable_params(target_ce=0.5, **overrides) -> PhysicalParams:
    """Wind-driven parameters scaled so the regime constant hits target_ce.

    The spiral coefficients are linear in (tau, v_g), so the constant is
    exactly quadratic under joint scaling of the data.
    """
    base = dict(nu_h=0.1, nu_z=0.1, f=1.0, rho0=1000.0, g=9.81, h=1.0,
                tau=(0.05, 0.02), v_g=(0.01, -0.005),
                L_x=2.0 * np.pi, L_y=2.0 * np.pi)
    base.update(overrides)
    p0 = PhysicalParams(**base)
    c0 = smallness_constant(p0).value
    s = math.sqrt(target_ce / c0)
    base["tau"] = (s * base["tau"][0], s * base["tau"][1])
    base["v_g"] = (s * base["v_g"][0], s * base["v_g"][1])
    return PhysicalParams(**base)


@pytest.fixture
def box_params() -> PhysicalParams:
    """Reference box [0, 2pi)^2 x (-1, 0) in a comfortably stable regime."""
    return scaled_stable_params(target_ce=0.3)


@pytest.fixture
def quiet_params() -> PhysicalParams:
    """No wind, no geostrophic flow: the spiral vanishes identically."""
    return PhysicalParams(nu_h=0.1, nu_z=0.1, f=1.0, rho0=1000.0, g=9.81,
                          h=1.0, tau=(0.0, 0.0), v_g=(0.0, 0.0),
                          L_x=2.0 * np.pi, L_y=2.0 * np.pi)


@pytest.fixture
def small_grid(box_params) -> Grid:
    return Grid(n_x=16, n_y=16, n_z=24, L_x=box_params.L_x,
                L_y=box_params.L_y, h=box_params.h)


@pytest.fixture
def unit_grid() -> Grid:
    return Grid(n_x=16, n_y=16, n_z=24, L_x=2.0 * np.pi, L_y=2.0 * np.pi, h=1.0)
