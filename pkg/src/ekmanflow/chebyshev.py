"""Chebyshev-Lobatto collocation helpers for the vertical direction.

Everything here works on the reference interval [-1, 1] with the N+1 Lobatto
points x_j = cos(pi j / N), j = 0..N (decreasing from 1 to -1). Transforms
between point values and Chebyshev coefficients use the DCT-I; derivatives
and antiderivatives act on coefficients through the standard recurrences of
numpy.polynomial.chebyshev. Callers handle the affine map to [-h, 0].
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy import fft as sfft


def lobatto_points(n: int) -> np.ndarray:
    """n+1 Lobatto points on [-1, 1], from x=1 down to x=-1."""
    return np.cos(np.pi * np.arange(n + 1) / n)


def vals_to_coeffs(vals: np.ndarray, axis: int = -1) -> np.ndarray:
    """Point values on Lobatto points -> Chebyshev coefficients."""
    n = vals.shape[axis] - 1
    c = sfft.dct(vals, type=1, axis=axis) / n
    sl0 = [slice(None)] * vals.ndim
    sl0[axis] = 0
    slN = [slice(None)] * vals.ndim
    slN[axis] = n
    c[tuple(sl0)] *= 0.5
    c[tuple(slN)] *= 0.5
    return c


def coeffs_to_vals(coeffs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Chebyshev coefficients -> point values on Lobatto points."""
    n = coeffs.shape[axis] - 1
    g = coeffs.copy()
    sl = [slice(None)] * coeffs.ndim
    sl[axis] = slice(1, n)
    g[tuple(sl)] *= 0.5
    return sfft.dct(g, type=1, axis=axis)


@lru_cache(maxsize=None)
def _deriv_matrix(n: int, scale: float) -> np.ndarray:
    """Dense derivative operator in coefficient space, padded to square."""
    eye = np.eye(n + 1)
    cols = [np.pad(npcheb.chebder(eye[:, j], m=1, scl=scale), (0, 1))
            for j in range(n + 1)]
    return np.stack(cols, axis=1)


@lru_cache(maxsize=None)
def _cumint_eval_matrix(n: int, scale: float) -> np.ndarray:
    """Coefficients -> values at the Lobatto points of the antiderivative
    vanishing at x = -1 (exact: the degree n+1 result is evaluated, not
    truncated)."""
    x = lobatto_points(n)
    eye = np.eye(n + 1)
    cols = [npcheb.chebval(x, npcheb.chebint(eye[:, j], m=1, k=[0],
                                             lbnd=-1.0, scl=scale))
            for j in range(n + 1)]
    return np.stack(cols, axis=1)


def _apply_along(c: np.ndarray, M: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(c, M, axes=([axis], [1]))
    return np.moveaxis(out, -1, axis)


def deriv_coeffs(coeffs: np.ndarray, scale: float = 1.0, axis: int = -1) -> np.ndarray:
    """Coefficient-space derivative, zero-padded back to the input length.

    `scale` is the chain-rule factor dx/dz for a mapped interval.
    """
    return _apply_along(coeffs, _deriv_matrix(coeffs.shape[axis] - 1, float(scale)), axis)


def cumint_vals(coeffs: np.ndarray, scale: float = 1.0, axis: int = -1) -> np.ndarray:
    """Values on the Lobatto points of the antiderivative vanishing at x = -1.

    `scale` is dz/dx of the mapped interval.
    """
    return _apply_along(coeffs, _cumint_eval_matrix(coeffs.shape[axis] - 1, float(scale)), axis)


def integ_coeffs(coeffs: np.ndarray, scale: float = 1.0, axis: int = -1) -> np.ndarray:
    """Antiderivative coefficients vanishing at x = -1 (one extra coefficient).

    `scale` is dz/dx of the mapped interval.
    """
    return npcheb.chebint(coeffs, m=1, k=[0], lbnd=-1.0, scl=scale, axis=axis)


def eval_coeffs(coeffs: np.ndarray, x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Evaluate a coefficient array at points x along `axis` (Clenshaw).

    Output has the points axis in place of the coefficient axis; exact for
    any coefficient length, used where antiderivatives exceed degree N.
    """
    c = np.moveaxis(coeffs, axis, 0)
    vals = npcheb.chebval(x, c, tensor=True)
    # chebval appends the point axes last; move them back into place
    return np.moveaxis(vals, -1, axis)


def quad_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the n+1 Lobatto points; sum to 2.

    Computed by matching the exact Chebyshev moments, i.e. solving
    V^T w = m with V the Chebyshev Vandermonde matrix at the points and
    m_k = int_{-1}^{1} T_k.
    """
    x = lobatto_points(n)
    V = npcheb.chebvander(x, n)
    k = np.arange(n + 1)
    m = np.zeros(n + 1)
    even = k % 2 == 0
    m[even] = 2.0 / (1.0 - k[even].astype(float) ** 2)
    return np.linalg.solve(V.T, m)


def moment_vector(n: int) -> np.ndarray:
    """m_k = int_{-1}^{1} T_k, so sum(m * coeffs) integrates a coefficient array."""
    k = np.arange(n + 1)
    m = np.zeros(n + 1)
    even = k % 2 == 0
    m[even] = 2.0 / (1.0 - k[even].astype(float) ** 2)
    return m


def dirichlet_row(n: int) -> np.ndarray:
    """Functional c -> value at x = -1, i.e. T_k(-1) = (-1)^k."""
    return (-1.0) ** np.arange(n + 1)


def neumann_row(n: int) -> np.ndarray:
    """Functional c -> derivative at x = +1, i.e. T_k'(1) = k^2."""
    return np.arange(n + 1, dtype=float) ** 2


def coeff_deriv_matrix(n: int, scale: float = 1.0) -> np.ndarray:
    """Dense (n+1)^2 derivative operator in coefficient space."""
    eye = np.eye(n + 1)
    return np.stack([deriv_coeffs(eye[:, j], scale=scale) for j in range(n + 1)], axis=1)
