"""Norm time series, decay-rate fits, and inequality monitors.

Each sample of a run is condensed into one DiagnosticsRecord: Sobolev norms
of the difference field, the baroclinic L^4 norm, the energy, slack of the
two a-priori inequalities (both are theorems for constrained fields, so a
negative slack beyond roundoff flags an implementation bug), the barotropic
gradient, the k = 0 bilinear ratio, and the boundary residuals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .field import Field, diff, l2_norm, lp_norm, sobolev_norm
from .hydrostatics import baroclinic_part, reconstruct_w, vertical_average
from .operator import LinearizedOp, bilinear_ratio, boundary_residuals

CSV_COLUMNS = ("t", "l2", "h1", "h2", "h3", "l4_tilde", "energy",
               "jensen_slack", "poincare_slack", "barotropic_h1",
               "bilinear_ratio_k0")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l2: float
    h1: float
    h2: float
    h3: float
    l4_tilde: float
    energy: float
    jensen_slack: float
    poincare_slack: float
    barotropic_h1: float
    bilinear_ratio_k0: float
    bc_residual_top: float
    bc_residual_bottom: float

    def csv_row(self) -> tuple:
        return tuple(getattr(self, name) for name in CSV_COLUMNS)


def _w_l2(v: Field) -> float:
    g = v.grid
    w = reconstruct_w(v.to_spectral())
    zint = np.tensordot(np.abs(w) ** 2, g.wz, axes=([-1], [0]))
    return float(np.sqrt(np.sum(zint) * g.L_x * g.L_y))


def record(v: Field, t: float, op: LinearizedOp) -> DiagnosticsRecord:
    """Compute one diagnostics sample; a pure function of (v, t)."""
    s = v.to_spectral()
    h = op.params.h
    l2 = l2_norm(s)
    gradh_sq = sobolev_norm_gradh_sq(s)
    dzv = diff(s, "z")
    dz_l2 = l2_norm(dzv)
    w_l2 = _w_l2(s)
    top, bottom = boundary_residuals(s)
    return DiagnosticsRecord(
        t=t,
        l2=l2,
        h1=sobolev_norm(s, 1),
        h2=sobolev_norm(s, 2),
        h3=sobolev_norm(s, 3),
        l4_tilde=lp_norm(baroclinic_part(s), 4),
        energy=l2 * l2,
        jensen_slack=2.0 * h * h * gradh_sq - w_l2 * w_l2,
        poincare_slack=h * h * dz_l2 * dz_l2 - l2 * l2,
        barotropic_h1=vertical_average(s).grad_l2(),
        bilinear_ratio_k0=bilinear_ratio(s, 0),
        bc_residual_top=top,
        bc_residual_bottom=bottom,
    )


def sobolev_norm_gradh_sq(v: Field) -> float:
    """||grad_H v||_L2^2 computed spectrally."""
    g = v.grid
    s = v.to_spectral()
    zint = np.tensordot(np.abs(s.data) ** 2, g.wz, axes=([-1], [0]))
    return float(np.sum(zint * g.k2[:, :, 0]) * g.L_x * g.L_y)


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    rate: float
    r_squared: float
    window: tuple[int, int]


def decay_fit(ts: Sequence[float], values: Sequence[float],
              transient_fraction: float = 0.2) -> DecayFit:
    """Least-squares exponential fit value ~ C exp(rate * t).

    The first `transient_fraction` of the samples is excluded: the theory's
    prefactor absorbs transients, so only the tail determines the rate.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size != values.size or ts.size < 5:
        raise ValueError("insufficient data: need at least 5 samples")
    if np.any(values <= 0.0):
        raise ValueError("nonpositive values cannot be fit on a log scale")
    start = int(np.floor(transient_fraction * ts.size))
    start = max(0, min(start, ts.size - 5))
    t = ts[start:]
    y = np.log(values[start:])
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(amplitude=float(np.exp(intercept)), rate=slope,
                    r_squared=r2, window=(start, int(ts.size)))


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    first_violation: Optional[int]
    max_ratio: float


def check_energy_monotone(energies: Sequence[float],
                          slack: float = 1e-10) -> MonotoneReport:
    """Pass iff energy never increases by more than a relative `slack` per step."""
    e = np.asarray(energies, dtype=float)
    if e.size < 2:
        return MonotoneReport(passed=True, first_violation=None, max_ratio=0.0)
    prev = e[:-1]
    nxt = e[1:]
    limit = prev * (1.0 + slack)
    bad = np.nonzero(nxt > limit)[0]
    ratios = np.divide(nxt, prev, out=np.zeros_like(nxt), where=prev > 0)
    max_ratio = float(ratios.max()) if ratios.size else 0.0
    if bad.size:
        return MonotoneReport(passed=False, first_violation=int(bad[0] + 1),
                              max_ratio=max_ratio)
    return MonotoneReport(passed=True, first_violation=None, max_ratio=max_ratio)


@dataclass(frozen=True)
class BoundednessReport:
    max_norm: float
    tail_integral: float
    peak_index: int
    running_max_decreasing_after_peak: bool


def hk_boundedness(ts: Sequence[float], norms_k: Sequence[float],
                   norms_kp1: Sequence[float]) -> BoundednessReport:
    """Max of the H^k series and the trapezoid integral of the H^{k+1} squared.

    Finiteness is the contract; for stable runs the running max should stop
    growing after the transient.
    """
    ts = np.asarray(ts, dtype=float)
    nk = np.asarray(norms_k, dtype=float)
    nk1 = np.asarray(norms_kp1, dtype=float)
    if not (ts.size == nk.size == nk1.size) or ts.size < 2:
        raise ValueError("series must share a length >= 2")
    integral = float(np.trapezoid(nk1**2, ts))
    peak = int(np.argmax(nk))
    tail = nk[peak:]
    decreasing = bool(np.all(np.diff(tail) <= 1e-9 * max(nk.max(), 1e-300)))
    return BoundednessReport(max_norm=float(nk.max()), tail_integral=integral,
                             peak_index=peak,
                             running_max_decreasing_after_peak=decreasing)
