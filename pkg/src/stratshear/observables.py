"""Physical observables of a run: vorticity, velocity, norms, decay fits.

Norms are taken on the frequency side, sqrt(trapezoid |field|^2 d eta); they
differ from physical-space L^2 norms by a constant factor sqrt(2 pi), which
is irrelevant for the decay exponents this module extracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .multipliers import eval_bl
from .spectral_ops import (
    SpectralField,
    apply_Bt,
    apply_profile_convolution,
    solve_TL,
)

__all__ = [
    "InsufficientWindow",
    "ObservableSeries",
    "PowerLawFit",
    "fit_power_law",
    "reconstruct_vorticity",
    "series_norms",
    "velocity_components",
]

ENVELOPE_WIDTH = 5.0  # time width of the running-maximum windows used by fits


class InsufficientWindow(ValueError):
    """Too few samples inside the requested fit window."""


def _is_trivial(spec) -> bool:
    return spec is None or spec.trivial


def reconstruct_vorticity(theta: SpectralField, t, spec=None, beta=0.0,
                          tol=1e-10, max_iter=50, stats=None) -> SpectralField:
    """Vorticity from the corrected unknown: Omega = Bt Theta.

    For the linear profile this is just the stratification multiplier, so
    |Omega| lies between |Theta|/sqrt(1+beta^2) and |Theta| pointwise.
    """
    grid = theta.grid
    if _is_trivial(spec):
        bl = eval_bl(t, grid.k, grid.etas, beta)
        return SpectralField(grid, bl * theta.values)
    return apply_Bt(t, spec, beta, theta, tol, max_iter, stats)


def velocity_components(omega: SpectralField, t, spec=None,
                        tol=1e-10, max_iter=50, stats=None):
    """Moving-frame velocity (vx, vy) recovered from the vorticity.

    Linear profile: the multipliers vx = i (eta - k t) Omega / p and
    vy = -i k Omega / p.  Perturbed profile: the inverse Laplacian goes
    through the resolvent and vx picks up the shear-rate factor g, realized
    as identity plus the g-1 convolution.
    """
    grid = omega.grid
    d = grid.shift(t)
    p = grid.p(t)
    if _is_trivial(spec):
        base = omega.values
    else:
        base = solve_TL(t, spec, omega, tol, max_iter, stats).values
    vx = 1j * d * base / p
    vy = -1j * grid.k * base / p
    if not _is_trivial(spec):
        vx = vx + apply_profile_convolution(spec, "g1", vx)
    return SpectralField(grid, vx), SpectralField(grid, vy)


@dataclass
class ObservableSeries:
    """Norm time series of one evolution, all entries nonnegative and finite."""

    times: np.ndarray
    q_norm: np.ndarray
    vx_norm: np.ndarray
    vy_norm: np.ndarray
    growth_norm: np.ndarray  # ||Omega|| + ||sqrt(p) Q||


def series_norms(history, spec=None, beta=0.0, tol=1e-10, max_iter=50,
                 stats=None) -> ObservableSeries:
    """Per-snapshot norms of density, velocity and the growing functional."""
    times, qn, vxn, vyn, gn = [], [], [], [], []
    for state in history:
        grid = state.grid
        omega = reconstruct_vorticity(state.theta, state.t, spec, beta, tol, max_iter, stats)
        vx, vy = velocity_components(omega, state.t, spec, tol, max_iter, stats)
        p = grid.p(state.t)
        times.append(state.t)
        qn.append(state.q.l2())
        vxn.append(vx.l2())
        vyn.append(vy.l2())
        gn.append(omega.l2() + SpectralField(grid, np.sqrt(p) * state.q.values).l2())
    return ObservableSeries(
        times=np.asarray(times), q_norm=np.asarray(qn), vx_norm=np.asarray(vxn),
        vy_norm=np.asarray(vyn), growth_norm=np.asarray(gn),
    )


class PowerLawFit(NamedTuple):
    exponent: float
    r_squared: float


def fit_power_law(times, values, t_lo, t_hi, envelope_width=ENVELOPE_WIDTH) -> PowerLawFit:
    """Least-squares slope of log(value) against log(t) over [t_lo, t_hi].

    The series is first reduced to its running maximum over windows of
    ``envelope_width`` time units, keeping each maximum at its own abscissa;
    oscillatory prefactors then perturb the fit only through the envelope.
    The slope is invariant under rescaling of the values.
    """
    if not t_hi > t_lo or t_lo < 1.0:
        raise ValueError("fit window requires t_hi > t_lo >= 1")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= t_lo) & (times <= t_hi)
    if int(sel.sum()) < 16:
        raise InsufficientWindow(
            f"only {int(sel.sum())} samples in [{t_lo}, {t_hi}]; need at least 16"
        )
    tt = times[sel]
    vv = values[sel]
    if np.any(vv <= 0):
        raise ValueError("values must be positive on the fit window")

    pts_t, pts_v = [], []
    n_win = int(math.ceil((t_hi - t_lo) / envelope_width))
    edges = t_lo + envelope_width * np.arange(n_win + 1)
    edges[-1] = t_hi + 1e-9 * max(1.0, t_hi)  # keep the right endpoint inside
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (tt >= lo) & (tt < hi)
        if not np.any(inside):
            continue
        j = np.argmax(vv[inside])
        pts_t.append(tt[inside][j])
        pts_v.append(vv[inside][j])
    if len(pts_t) < 2:
        raise InsufficientWindow("fit window spans fewer than two envelope windows")

    x = np.log(np.asarray(pts_t))
    y = np.log(np.asarray(pts_v))
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(exponent=float(slope), r_squared=r2)
