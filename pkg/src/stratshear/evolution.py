"""Per-wavenumber time evolution and the energy functionals.

The state advanced in time is the raw pair (Theta, Q): the corrected
vorticity and the scaled density at one x-wavenumber k, as functions of the
Y-frequency eta.  For the linear profile the right-hand side is a pointwise
2x2 system per eta,

    dTheta/dt = -i k R Q - i k beta * invLap * BL * Theta,
    dQ/dt     = -i k BL * Theta / p,           invLap = -1/p,

so the beta term carries the sign +i k beta BL / p.  For perturbed profiles
the inverse Laplacian and the vorticity correction are realized through the
Neumann resolvents, and the Theta coupling splits the profile factor
(b - beta g) into a convolution part (b - beta (g-1)) and the constant -beta.

Symmetrized variables Z1 = minv p^{-1/4} Theta, Z2 = minv p^{1/4} i sqrt(R) Q
(minv = 1 for the linear profile) define the energies; the mixed term makes
them coercive exactly when R > 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .multipliers import eval_bl
from .spectral_ops import (
    FrequencyGrid,
    SolveStats,
    SpectralField,
    apply_profile_convolution,
    solve_TB,
    solve_TL,
)
from .weights import WeightSet

__all__ = [
    "EnergyReport",
    "RawState",
    "StepUnstable",
    "SymmetricState",
    "coercivity_constants",
    "couette_rhs",
    "desymmetrize",
    "evolve",
    "full_rhs",
    "pointwise_energy",
    "rhs_couette",
    "rhs_full",
    "rk4_integrate",
    "symmetrize",
    "weighted_energy_Es",
]

ENERGY_MASK_SHARE = 1e-8  # minimum share of the initial energy a cell must carry
BLOWUP_FACTOR = 1e6


class StepUnstable(RuntimeError):
    """A field norm exceeded a large multiple of its initial value."""


@dataclass
class RawState:
    """Corrected vorticity and scaled density at one wavenumber and time."""

    theta: SpectralField
    q: SpectralField
    t: float

    def __post_init__(self):
        if self.theta.grid != self.q.grid:
            raise ValueError("theta and q must share a grid")

    @property
    def grid(self) -> FrequencyGrid:
        return self.theta.grid


@dataclass
class SymmetricState:
    """Weighted symmetrized pair (Z1, Z2) at one time."""

    z1: SpectralField
    z2: SpectralField
    t: float


def coercivity_constants(R):
    """Lower/upper energy sandwich constants (1 -+ 1/(2 sqrt(R)))/2.

    The lower constant is positive iff R > 1/4 (the stability threshold);
    it vanishes at R = 1/4 and is negative below.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    half = 0.5 / math.sqrt(R)
    return 0.5 * (1.0 - half), 0.5 * (1.0 + half)


def _weights_inv(weights: Optional[WeightSet], t, k, etas):
    if weights is None:
        return 1.0
    return weights.energy_weight_inv(t, k, etas)


def symmetrize(state: RawState, R, weights: Optional[WeightSet] = None) -> SymmetricState:
    """Map (Theta, Q) to (Z1, Z2) = (minv p^{-1/4} Theta, minv p^{1/4} i sqrt(R) Q)."""
    grid = state.grid
    p = grid.p(state.t)
    minv = _weights_inv(weights, state.t, grid.k, grid.etas)
    z1 = minv * p**-0.25 * state.theta.values
    z2 = minv * p**0.25 * 1j * math.sqrt(R) * state.q.values
    return SymmetricState(SpectralField(grid, z1), SpectralField(grid, z2), state.t)


def desymmetrize(sym: SymmetricState, R, weights: Optional[WeightSet] = None) -> RawState:
    """Inverse of ``symmetrize``; round-trips to ~1e-12 for moderate weights."""
    grid = sym.z1.grid
    p = grid.p(sym.t)
    minv = _weights_inv(weights, sym.t, grid.k, grid.etas)
    theta = p**0.25 * sym.z1.values / minv
    q = p**-0.25 * sym.z2.values / (1j * math.sqrt(R) * minv)
    return RawState(SpectralField(grid, theta), SpectralField(grid, q), sym.t)


def couette_rhs(t, theta, q, k, etas, beta, R):
    """Raw-array right-hand side for the linear profile; pointwise in eta."""
    d = etas - k * t
    p = k * k + d * d
    bl = eval_bl(t, k, etas, beta)
    dtheta = -1j * k * R * q + 1j * k * beta * bl * theta / p
    dq = -1j * k * bl * theta / p
    return dtheta, dq


def rhs_couette(t, state: RawState, beta, R):
    """Time derivative of the raw state for the linear profile."""
    grid = state.grid
    return couette_rhs(t, state.theta.values, state.q.values, grid.k, grid.etas, beta, R)


def full_rhs(t, theta, q, spec, beta, R, tol=1e-10, max_iter=50, stats=None):
    """Raw-array right-hand side for a perturbed profile.

    Realizes phi = invDelta_t(Bt Theta) through the two Neumann resolvents,
    then couples it back with the split profile factor.
    """
    grid = spec.grid
    k = grid.k
    p = grid.p(t)
    bl = eval_bl(t, k, grid.etas, beta)
    v = solve_TB(t, spec, beta, SpectralField(grid, bl * theta), tol, max_iter, stats)
    tl = solve_TL(t, spec, v, tol, max_iter, stats)
    phi = -tl.values / p
    if spec.trivial:
        coupling = np.zeros_like(phi)
    else:
        coupling = (apply_profile_convolution(spec, "b", phi)
                    - beta * apply_profile_convolution(spec, "g1", phi))
    dtheta = -1j * k * R * q + 1j * k * (coupling - beta * phi)
    dq = 1j * k * phi
    return dtheta, dq


def rhs_full(t, state: RawState, spec, beta, R, tol=1e-10, max_iter=50, stats=None):
    """Time derivative of the raw state for a perturbed profile."""
    return full_rhs(t, state.theta.values, state.q.values, spec, beta, R,
                    tol, max_iter, stats)


def rk4_integrate(rhs, theta0, q0, t0, t_end, dt, callback=None):
    """Classical 4th-order one-step integration of (theta, q) arrays.

    ``rhs(t, theta, q) -> (dtheta, dq)``.  The callback, if given, is invoked
    as callback(step_index, t, theta, q) after every step including step 0.
    """
    theta = np.array(theta0, dtype=complex)
    q = np.array(q0, dtype=complex)
    n_steps = int(round((t_end - t0) / dt))
    if callback is not None:
        callback(0, t0, theta, q)
    for i in range(n_steps):
        t = t0 + i * dt
        k1t, k1q = rhs(t, theta, q)
        k2t, k2q = rhs(t + 0.5 * dt, theta + 0.5 * dt * k1t, q + 0.5 * dt * k1q)
        k3t, k3q = rhs(t + 0.5 * dt, theta + 0.5 * dt * k2t, q + 0.5 * dt * k2q)
        k4t, k4q = rhs(t + dt, theta + dt * k3t, q + dt * k3q)
        theta = theta + (dt / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        q = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if callback is not None:
            callback(i + 1, t0 + (i + 1) * dt, theta, q)
    return theta, q


def _pointwise_energy_arrays(theta, q, t, k, etas, R):
    d = etas - k * t
    p = k * k + d * d
    pp = -2.0 * k * d
    z1 = p**-0.25 * theta
    z2 = p**0.25 * 1j * math.sqrt(R) * q
    mixed = (pp / np.sqrt(p)) * (z1 * np.conj(z2)).real / (2.0 * k * math.sqrt(R))
    quad = np.abs(z1) ** 2 + np.abs(z2) ** 2
    return 0.5 * (quad + mixed), quad


def pointwise_energy(state: RawState, R):
    """Per-eta energy density and its integral over the grid.

    Density: (|Z1|^2 + |Z2|^2 + Re(p' p^{-1/2} Z1 conj(Z2)) / (2 k sqrt(R))) / 2
    with the unweighted symmetrized variables.
    """
    grid = state.grid
    e_eta, _ = _pointwise_energy_arrays(state.theta.values, state.q.values,
                                        state.t, grid.k, grid.etas, R)
    return e_eta, float(grid.integrate(e_eta))


def weighted_energy_Es(state: RawState, weights: WeightSet, s=0.0):
    """Weighted energy functional at Sobolev order s.

    Same quadratic form as the pointwise energy but built from the
    weight-scaled Z1, Z2 and integrated against <(k, eta)>^{2s}.
    """
    grid = state.grid
    k = grid.k
    p = grid.p(state.t)
    pp = -2.0 * k * grid.shift(state.t)
    minv = weights.energy_weight_inv(state.t, k, grid.etas)
    z1 = minv * p**-0.25 * state.theta.values
    z2 = minv * p**0.25 * 1j * math.sqrt(weights.R) * state.q.values
    mixed = (pp / np.sqrt(p)) * (z1 * np.conj(z2)).real / (2.0 * k * math.sqrt(weights.R))
    sob = (1.0 + k * k + grid.etas**2) ** s
    dens = 0.5 * sob * (np.abs(z1) ** 2 + np.abs(z2) ** 2 + mixed)
    return float(grid.integrate(dens))


@dataclass
class EnergyReport:
    """Recorded time series of the energies of one evolution.

    ``energy`` integrates the pointwise functional; ``energy_lower`` and
    ``energy_upper`` are its coercivity envelopes; ``energy_weighted`` is the
    damped functional (NaN when no weight set was supplied).  The ratio
    fields track E(t; eta)/E(0; eta) over time for every cell carrying at
    least ENERGY_MASK_SHARE of the initial energy.
    """

    times: np.ndarray
    energy: np.ndarray
    energy_lower: np.ndarray
    energy_upper: np.ndarray
    energy_weighted: np.ndarray
    ratio_max_per_eta: np.ndarray
    ratio_min_per_eta: np.ndarray

    @property
    def ratio_max(self) -> float:
        return float(np.nanmax(self.ratio_max_per_eta))

    @property
    def ratio_min(self) -> float:
        return float(np.nanmin(self.ratio_min_per_eta))


def evolve(initial: RawState, *, beta, R, t_max, dt, spec=None,
           weights: Optional[WeightSet] = None, s=0.0, record_every=10,
           tol=1e-10, max_iter=50, stats: Optional[SolveStats] = None):
    """Advance a raw state to t_max, recording energies and snapshots.

    Uses the pointwise right-hand side when ``spec`` is None and the
    resolvent-based one otherwise.  Raises ``StepUnstable`` if a field norm
    exceeds BLOWUP_FACTOR times its initial value, and ``ValueError`` when dt
    violates the stability margin dt |k| max(R, 1+beta) <= 0.1.

    Returns (EnergyReport, snapshots) with snapshots a list of RawState taken
    every ``record_every`` steps (first and last steps always included).
    """
    grid = initial.grid
    k = grid.k
    if dt * abs(k) * max(R, 1.0 + beta) > 0.1 + 1e-12:
        raise ValueError(
            f"dt = {dt} violates the stability margin "
            f"dt * |k| * max(R, 1 + beta) <= 0.1 for k = {k}, R = {R}, beta = {beta}"
        )
    if spec is not None:
        rhs = lambda t, th, qq: full_rhs(t, th, qq, spec, beta, R, tol, max_iter, stats)
    else:
        rhs = lambda t, th, qq: couette_rhs(t, th, qq, k, grid.etas, beta, R)

    n_steps = int(round(t_max / dt))
    e0_eta, _ = _pointwise_energy_arrays(initial.theta.values, initial.q.values,
                                         initial.t, k, grid.etas, R)
    cell_share = e0_eta * grid.deta
    total0 = float(np.sum(cell_share))
    mask = cell_share >= ENERGY_MASK_SHARE * total0 if total0 > 0 else np.zeros(grid.n, bool)

    amp0 = max(np.max(np.abs(initial.theta.values)), np.max(np.abs(initial.q.values)))
    lo_const, hi_const = coercivity_constants(R) if R > 0 else (0.0, 0.0)

    times, e_series, lo_series, hi_series, es_series = [], [], [], [], []
    snapshots = []
    ratio_max = np.full(grid.n, np.nan)
    ratio_min = np.full(grid.n, np.nan)
    ratio_max[mask] = -np.inf
    ratio_min[mask] = np.inf

    def record(step, t, theta, q):
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(q))):
            raise StepUnstable(f"non-finite field at t = {t:.6g}")
        if amp0 > 0:
            amp = max(np.max(np.abs(theta)), np.max(np.abs(q)))
            if amp > BLOWUP_FACTOR * amp0:
                raise StepUnstable(
                    f"field amplitude grew by more than {BLOWUP_FACTOR:.0e} at t = {t:.6g}"
                )
        if step % record_every != 0 and step != n_steps:
            return
        e_eta, quad = _pointwise_energy_arrays(theta, q, t, k, grid.etas, R)
        times.append(t)
        e_series.append(float(grid.integrate(e_eta)))
        lo_series.append(lo_const * float(grid.integrate(quad)))
        hi_series.append(hi_const * float(grid.integrate(quad)))
        state = RawState(SpectralField(grid, theta.copy()), SpectralField(grid, q.copy()), t)
        if weights is not None:
            es_series.append(weighted_energy_Es(state, weights, s))
        else:
            es_series.append(math.nan)
        if np.any(mask):
            ratio = e_eta[mask] / e0_eta[mask]
            ratio_max[mask] = np.maximum(ratio_max[mask], ratio)
            ratio_min[mask] = np.minimum(ratio_min[mask], ratio)
        snapshots.append(state)

    rk4_integrate(rhs, initial.theta.values, initial.q.values, initial.t,
                  initial.t + n_steps * dt, dt, callback=record)

    report = EnergyReport(
        times=np.asarray(times),
        energy=np.asarray(e_series),
        energy_lower=np.asarray(lo_series),
        energy_upper=np.asarray(hi_series),
        energy_weighted=np.asarray(es_series),
        ratio_max_per_eta=ratio_max,
        ratio_min_per_eta=ratio_min,
    )
    return report, snapshots
