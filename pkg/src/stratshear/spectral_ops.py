"""Discrete moving-frame operators on a truncated Y-frequency line.

The continuous frequency line is cut to [-eta_max, eta_max] and sampled on a
uniform midpoint grid (no point sits at eta = 0 or at the ends, so the grid
is exactly symmetric for even N).  Operators that multiply by a Y-profile
become discrete linear convolutions against the profile transform, weighted
by deta/(2 pi); fields are extended by zero beyond the grid, so convolutions
are linear, not circular, and cost O(N^2) as a dense Toeplitz matvec.

The two resolvents are computed by fixed-point (Neumann) iteration

    u <- f + K u,        K in {T_eps, B_eps},

with residual-based stopping; non-contraction raises ``NonConvergence``,
which signals a profile outside the perturbative regime or an under-resolved
grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .multipliers import eval_bl

__all__ = [
    "FrequencyGrid",
    "NonConvergence",
    "SolveStats",
    "SpectralField",
    "apply_B_eps",
    "apply_Bt",
    "apply_T_eps",
    "apply_inv_delta_t",
    "apply_inv_laplace_L",
    "apply_profile_convolution",
    "solve_TB",
    "solve_TL",
]


class NonConvergence(RuntimeError):
    """Neumann iteration failed to contract below tolerance."""

    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform symmetric grid of N Y-frequencies at fixed x-wavenumber k."""

    k: int
    eta_max: float
    n: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k == 0:
            raise ValueError("k must be a nonzero integer")
        if self.n <= 0 or self.n % 2 != 0:
            raise ValueError("N must be an even positive integer")
        if self.eta_max <= 0:
            raise ValueError("eta_max must be positive")

    @property
    def deta(self) -> float:
        return 2.0 * self.eta_max / self.n

    @cached_property
    def etas(self) -> np.ndarray:
        e = (np.arange(self.n) - (self.n - 1) / 2.0) * self.deta
        e.flags.writeable = False
        return e

    def shift(self, t):
        """eta - k t over the grid."""
        return self.etas - self.k * t

    def p(self, t):
        """Laplacian symbol k^2 + (eta - k t)^2 over the grid."""
        d = self.shift(t)
        return self.k * self.k + d * d

    def integrate(self, density):
        """Trapezoid quadrature of a sampled density over the grid."""
        return np.trapezoid(density, self.etas)


@dataclass
class SpectralField:
    """Complex values over a frequency grid; entries must stay finite."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectral field contains non-finite entries")

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.values.copy())

    def l2(self) -> float:
        """sqrt of the trapezoid integral of |values|^2."""
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2)))


def _same_grid(spec, u: SpectralField):
    if spec.grid is not u.grid and spec.grid != u.grid:
        raise ValueError("profile spectrum and field live on different grids")


def _conv_matrix(spec, name):
    """Dense Toeplitz matrix of the deta/(2 pi)-weighted linear convolution."""
    mat = spec._conv_cache.get(name)
    if mat is None:
        kern = {"g1": spec.kern_g1, "g2": spec.kern_g2, "b": spec.kern_b}[name]
        n = spec.grid.n
        idx = np.arange(n)
        scale = spec.grid.deta / (2.0 * math.pi)
        mat = scale * kern[idx[:, None] - idx[None, :] + n - 1]
        spec._conv_cache[name] = mat
    return mat


def apply_profile_convolution(spec, name, values):
    """Convolve raw values with one of the profile kernels ("g1", "g2", "b")."""
    return _conv_matrix(spec, name) @ values


def apply_inv_laplace_L(t, u: SpectralField) -> SpectralField:
    """Inverse constant-coefficient Laplacian: pointwise division by -p."""
    return SpectralField(u.grid, -u.values / u.grid.p(t))


def _t_eps_values(t, spec, values):
    grid = spec.grid
    d = grid.shift(t)
    p = grid.p(t)
    part_g = apply_profile_convolution(spec, "g2", (-(d * d) / p) * values)
    part_b = apply_profile_convolution(spec, "b", (1j * d / p) * values)
    return part_g + part_b


def apply_T_eps(t, spec, u: SpectralField) -> SpectralField:
    """Perturbative part of the sheared Laplacian, (I - T_eps) Delta_L form.

    In frequency space this is convolution of the g^2-1 transform against
    -(eta-kt)^2/p times the field, plus convolution of the b transform against
    i (eta-kt)/p times the field; both inner multipliers are bounded by 1.
    """
    _same_grid(spec, u)
    if spec.trivial:
        return SpectralField(u.grid, np.zeros_like(u.values))
    return SpectralField(u.grid, _t_eps_values(t, spec, u.values))


@dataclass
class SolveStats:
    """Worst-case diagnostics accumulated over Neumann solves."""

    solves: int = 0
    iterations_max: int = 0
    residual_max: float = 0.0
    ratio_max: float = 0.0

    def update(self, iterations, residual, ratio):
        self.solves += 1
        self.iterations_max = max(self.iterations_max, iterations)
        self.residual_max = max(self.residual_max, residual)
        self.ratio_max = max(self.ratio_max, ratio)


def _neumann_solve(apply_k, f_values, tol, max_iter, what, stats=None):
    """Solve u = f + K u by fixed-point iteration with update-based stopping.

    The update delta_n = ||u_{n+1} - u_n|| equals ||K (u_n - u_{n-1})||, so
    once the iteration contracts, delta_n <= tol ||f|| implies the residual
    ||u - f - K u|| <= ratio * tol * ||f|| < tol ||f||.
    """
    fnorm = float(np.linalg.norm(f_values))
    if fnorm == 0.0:
        return np.zeros_like(f_values), 0
    u = f_values.copy()
    prev_delta = None
    ratio_max = 0.0
    grew = 0
    for it in range(1, max_iter + 1):
        u_next = f_values + apply_k(u)
        delta = float(np.linalg.norm(u_next - u))
        u = u_next
        if delta <= tol * fnorm:
            if stats is not None:
                stats.update(it, delta / fnorm, ratio_max)
            return u, it
        if prev_delta is not None and prev_delta > 0.0:
            ratio = delta / prev_delta
            ratio_max = max(ratio_max, ratio)
            grew = grew + 1 if ratio >= 1.0 else 0
            if grew >= 3:
                raise NonConvergence(
                    f"{what}: update norm grew for 3 straight iterations "
                    f"(ratio {ratio:.3g}); perturbation outside the contractive regime",
                    iterations=it, residual=delta / fnorm,
                )
        prev_delta = delta
    raise NonConvergence(
        f"{what}: residual {prev_delta / fnorm:.3g} above tol {tol:.3g} "
        f"after {max_iter} iterations",
        iterations=max_iter, residual=prev_delta / fnorm,
    )


def solve_TL(t, spec, f: SpectralField, tol=1e-10, max_iter=50, stats=None) -> SpectralField:
    """Resolvent of the Laplacian perturbation: u with u = f + T_eps u."""
    _same_grid(spec, f)
    if spec.trivial:
        return f.copy()
    u, _ = _neumann_solve(lambda v: _t_eps_values(t, spec, v), f.values,
                          tol, max_iter, "solve_TL", stats)
    return SpectralField(f.grid, u)


def _b_eps_values(t, spec, beta, values, tol, max_iter, stats=None):
    grid = spec.grid
    d = grid.shift(t)
    p = grid.p(t)
    tl, _ = _neumann_solve(lambda v: _t_eps_values(t, spec, v), values,
                           tol, max_iter, "solve_TL", stats)
    corr = tl - values  # T_eps T_L applied to the input
    dmul = -1j * d / p  # symbol of (d_Y - t d_X) Delta_L^{-1}
    conv_direct = apply_profile_convolution(spec, "g1", dmul * values)
    conv_corr = apply_profile_convolution(spec, "g1", dmul * corr)
    bl = eval_bl(t, grid.k, grid.etas, beta)
    return beta * bl * (conv_direct + conv_corr + dmul * corr)


def apply_B_eps(t, spec, beta, u: SpectralField, tol=1e-10, max_iter=50,
                stats=None) -> SpectralField:
    """Perturbative part of the vorticity-correction resolvent.

    Sum of three terms, all premultiplied by beta and the stratification
    multiplier: the g-1 convolution of the sheared gradient of the inverse
    Laplacian, the same convolution of its T_eps T_L correction, and the bare
    correction.  Vanishes for beta = 0 and for the linear profile.
    """
    _same_grid(spec, u)
    if beta == 0.0 or spec.trivial:
        return SpectralField(u.grid, np.zeros_like(u.values))
    return SpectralField(u.grid, _b_eps_values(t, spec, beta, u.values, tol, max_iter, stats))


def solve_TB(t, spec, beta, f: SpectralField, tol=1e-10, max_iter=50,
             stats=None) -> SpectralField:
    """Resolvent of the vorticity-correction perturbation: u = f + B_eps u."""
    _same_grid(spec, f)
    if beta == 0.0 or spec.trivial:
        return f.copy()
    u, _ = _neumann_solve(
        lambda v: _b_eps_values(t, spec, beta, v, tol, max_iter, stats),
        f.values, tol, max_iter, "solve_TB", stats,
    )
    return SpectralField(f.grid, u)


def apply_Bt(t, spec, beta, u: SpectralField, tol=1e-10, max_iter=50,
             stats=None) -> SpectralField:
    """Vorticity correction: resolvent applied after the multiplier."""
    _same_grid(spec, u)
    bl = eval_bl(t, u.grid.k, u.grid.etas, beta)
    return solve_TB(t, spec, beta, SpectralField(u.grid, bl * u.values),
                    tol, max_iter, stats)


def apply_inv_delta_t(t, spec, u: SpectralField, tol=1e-10, max_iter=50,
                      stats=None) -> SpectralField:
    """Inverse of the full sheared Laplacian: resolvent then -1/p."""
    tl = solve_TL(t, spec, u, tol, max_iter, stats)
    return apply_inv_laplace_L(t, tl)
