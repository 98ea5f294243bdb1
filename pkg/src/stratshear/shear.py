"""Background shear profiles near the linear one and their Fourier data.

A profile is U(y) = y + a * phi((y - y0)/sigma) with phi the odd primitive of
a unit Gaussian bump, so U' - 1 and U'' are Schwartz functions of y.  The
moving-frame coefficient functions are

    g(Y) = U'(U^{-1}(Y)),     b(Y) = U''(U^{-1}(Y)),

and the smallness of the profile is measured as

    epsilon = ||g - 1||_{s+5} + ||b||_{s+4}

in the frequency-side Sobolev norms below.  Monotonicity of U (needed for the
inverse) is guaranteed by |a| * sup|phi'| / sigma = |a|/sigma < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .spectral_ops import FrequencyGrid

__all__ = [
    "GridResolutionError",
    "ProfileSpectrum",
    "ShearProfile",
    "build_profile",
    "fourier_transform_samples",
    "sample_spectrum",
    "sobolev_norm",
]

_SQRT_PI = math.sqrt(math.pi)
_INVERSION_TOL = 1e-13


class GridResolutionError(ValueError):
    """Frequency grid too coarse or too short to carry the profile spectrum."""


def _bump(z):
    return np.exp(-np.asarray(z, dtype=float) ** 2)


def _bump_primitive(z):
    # odd, with sup of the derivative equal to 1 and range (-sqrt(pi)/2, sqrt(pi)/2)
    return 0.5 * _SQRT_PI * erf(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class ShearProfile:
    """Monotone background shear U(y) = y + a * phi((y - y0)/sigma).

    ``epsilon`` is the measured g/b smallness at Sobolev offset orders
    (s+5, s+4); ``epsilon_velocity`` the companion H^6/H^5 measurement of
    (U'-1, U'').  Both are 0 for the plain linear profile.  Instances are
    immutable and safe to share across workers.
    """

    kind: str
    amplitude: float = 0.0
    width: float = 1.0
    center: float = 0.0
    sobolev_order: float = 0.0
    epsilon: float = 0.0
    epsilon_velocity: float = 0.0

    @property
    def is_couette(self) -> bool:
        return self.kind == "couette" or self.amplitude == 0.0

    def u(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_couette:
            return y
        return y + self.amplitude * _bump_primitive((y - self.center) / self.width)

    def u_prime(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_couette:
            return np.ones_like(y)
        return 1.0 + (self.amplitude / self.width) * _bump((y - self.center) / self.width)

    def u_second(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_couette:
            return np.zeros_like(y)
        z = (y - self.center) / self.width
        return (self.amplitude / self.width**2) * (-2.0 * z) * _bump(z)

    def u_inverse(self, Y):
        """Invert U by clamped Newton iteration, tolerance ~1e-13 in y.

        Convergence is guaranteed because U' >= 1 - |a|/sigma > 0 and the root
        lies within |a| sqrt(pi)/2 of Y.
        """
        Y = np.asarray(Y, dtype=float)
        if self.is_couette:
            return Y.copy()
        span = abs(self.amplitude) * (0.5 * _SQRT_PI) + 1e-9
        lo, hi = Y - span, Y + span
        y = Y.copy()
        for _ in range(100):
            f = self.u(y) - Y
            if np.max(np.abs(f)) <= _INVERSION_TOL:
                break
            y = np.clip(y - f / self.u_prime(y), lo, hi)
        return y

    def g(self, Y):
        """Moving-frame shear rate U' o U^{-1}."""
        if self.is_couette:
            return np.ones_like(np.asarray(Y, dtype=float))
        return self.u_prime(self.u_inverse(Y))

    def b(self, Y):
        """Moving-frame curvature U'' o U^{-1}."""
        if self.is_couette:
            return np.zeros_like(np.asarray(Y, dtype=float))
        return self.u_second(self.u_inverse(Y))


def fourier_transform_samples(y, values, etas):
    """Trapezoid approximation of integral values(y) * exp(-i eta y) dy.

    ``y`` must be uniformly spaced and wide enough that the sampled function
    is negligible at the window ends.  Evaluation is chunked over ``etas`` to
    bound memory.
    """
    y = np.asarray(y, dtype=float)
    values = np.asarray(values)
    etas = np.asarray(etas, dtype=float)
    h = y[1] - y[0]
    wts = np.full(y.shape, h)
    wts[0] = wts[-1] = 0.5 * h
    weighted = values * wts
    out = np.empty(etas.shape, dtype=complex)
    chunk = 256
    for i in range(0, etas.size, chunk):
        block = etas[i : i + chunk]
        out[i : i + chunk] = np.exp(-1j * np.outer(block, y)) @ weighted
    return out


def _profile_window(profile: ShearProfile, eta_hi: float):
    halfwidth = 9.0 * profile.width + abs(profile.amplitude) + 1.0
    h = min(profile.width / 10.0, math.pi / (8.0 * max(eta_hi, 1.0)))
    n = int(math.ceil(2.0 * halfwidth / h)) + 1
    return np.linspace(profile.center - halfwidth, profile.center + halfwidth, n)


def profile_transforms(profile: ShearProfile, etas):
    """Transforms of (g - 1, g^2 - 1, b) sampled at the given frequencies."""
    etas = np.asarray(etas, dtype=float)
    if profile.is_couette:
        z = np.zeros(etas.shape, dtype=complex)
        return z, z.copy(), z.copy()
    Y = _profile_window(profile, float(np.max(np.abs(etas))))
    yin = profile.u_inverse(Y)
    gm1 = profile.u_prime(yin) - 1.0
    g2m1 = gm1 * (gm1 + 2.0)
    bb = profile.u_second(yin)
    return (
        fourier_transform_samples(Y, gm1, etas),
        fourier_transform_samples(Y, g2m1, etas),
        fourier_transform_samples(Y, bb, etas),
    )


def sobolev_norm(etas, fhat, order, k=None):
    """Frequency-side Sobolev norm sqrt( int <.>^{2 order} |fhat|^2 d eta ).

    Uses the one-dimensional bracket <eta> for pure Y-profiles and the full
    bracket <(k, eta)> when the x-wavenumber is supplied.  Trapezoid rule on
    the sampled points; at order 0 this is the plain L^2 norm of the transform
    (a factor sqrt(2 pi) above the physical-space L^2 norm).
    """
    etas = np.asarray(etas, dtype=float)
    fhat = np.asarray(fhat)
    base = 1.0 + etas**2 + (0.0 if k is None else float(k) ** 2)
    density = base**order * np.abs(fhat) ** 2
    return float(np.sqrt(np.trapezoid(density, etas)))


def _measurement_etas(profile: ShearProfile, order: float):
    # Wide enough that <eta>^{2*order} |fhat|^2 has decayed below 1e-30.
    hi = (10.0 + 2.0 * order) * max(1.0, 2.0 / profile.width)
    return np.linspace(-hi, hi, 2001)


def _measure_epsilon(profile: ShearProfile, s: float):
    etas = _measurement_etas(profile, s + 5.0)
    g1hat, _, bhat = profile_transforms(profile, etas)
    return sobolev_norm(etas, g1hat, s + 5.0) + sobolev_norm(etas, bhat, s + 4.0)


def _measure_epsilon_velocity(profile: ShearProfile):
    etas = _measurement_etas(profile, 6.0)
    Y = _profile_window(profile, float(np.max(np.abs(etas))))
    up_m1 = profile.u_prime(Y) - 1.0
    usec = profile.u_second(Y)
    n_up = sobolev_norm(etas, fourier_transform_samples(Y, up_m1, etas), 6.0)
    n_us = sobolev_norm(etas, fourier_transform_samples(Y, usec, etas), 5.0)
    return n_up + n_us


def build_profile(kind, a=0.0, sigma=1.0, y0=0.0, s=0.0) -> ShearProfile:
    """Construct a shear profile and measure its smallness.

    ``kind`` is "couette" (ignores the bump parameters) or "perturbed".
    Rejects non-monotone parameter choices: monotonicity of U requires
    |a| * sup|phi'| / sigma = |a|/sigma < 1.
    """
    if kind not in ("couette", "perturbed"):
        raise ValueError(f"unknown profile kind {kind!r}")
    if kind == "couette":
        return ShearProfile(kind="couette", sobolev_order=s)
    if sigma <= 0:
        raise ValueError("bump width sigma must be positive")
    if abs(a) / sigma >= 1.0:
        raise ValueError(
            f"non-monotone shear: |a| * sup|phi'| / sigma = {abs(a) / sigma:.3g} >= 1"
        )
    base = ShearProfile(kind="perturbed", amplitude=a, width=sigma, center=y0,
                        sobolev_order=s)
    if a == 0.0:
        return base
    eps = _measure_epsilon(base, s)
    eps_vel = _measure_epsilon_velocity(base)
    return ShearProfile(kind="perturbed", amplitude=a, width=sigma, center=y0,
                        sobolev_order=s, epsilon=eps, epsilon_velocity=eps_vel)


@dataclass
class ProfileSpectrum:
    """Profile transforms sampled for one frequency grid.

    ``g1hat``, ``g2hat`` and ``bhat`` hold the transforms of g-1, g^2-1 and b
    on the grid points (Hermitian-symmetric since the profiles are real).
    ``kern_*`` hold the same transforms on the (2N-1)-point difference lattice
    that the linear convolution needs; convolution matrices built from them
    are cached on first use.
    """

    grid: FrequencyGrid
    g1hat: np.ndarray
    g2hat: np.ndarray
    bhat: np.ndarray
    kern_g1: np.ndarray
    kern_g2: np.ndarray
    kern_b: np.ndarray
    trivial: bool = False
    _conv_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.trivial = bool(
            not np.any(self.kern_g1) and not np.any(self.kern_g2) and not np.any(self.kern_b)
        )


def sample_spectrum(profile: ShearProfile, grid: FrequencyGrid) -> ProfileSpectrum:
    """Sample the profile transforms on a grid and its difference lattice.

    For perturbed profiles the grid must resolve the bump:
    sigma * deta <= 1/4 (sampling) and eta_max * sigma >= 20 (truncation);
    otherwise aliasing or tail loss would corrupt the convolution operators.
    """
    n = grid.n
    lattice = np.arange(-(n - 1), n) * grid.deta
    if profile.is_couette:
        zg = np.zeros(n, dtype=complex)
        zk = np.zeros(2 * n - 1, dtype=complex)
        return ProfileSpectrum(grid, zg, zg.copy(), zg.copy(), zk, zk.copy(), zk.copy())
    if profile.width * grid.deta > 0.25:
        raise GridResolutionError(
            f"sigma * deta = {profile.width * grid.deta:.4g} > 1/4: grid spacing "
            "too coarse for the profile width"
        )
    if grid.eta_max * profile.width < 20.0:
        raise GridResolutionError(
            f"eta_max * sigma = {grid.eta_max * profile.width:.4g} < 20: grid too "
            "short to carry the profile spectrum"
        )
    stacked = np.concatenate([grid.etas, lattice])
    g1, g2, bb = profile_transforms(profile, stacked)
    return ProfileSpectrum(
        grid,
        g1hat=g1[:n], g2hat=g2[:n], bhat=bb[:n],
        kern_g1=g1[n:], kern_g2=g2[n:], kern_b=bb[n:],
    )
