import numpy as np
import pytest

from stratshear.shear import build_profile, sample_spectrum
from stratshear.spectral_ops import FrequencyGrid, SpectralField


@pytest.fixture(scope="session")
def grid256():
    return FrequencyGrid(k=1, eta_max=16.0, n=256)


@pytest.fixture(scope="session")
def bump_spectrum(grid256):
    # sigma * deta = 0.25 and eta_max * sigma = 32: resolution preconditions hold
    profile = build_profile("perturbed", a=0.05, sigma=2.0, y0=0.4, s=0.0)
    return profile, sample_spectrum(profile, grid256)


@pytest.fixture(scope="session")
def couette_spectrum(grid256):
    return sample_spectrum(build_profile("couette"), grid256)


def gaussian_field(grid, center=0.0, alpha=1.0, phase=0.0):
    vals = np.exp(-alpha * (grid.etas - center) ** 2) * np.exp(1j * phase * grid.etas)
    return SpectralField(grid, vals)


def operator_matrix(apply_fn, grid):
    """Dense matrix of a linear operator, column by column from unit vectors."""
    n = grid.n
    mat = np.empty((n, n), dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        mat[:, j] = apply_fn(SpectralField(grid, e)).values
    return mat
