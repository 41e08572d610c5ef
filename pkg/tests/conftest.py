import numpy as np
import pytest

from anls import harmonic as hm
from anls import operator as op
from anls import potential as pt


def random_coeffs(rng, M, band=None, real=False, decay=0.0):
    """Complex Gaussian coefficients on |k| <= band (default M), scaled by (1+|k|)^-decay."""
    band = M if band is None else band
    k = np.arange(-M, M + 1)
    c = (rng.standard_normal(2 * M + 1) + 1j * rng.standard_normal(2 * M + 1)) / np.sqrt(2)
    c = c * (np.abs(k) <= band) * (1.0 + np.abs(k)) ** (-decay)
    return hm.symmetrize(c) if real else c


def random_field(rng, M, band=None, real=False, decay=0.0):
    return hm.FourierField(M, random_coeffs(rng, M, band, real, decay), real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def wn_system_64():
    """White noise (seed 3) with its Galerkin spectrum and map at M = 64."""
    V = pt.white_noise(128, 3)
    H = op.assemble(V, 64)
    return V, H, op.diagonalize(H), op.build_map(pt.build_reference(V))


@pytest.fixture(scope="session")
def wn_system_32():
    V = pt.white_noise(64, 3)
    H = op.assemble(V, 32)
    return V, H, op.diagonalize(H), op.build_map(pt.build_reference(V))
