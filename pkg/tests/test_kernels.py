import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anls import _pykernels, kernels

try:
    from anls import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _grid(seed, shape):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("m", [3, 4, 5, 6, 8])
def test_python_nonlinearity(m):
    u = _grid(0, (3, 17))
    assert np.allclose(kernels.nonlinearity(u, m, impl=_pykernels), np.abs(u) ** (m - 2) * u, rtol=1e-14)


def test_python_phase_rotate_preserves_modulus():
    u = _grid(1, 40)
    v = kernels.phase_rotate(u, 0.3, 4, impl=_pykernels)
    assert np.allclose(np.abs(v), np.abs(u), rtol=1e-15)
    assert np.allclose(v, u * np.exp(-0.3j * np.abs(u) ** 2), rtol=1e-14)


@pytest.mark.parametrize("p", [2.0, 4.0, 6.0, 3.5])
def test_python_power_sum(p):
    u = _grid(2, (2, 5, 9))
    out = kernels.power_sum(u, p, impl=_pykernels)
    assert out.shape == (2, 5)
    assert np.allclose(out, np.sum(np.abs(u) ** p, axis=-1), rtol=1e-13)


@needs_c
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(1, 4), n=st.integers(1, 300),
       m=st.integers(3, 9), coef=st.floats(-5, 5))
def test_compiled_matches_python(seed, rows, n, m, coef):
    u = _grid(seed, (rows, n))
    for name, args in (("nonlinearity", (m,)), ("phase_rotate", (coef, m)), ("power_sum", (float(m),))):
        c = getattr(kernels, name)(u, *args, impl=_ckernels)
        p = getattr(kernels, name)(u, *args, impl=_pykernels)
        # phase errors scale with the size of the rotation angle
        atol = 1e-15 * np.max(abs(coef) * np.abs(u) ** (m - 1)) if name == "phase_rotate" else 0
        assert np.allclose(c, p, rtol=1e-12, atol=atol), name


@needs_c
@pytest.mark.parametrize("p", [2.0, 2.5, 4.0, 6.0, 7.0])
def test_compiled_power_sum_fast_paths(p):
    u = _grid(3, (2, 64))
    assert np.allclose(kernels.power_sum(u, p, impl=_ckernels), np.sum(np.abs(u) ** p, axis=-1), rtol=1e-12)


def test_scalar_and_empty_inputs():
    assert kernels.nonlinearity(np.complex128(2.0), 4).shape == ()
    assert kernels.power_sum(np.zeros((3, 0)), 4.0).tolist() == [0.0, 0.0, 0.0]


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    code = "from anls import kernels; print(kernels.BACKEND, kernels._impl.__name__)"
    env = dict(os.environ, ANLS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "anls._pykernels"]
