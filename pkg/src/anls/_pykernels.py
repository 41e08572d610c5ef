"""Pure numpy versions of the compiled kernels."""
import numpy as np


def _abs_pow(u, p):
    a2 = u.real * u.real + u.imag * u.imag
    if p == 2:
        return a2
    if p == 4:
        return a2 * a2
    if p == 6:
        return a2 * a2 * a2
    return a2 ** (0.5 * p)


def nonlinearity(u, m):
    return _abs_pow(u, m - 2) * u


def phase_rotate(u, coef, m):
    return u * np.exp(-1j * coef * _abs_pow(u, m - 2))


def power_sum(u, p):
    return _abs_pow(u, p).sum(axis=-1)
