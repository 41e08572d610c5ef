# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels (see ``anls.kernels`` for the public API)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, cos, sin

cnp.import_array()


cdef inline double _abs_pow(double re, double im, double p) nogil:
    cdef double a2 = re * re + im * im
    cdef double r = 1.0
    cdef int n, h
    if p != <int>p or p < 0 or p > 64:
        return pow(a2, 0.5 * p)
    n = <int>p
    h = n >> 1
    while h:
        r *= a2
        h -= 1
    if n & 1:
        r *= sqrt(a2)
    return r


def nonlinearity(double complex[:, ::1] u, int m):
    """Return ``|u|^(m-2) u`` for a C-contiguous 2-D complex array."""
    cdef Py_ssize_t i, k, n0 = u.shape[0], n1 = u.shape[1]
    out = np.empty((n0, n1), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double w, re, im, p = m - 2
    with nogil:
        for i in range(n0):
            for k in range(n1):
                re = u[i, k].real
                im = u[i, k].imag
                w = _abs_pow(re, im, p)
                o[i, k] = w * u[i, k]
    return out


def phase_rotate(double complex[:, ::1] u, double coef, int m):
    """Return ``u * exp(-i coef |u|^(m-2))``."""
    cdef Py_ssize_t i, k, n0 = u.shape[0], n1 = u.shape[1]
    out = np.empty((n0, n1), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double th, re, im, c, s, p = m - 2
    with nogil:
        for i in range(n0):
            for k in range(n1):
                re = u[i, k].real
                im = u[i, k].imag
                th = -coef * _abs_pow(re, im, p)
                c = cos(th)
                s = sin(th)
                o[i, k] = (re * c - im * s) + 1j * (re * s + im * c)
    return out


def power_sum(double complex[:, ::1] u, double p):
    """Row sums of ``|u|^p``."""
    cdef Py_ssize_t i, k, n0 = u.shape[0], n1 = u.shape[1]
    out = np.zeros(n0, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    with nogil:
        for i in range(n0):
            acc = 0.0
            for k in range(n1):
                acc = acc + _abs_pow(u[i, k].real, u[i, k].imag, p)
            o[i] = acc
    return out
