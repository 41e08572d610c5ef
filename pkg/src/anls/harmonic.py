"""Periodic fields, Littlewood-Paley blocks, Besov norms and Bony products.

Fields live on the unit circle ``T = R/Z`` and are stored as Fourier
coefficients ``c_k`` of ``e^{2 pi i k x}`` for ``k = -M..M``.  Grid values
are ``u(x_j) = sum_k c_k e^{2 pi i k x_j}`` with ``x_j = j/n``; the forward
transform is normalised so that ``c_k`` is the grid mean of
``u e^{-2 pi i k x}``.

The private helpers operate on coefficient arrays batched over leading axes;
the public functions wrap them for :class:`FourierField`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import BlockIndexError, DegenerateInputError, ParameterError, ShapeError

TWO_PI = 2.0 * np.pi
REALITY_TOL = 1e-12
PROFILES = ("sharp", "smooth")


def freqs(M: int) -> np.ndarray:
    """Integer frequencies ``-M..M``."""
    return np.arange(-M, M + 1)


def grid_size(M: int, order: int = 2) -> int:
    """Dealiased grid size for ``order``-fold products of band-``M`` fields."""
    return scipy.fft.next_fast_len(order * (2 * M + 1) + 1)


def band_of(c) -> int:
    n = np.shape(c)[-1]
    if n % 2 != 1:
        raise ShapeError(f"coefficient axis has even length {n}")
    return (n - 1) // 2


def to_grid(c, n: int | None = None) -> np.ndarray:
    """Values on ``n`` equispaced points of a band-limited coefficient array."""
    c = np.asarray(c, dtype=complex)
    M = band_of(c)
    n = grid_size(M) if n is None else int(n)
    if n <= 2 * M:
        raise ParameterError(f"grid of size {n} cannot resolve band {M}")
    a = np.zeros(c.shape[:-1] + (n,), dtype=complex)
    a[..., freqs(M) % n] = c
    return scipy.fft.ifft(a, axis=-1, norm="forward")


def from_grid(values, M: int) -> np.ndarray:
    """Coefficients ``-M..M`` of grid values (content above ``M`` is dropped)."""
    values = np.asarray(values, dtype=complex)
    n = values.shape[-1]
    if n <= 2 * M:
        raise ParameterError(f"grid of size {n} cannot resolve band {M}")
    a = scipy.fft.fft(values, axis=-1, norm="forward")
    return a[..., freqs(M) % n]


def resize(c, M: int) -> np.ndarray:
    """Zero-pad or truncate a coefficient array to band ``M``."""
    c = np.asarray(c, dtype=complex)
    M0 = band_of(c)
    if M == M0:
        return c.copy()
    if M > M0:
        out = np.zeros(c.shape[:-1] + (2 * M + 1,), dtype=complex)
        out[..., M - M0:M + M0 + 1] = c
        return out
    return c[..., M0 - M:M0 + M + 1].copy()


def product(a, b) -> np.ndarray:
    """Exact product of two band-``M`` arrays, returned at band ``2M``."""
    M = band_of(a)
    if band_of(b) != M:
        raise ShapeError("product of fields on different bands")
    n = grid_size(M)
    return from_grid(to_grid(a, n) * to_grid(b, n), 2 * M)


def symmetrize(c) -> np.ndarray:
    """Project onto conjugate-symmetric arrays (real fields)."""
    c = np.asarray(c, dtype=complex)
    return 0.5 * (c + np.conj(c[..., ::-1]))


def is_conjugate_symmetric(c, tol: float = REALITY_TOL) -> bool:
    c = np.asarray(c)
    scale = max(float(np.max(np.abs(c), initial=0.0)), 1e-300)
    return bool(np.max(np.abs(c - np.conj(c[..., ::-1])), initial=0.0) <= tol * scale)


def sobolev_weights(M: int, s: float) -> np.ndarray:
    k = freqs(M)
    return (1.0 + TWO_PI**2 * k * k) ** s


@dataclass(frozen=True, eq=False)
class FourierField:
    """Band-limited periodic field.

    Attributes:
        max_freq: Band limit ``M >= 1``.
        coeffs: Read-only complex array of length ``2M+1`` ordered ``k = -M..M``.
        reality: Whether the field is real valued (conjugate-symmetric coefficients).
    """

    max_freq: int
    coeffs: np.ndarray
    reality: bool = False

    def __post_init__(self):
        M = int(self.max_freq)
        if M < 1:
            raise ParameterError(f"max_freq must be >= 1, got {self.max_freq}")
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * M + 1,):
            raise ShapeError(f"expected {2 * M + 1} coefficients for M={M}, got shape {c.shape}")
        if self.reality and not is_conjugate_symmetric(c):
            raise ParameterError("coefficients are not conjugate symmetric")
        c.setflags(write=False)
        object.__setattr__(self, "max_freq", M)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "reality", bool(self.reality))

    @classmethod
    def zeros(cls, M: int, reality: bool = True) -> "FourierField":
        return cls(M, np.zeros(2 * M + 1), reality)

    @classmethod
    def mode(cls, M: int, k: int, amplitude: complex = 1.0) -> "FourierField":
        """Single Fourier mode ``amplitude * e^{2 pi i k x}``."""
        if abs(k) > M:
            raise ParameterError(f"mode {k} outside band {M}")
        c = np.zeros(2 * M + 1, dtype=complex)
        c[k + M] = amplitude
        return cls(M, c, k == 0 and np.imag(amplitude) == 0)

    @classmethod
    def real(cls, M: int, coeffs) -> "FourierField":
        """Real field from approximately symmetric coefficients (symmetrised)."""
        return cls(M, symmetrize(coeffs), True)

    @classmethod
    def from_grid(cls, values, M: int, reality: bool = False) -> "FourierField":
        c = from_grid(values, M)
        return cls(M, symmetrize(c) if reality else c, reality)

    @property
    def freqs(self) -> np.ndarray:
        return freqs(self.max_freq)

    def coeff(self, k: int) -> complex:
        if abs(k) > self.max_freq:
            return 0j
        return complex(self.coeffs[k + self.max_freq])

    def with_coeffs(self, c, reality: bool | None = None) -> "FourierField":
        reality = self.reality if reality is None else reality
        c = np.asarray(c, dtype=complex)
        return FourierField(band_of(c), symmetrize(c) if reality else c, reality)

    def to_grid(self, n: int | None = None) -> np.ndarray:
        v = to_grid(self.coeffs, n)
        return v.real.copy() if self.reality else v

    def resized(self, M: int) -> "FourierField":
        """Zero-padded or truncated copy at band ``M``."""
        return FourierField(M, resize(self.coeffs, M), self.reality)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def grid_l2_norm(self, n: int | None = None) -> float:
        return float(np.sqrt(np.mean(np.abs(to_grid(self.coeffs, n)) ** 2)))

    def lp_norm(self, p: float, n: int | None = None) -> float:
        """``L^p`` norm by the rectangle rule on the dealiased grid."""
        v = np.abs(to_grid(self.coeffs, n))
        if np.isinf(p):
            return float(v.max())
        return float(np.mean(v**p) ** (1.0 / p))

    def sobolev_norm(self, s: float) -> float:
        """``(sum_k (1 + 4 pi^2 k^2)^s |c_k|^2)^{1/2}``."""
        return float(np.sqrt(np.sum(sobolev_weights(self.max_freq, s) * np.abs(self.coeffs) ** 2)))

    def inner(self, other: "FourierField") -> complex:
        """``<u, v> = integral u conj(v)``."""
        _check_same(self, other)
        return complex(np.vdot(other.coeffs, self.coeffs))

    def derivative(self, order: int = 1) -> "FourierField":
        return FourierField(self.max_freq, (2j * np.pi * self.freqs) ** order * self.coeffs, self.reality)

    def laplacian(self) -> "FourierField":
        return FourierField(self.max_freq, -(TWO_PI**2) * self.freqs**2 * self.coeffs, self.reality)

    def conj(self) -> "FourierField":
        return FourierField(self.max_freq, np.conj(self.coeffs[::-1]), self.reality)

    def __add__(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        _check_same(self, other)
        return FourierField(self.max_freq, self.coeffs + other.coeffs, self.reality and other.reality)

    def __sub__(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        _check_same(self, other)
        return FourierField(self.max_freq, self.coeffs - other.coeffs, self.reality and other.reality)

    def __neg__(self):
        return FourierField(self.max_freq, -self.coeffs, self.reality)

    def __mul__(self, a):
        if isinstance(a, FourierField) or not np.isscalar(a):
            return NotImplemented
        real = self.reality and np.imag(a) == 0
        return FourierField(self.max_freq, a * self.coeffs, real)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return self * (1.0 / a)


def _check_same(u: FourierField, v: FourierField):
    if u.max_freq != v.max_freq:
        raise ShapeError(f"band mismatch: {u.max_freq} vs {v.max_freq}")


def _smooth_profile(r):
    """Radial cut-off equal to 1 on ``[0, 1/2]`` and 0 on ``[1, inf)``."""
    r = np.asarray(r, dtype=float)
    mid = np.cos(0.5 * np.pi * np.clip(2.0 * r - 1.0, 0.0, 1.0)) ** 2
    return np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, mid))


@dataclass(frozen=True)
class DyadicAnalysis:
    """Dyadic partition of unity on the band ``|k| <= M``.

    Block ``-1`` holds the lowest frequencies and block ``j >= 0`` the
    annulus ``2^j < |k| <= 2^{j+1}`` (sharp profile) or a raised-cosine
    smoothing of it (smooth profile).  ``J`` is the least integer with
    ``2^J >= M``.
    """

    max_freq: int
    profile: str = "sharp"

    def __post_init__(self):
        if self.max_freq < 1:
            raise ParameterError("max_freq must be >= 1")
        if self.profile not in PROFILES:
            raise ParameterError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")

    @property
    def num_blocks(self) -> int:
        """``J``; blocks are indexed ``-1..J``."""
        return max(0, int(np.ceil(np.log2(self.max_freq))))

    @property
    def blocks(self) -> range:
        return range(-1, self.num_blocks + 1)

    @cached_property
    def multipliers(self) -> np.ndarray:
        """Read-only array of shape ``(J+2, 2M+1)``; row ``j+1`` is block ``j``."""
        ak = np.abs(freqs(self.max_freq)).astype(float)
        J = self.num_blocks
        if self.profile == "sharp":
            rows = [ak <= 1]
            rows += [(ak > 2**j) & (ak <= 2 ** (j + 1)) for j in range(J + 1)]
            out = np.array(rows, dtype=float)
        else:
            cum = [_smooth_profile(ak / 2.0 ** (j + 1)) for j in range(-1, J + 1)]
            cum[-1] = np.ones_like(ak)  # top block absorbs the remainder of the band
            out = np.array([cum[0]] + [cum[i] - cum[i - 1] for i in range(1, J + 2)])
        out.setflags(write=False)
        return out

    @cached_property
    def low_pass(self) -> np.ndarray:
        """Cumulative multipliers; row ``j+1`` is ``S_j = sum_{n<=j} Delta_n``."""
        out = np.cumsum(self.multipliers, axis=0)
        out.setflags(write=False)
        return out

    def multiplier(self, j: int) -> np.ndarray:
        self._check_block(j)
        return self.multipliers[j + 1]

    def _check_block(self, j):
        if not -1 <= j <= self.num_blocks:
            raise BlockIndexError(f"block {j} outside -1..{self.num_blocks}")

    def for_band(self, M: int) -> "DyadicAnalysis":
        return self if M == self.max_freq else DyadicAnalysis(M, self.profile)


def _analysis_for(da: DyadicAnalysis | None, M: int) -> DyadicAnalysis:
    if da is None:
        return DyadicAnalysis(M)
    if da.max_freq != M:
        raise ShapeError(f"dyadic analysis built for band {da.max_freq}, field has band {M}")
    return da


def lp_block(u: FourierField, j: int, da: DyadicAnalysis | None = None) -> FourierField:
    """``Delta_j u``."""
    da = _analysis_for(da, u.max_freq)
    return FourierField(u.max_freq, da.multiplier(j) * u.coeffs, u.reality)


def _block_grid(c, da: DyadicAnalysis, n: int) -> np.ndarray:
    """Grid values of every block, shape ``(J+2, ..., n)``."""
    mult = da.multipliers.reshape((da.multipliers.shape[0],) + (1,) * (np.ndim(c) - 1) + (-1,))
    return to_grid(mult * c, n)


def block_norms(u: FourierField, da: DyadicAnalysis | None = None, p: float = np.inf, n: int | None = None) -> np.ndarray:
    """``||Delta_j u||_{L^p}`` for ``j = -1..J`` on the dealiased grid."""
    da = _analysis_for(da, u.max_freq)
    n = grid_size(u.max_freq) if n is None else n
    v = np.abs(_block_grid(u.coeffs, da, n))
    if np.isinf(p):
        return v.max(axis=-1)
    return np.mean(v**p, axis=-1) ** (1.0 / p)


def block_table(u: FourierField, da: DyadicAnalysis | None = None) -> list[tuple[int, float, float]]:
    """Rows ``(j, block_linf, block_l2)``."""
    da = _analysis_for(da, u.max_freq)
    linf = block_norms(u, da, np.inf)
    l2 = block_norms(u, da, 2.0)
    return [(j, float(a), float(b)) for j, a, b in zip(da.blocks, linf, l2)]


def besov_norm(u: FourierField, alpha: float, p: float, q: float, da: DyadicAnalysis | None = None,
               n: int | None = None) -> float:
    """``(sum_j 2^{alpha j q} ||Delta_j u||_{L^p}^q)^{1/q}``; supremum when ``q = inf``."""
    if p < 1 or q < 1:
        raise ParameterError(f"Besov indices need p, q >= 1 (got p={p}, q={q})")
    da = _analysis_for(da, u.max_freq)
    n = grid_size(u.max_freq) if n is None else n
    if n < 2 * (2 * u.max_freq + 1):
        raise ParameterError("L^p quadrature grid is too coarse")
    terms = 2.0 ** (alpha * np.arange(-1, da.num_blocks + 1)) * block_norms(u, da, p, n)
    if np.isinf(q):
        return float(terms.max())
    return float(np.sum(terms**q) ** (1.0 / q))


def holder_norm(u: FourierField, beta: float, da: DyadicAnalysis | None = None) -> float:
    """``C^beta = B^beta_{inf,inf}`` norm."""
    return besov_norm(u, beta, np.inf, np.inf, da)


def holder_slope(u: FourierField, da: DyadicAnalysis | None = None, j_min: int = 3, j_max: int = 8) -> float:
    """Estimated Hoelder exponent: minus the fitted slope of ``log2 ||Delta_j u||_inf`` in ``j``."""
    da = _analysis_for(da, u.max_freq)
    if j_max - j_min < 3:
        raise ParameterError("need at least four blocks (j_max - j_min >= 3)")
    da._check_block(j_min)
    da._check_block(j_max)
    norms = block_norms(u, da)[j_min + 1:j_max + 2]
    if np.any(norms < 1e-300):
        raise DegenerateInputError("a block in the fitting range is numerically zero")
    j = np.arange(j_min, j_max + 1)
    return float(-np.polyfit(j, np.log2(norms), 1)[0])


def _low_blocks_from(da: DyadicAnalysis, n_min: int) -> np.ndarray:
    """Block multipliers with every block below ``n_min`` removed."""
    mult = da.multipliers.copy()
    mult[: max(n_min + 1, 0)] = 0.0
    return mult


def _paraproduct_coeffs(a, b, da: DyadicAnalysis, n_min: int = -1) -> np.ndarray:
    """``sum_m S_{m-2}a Delta_m b`` at band ``2M``, using only ``a``-blocks ``>= n_min``."""
    M = da.max_freq
    n = grid_size(M)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    ext = (1,) * len(shape)
    low = np.cumsum(_low_blocks_from(da, n_min), axis=0)
    acc = np.zeros(shape + (n,), dtype=complex)
    for m in range(1, da.num_blocks + 1):
        s = low[m - 1]  # S_{m-2}: cumulative row index (m-2)+1
        if not s.any():
            continue
        bm = da.multipliers[m + 1]
        if not bm.any():
            continue
        acc = acc + to_grid(s.reshape(ext + (-1,)) * a, n) * to_grid(bm.reshape(ext + (-1,)) * b, n)
    return from_grid(acc, 2 * M)


def _resonant_coeffs(a, b, da: DyadicAnalysis) -> np.ndarray:
    M = da.max_freq
    n = grid_size(M)
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    ga = _block_grid(a, da, n)
    gb = _block_grid(b, da, n)
    near = gb.copy()
    near[1:] += gb[:-1]
    near[:-1] += gb[1:]
    return from_grid(np.sum(ga * near, axis=0), 2 * M)


def _check_pair(u, v, da):
    _check_same(u, v)
    return _analysis_for(da, u.max_freq)


def _dyadic_log(N) -> int:
    if isinstance(N, (bool, np.bool_)) or int(N) != N or N < 1 or int(N) & (int(N) - 1):
        raise ParameterError(f"N must be a power of two >= 1, got {N}")
    return int(N).bit_length() - 1


def _wrap(c, real):
    M = band_of(c)
    return FourierField(M, symmetrize(c) if real else c, real)


def pointwise_product(u: FourierField, v: FourierField) -> FourierField:
    """Exact product ``uv`` at band ``2M``."""
    _check_same(u, v)
    return _wrap(product(u.coeffs, v.coeffs), u.reality and v.reality)


def paraproduct(u: FourierField, v: FourierField, da: DyadicAnalysis | None = None) -> FourierField:
    """Bony paraproduct ``P_u v = sum_m S_{m-2}u Delta_m v`` (band ``2M``)."""
    da = _check_pair(u, v, da)
    return _wrap(_paraproduct_coeffs(u.coeffs, v.coeffs, da), u.reality and v.reality)


def resonant(u: FourierField, v: FourierField, da: DyadicAnalysis | None = None) -> FourierField:
    """Resonant product ``sum_{|n-m|<=1} Delta_n u Delta_m v`` (band ``2M``)."""
    da = _check_pair(u, v, da)
    return _wrap(_resonant_coeffs(u.coeffs, v.coeffs, da), u.reality and v.reality)


def truncated_paraproduct(u: FourierField, v: FourierField, N: int, da: DyadicAnalysis | None = None) -> FourierField:
    """Paraproduct restricted to block pairs with ``2^n, 2^m >= N``.

    Block ``-1`` counts as ``2^0`` so that ``N = 1`` gives the full paraproduct.
    """
    n_min = _dyadic_log(N)
    da = _check_pair(u, v, da)
    return _wrap(_paraproduct_coeffs(u.coeffs, v.coeffs, da, n_min if n_min > 0 else -1),
                 u.reality and v.reality)
