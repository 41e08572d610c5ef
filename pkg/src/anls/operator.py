"""Galerkin Hamiltonian ``-d^2/dx^2 + V``, its spectrum, and the paracontrolled maps.

The Hamiltonian is discretised in the exponential Fourier basis ``|k| <= M``.
Rough potentials enter the paracontrolled description through the reference
field ``X`` and the maps ``Phi(u) = u - P^N_u X`` and ``Gamma = Phi^{-1}``.
"""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import harmonic as hm
from .errors import ConstructionError, NumericError, ParameterError, ShapeError
from .harmonic import TWO_PI, DyadicAnalysis, FourierField
from .potential import Potential, ReferenceField
from .rng import complex_normal, stream

HERMITIAN_TOL = 1e-12
CONTRACTION_TARGET = 0.4
POWER_STEPS = 30
PHASE_TIE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class GalerkinHamiltonian:
    """``A_{kl} = 4 pi^2 k^2 [k = l] + V(k - l)`` on ``|k|, |l| <= M``."""

    max_freq: int
    matrix: np.ndarray
    potential: Potential


def assemble(V: Potential, M: int) -> GalerkinHamiltonian:
    """Assemble the Galerkin matrix; ``V`` is zero-padded (with a warning) below band ``2M``."""
    if int(M) != M or M < 1:
        raise ParameterError(f"max_freq must be a positive integer, got {M}")
    M = int(M)
    L = 2 * M
    if V.max_freq < L:
        warnings.warn(f"potential band {V.max_freq} < 2M = {L}; missing modes treated as zero",
                      stacklevel=2)
    c = hm.resize(V.field.coeffs, L)
    A = scipy.linalg.toeplitz(c[L:], c[L::-1])
    A[np.diag_indices_from(A)] += TWO_PI**2 * hm.freqs(M) ** 2
    if np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(A))):
        raise NumericError("assembled matrix is not Hermitian")
    A.setflags(write=False)
    return GalerkinHamiltonian(M, A, V)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of a Galerkin Hamiltonian, ascending.

    ``vectors[:, n]`` holds the Fourier coefficients of ``e_{n+1}``.
    """

    max_freq: int
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def ground_gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def eigenfields(self) -> list[FourierField]:
        return [self.eigenfield(n) for n in range(self.n_modes)]

    def eigenfield(self, n: int) -> FourierField:
        """``e_{n+1}`` (zero-based index)."""
        return FourierField(self.max_freq, self.vectors[:, n])

    def truncated(self, n_modes: int) -> "SpectralDecomposition":
        if not 1 <= n_modes <= self.n_modes:
            raise ParameterError(f"n_modes must lie in 1..{self.n_modes}")
        return SpectralDecomposition(self.max_freq, self.eigenvalues[:n_modes], self.vectors[:, :n_modes])

    def coefficients(self, c) -> np.ndarray:
        """Eigen-coefficients ``<u, e_n>`` of Fourier coefficient rows."""
        return np.asarray(c) @ self.vectors.conj()

    def synthesize(self, a) -> np.ndarray:
        """Fourier coefficients of ``sum_n a_n e_n``."""
        return np.asarray(a) @ self.vectors.T

    def project(self, u: FourierField) -> FourierField:
        return FourierField(self.max_freq, self.synthesize(self.coefficients(u.coeffs)))


def _fix_phases(U: np.ndarray, M: int) -> np.ndarray:
    k = hm.freqs(M)
    order = np.lexsort((k, np.abs(k)))  # lowest |k| first, then negative before positive
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    U = U.copy()
    mags = np.abs(U)
    for n in range(U.shape[1]):
        col = mags[:, n]
        cand = np.flatnonzero(col >= col.max() * (1.0 - PHASE_TIE_RTOL))
        i = cand[np.argmin(rank[cand])]
        U[:, n] *= np.conj(U[i, n]) / col[i]
        U[i, n] = col[i]
    return U


def diagonalize(H: GalerkinHamiltonian) -> SpectralDecomposition:
    """Full Hermitian eigendecomposition with deterministic phases."""
    try:
        w, U = scipy.linalg.eigh(H.matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed: {exc}", condition=float(np.linalg.cond(H.matrix))) from exc
    U = _fix_phases(U, H.max_freq)
    w.setflags(write=False)
    U.setflags(write=False)
    return SpectralDecomposition(H.max_freq, w, U)


def apply_H(H: GalerkinHamiltonian, u: FourierField) -> FourierField:
    if u.max_freq != H.max_freq:
        raise ShapeError(f"field band {u.max_freq} does not match operator band {H.max_freq}")
    return u.with_coeffs(H.matrix @ u.coeffs)


def d_shift(spec: SpectralDecomposition) -> float:
    """Spectral shift ``s`` making ``1 + lambda_n - s > 0``; zero when no shift is needed."""
    lam1 = float(spec.eigenvalues[0])
    return 0.0 if 1.0 + lam1 > 0 else lam1 - 1.0


def sobolev_D_norm(spec: SpectralDecomposition, u: FourierField, sigma: float, return_shift: bool = False):
    """``(sum_n (1 + lambda_n - s)^sigma |<u, e_n>|^2)^{1/2}`` with ``s = d_shift(spec)``."""
    if u.max_freq != spec.max_freq:
        raise ShapeError("field and spectral decomposition live on different bands")
    s = d_shift(spec)
    a = spec.coefficients(u.coeffs)
    val = float(np.sqrt(np.sum((1.0 + spec.eigenvalues - s) ** sigma * np.abs(a) ** 2)))
    return (val, s) if return_shift else val


# paracontrolled maps

def _n_min(N: int) -> int:
    n = hm._dyadic_log(N)
    return n if n > 0 else -1


def _t_apply(X: np.ndarray, da: DyadicAnalysis, N: int, C) -> np.ndarray:
    """``Pi_L P^N_C X`` for coefficient rows ``C`` at the band ``L`` of ``X``."""
    L = da.max_freq
    return hm.resize(hm._paraproduct_coeffs(C, X, da, _n_min(N)), L)


def _t_adjoint(X: np.ndarray, da: DyadicAnalysis, N: int, W) -> np.ndarray:
    """Adjoint of :func:`_t_apply` on ``L^2``: ``sum_m S^N_{m-2} Pi_L(conj(Delta_m X) w)``."""
    L = da.max_freq
    n = hm.grid_size(L)
    low = np.cumsum(hm._low_blocks_from(da, _n_min(N)), axis=0)
    gw = hm.to_grid(W, n)
    out = np.zeros(np.shape(W), dtype=complex)
    for m in range(1, da.num_blocks + 1):
        s = low[m - 1]
        if not s.any():
            continue
        gx = hm.to_grid(da.multipliers[m + 1] * X, n)
        out = out + s * hm.from_grid(np.conj(gx) * gw, L)
    return out


def contraction_estimate(X: ReferenceField, N: int, da: DyadicAnalysis | None = None,
                         steps: int = POWER_STEPS, seed: int = 0) -> float:
    """Power-iteration estimate of ``||u -> P^N_u X||_{L^2 -> L^2}`` on the band of ``X``."""
    L = X.X.max_freq
    da = hm._analysis_for(da, L)
    Xc = X.X.coeffs
    if not np.any(Xc):
        return 0.0
    x = complex_normal(stream(seed, "power_iteration", N), 2 * L + 1)
    x /= np.linalg.norm(x)
    for _ in range(steps):
        y = _t_adjoint(Xc, da, N, _t_apply(Xc, da, N, x))
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
    return float(np.linalg.norm(_t_apply(Xc, da, N, x)))


@dataclass(frozen=True, eq=False)
class ParacontrolledMap:
    """Realises ``Phi_N(u) = u - P^N_u X`` and its inverse ``Gamma_N``.

    ``estimates`` records ``(N, contraction)`` for every cutoff tried while
    building.  Band-``M`` matrices of ``u -> Pi_M P^N_u X`` are cached
    lazily for batched use.
    """

    N: int
    X: ReferenceField
    da: DyadicAnalysis
    contraction: float
    max_iter: int = 200
    tol: float = 1e-12
    estimates: tuple = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    @property
    def band(self) -> int:
        return self.X.X.max_freq

    def _check(self, M: int):
        if M > self.band:
            raise ShapeError(f"field band {M} exceeds the reference band {self.band}")

    def t_apply(self, C) -> np.ndarray:
        """``Pi_M P^N_u X`` for coefficient rows at band ``M <= band``."""
        M = hm.band_of(C)
        self._check(M)
        return hm.resize(_t_apply(self.X.X.coeffs, self.da, self.N, hm.resize(C, self.band)), M)

    def t_matrix(self, M: int) -> np.ndarray:
        """Matrix ``R`` with ``C @ R == t_apply(C)`` for band-``M`` rows."""
        self._check(M)
        with self._lock:
            R = self._cache.get(M)
            if R is None:
                R = self.t_apply(np.eye(2 * M + 1, dtype=complex))
                R.setflags(write=False)
                self._cache[M] = R
        return R


def build_map(X: ReferenceField, da: DyadicAnalysis | None = None, target: float = CONTRACTION_TARGET,
              seed: int = 0, max_iter: int = 200, tol: float = 1e-12) -> ParacontrolledMap:
    """Choose the smallest dyadic ``N`` whose estimated contraction is ``<= target``."""
    L = X.X.max_freq
    da = hm._analysis_for(da, L)
    tried = []
    for e in range(da.num_blocks + 2):
        N = 2**e
        est = contraction_estimate(X, N, da, seed=seed)
        tried.append((N, est))
        if est <= target:
            return ParacontrolledMap(N, X, da, est, max_iter, tol, tuple(tried))
    raise ConstructionError("potential too rough at this resolution "
                            f"(best contraction {min(t[1] for t in tried):.3g} > {target})")


def phi(pmap: ParacontrolledMap, u: FourierField) -> FourierField:
    """``Phi_N(u) = u - Pi_M P^N_u X``."""
    return u.with_coeffs(u.coeffs - pmap.t_apply(u.coeffs))


def phi_coeffs(pmap: ParacontrolledMap, C) -> np.ndarray:
    """Batched ``Phi_N`` on coefficient rows (uses the cached matrix)."""
    C = np.asarray(C, dtype=complex)
    return C - C @ pmap.t_matrix(hm.band_of(C))


def _fixed_point(apply_t, v, max_iter, tol, history):
    nv = np.linalg.norm(v, axis=-1)
    u = v.copy()
    if not np.any(nv):
        return u
    scale = np.where(nv > 0, nv, 1.0)
    step = np.inf
    for _ in range(max_iter):
        new = v + apply_t(u)
        step_rows = np.linalg.norm(new - u, axis=-1) / scale
        step = float(step_rows.max())
        history.append(step)
        u = new
        if step < tol:
            return u
        if not np.isfinite(step):
            break
    raise NumericError("Gamma fixed-point iteration did not converge", residual=step, iterations=len(history))


def gamma(pmap: ParacontrolledMap, v: FourierField, return_history: bool = False):
    """Solve ``Phi_N(u) = v`` by the iteration ``u <- v + P^N_u X``.

    With ``return_history`` the relative step sizes are returned as well.
    """
    hist: list[float] = []
    u = _fixed_point(pmap.t_apply, np.array(v.coeffs), pmap.max_iter, pmap.tol, hist)
    out = v.with_coeffs(u)
    return (out, hist) if return_history else out


def gamma_coeffs(pmap: ParacontrolledMap, V) -> np.ndarray:
    """Batched ``Gamma_N`` on coefficient rows; every row meets the tolerance."""
    V = np.asarray(V, dtype=complex)
    R = pmap.t_matrix(hm.band_of(V))
    return _fixed_point(lambda u: u @ R, V, pmap.max_iter, pmap.tol, [])


def formula_terms(pmap: ParacontrolledMap, v: FourierField) -> dict[str, FourierField]:
    """Terms of the paracontrolled expansion of ``Pi_M H Gamma v``.

    With ``u = Gamma v`` the expansion reads::

        -Lap v + P_V u + Pi(u, V) + (P_u - P^N_u) V + P^N_u <V, 1>
               - 2 P^N_{u'} X' - P^N_{u''} X

    Every term is evaluated exactly at the reference band and truncated to
    the band of ``v``.
    """
    M = v.max_freq
    L = pmap.band
    pmap._check(M)
    da = pmap.da
    V = pmap.X.source.field.resized(L)
    X = pmap.X.X
    N = pmap.N
    uL = gamma(pmap, v).resized(L)
    mean = FourierField.mode(L, 0, V.coeff(0).real)
    terms = {
        "laplacian": -v.laplacian(),
        "para_V_u": hm.paraproduct(V, uL, da),
        "resonant": hm.resonant(uL, V, da),
        "para_gap": hm.paraproduct(uL, V, da) - hm.truncated_paraproduct(uL, V, N, da),
        "para_mean": hm.truncated_paraproduct(uL, mean, N, da),
        "grad_commutator": -2.0 * hm.truncated_paraproduct(uL.derivative(), X.derivative(), N, da),
        "lap_commutator": -hm.truncated_paraproduct(uL.laplacian(), X, N, da),
    }
    return {name: t.resized(M) for name, t in terms.items()}


def apply_Hsharp(pmap: ParacontrolledMap, H: GalerkinHamiltonian, v: FourierField,
                 mode: str = "conjugation") -> FourierField:
    """Conjugated operator.

    ``conjugation`` evaluates ``Phi(H(Gamma v))``; ``formula`` sums
    :func:`formula_terms`, which equals ``H(Gamma v)`` term by term.
    """
    if v.max_freq != H.max_freq:
        raise ShapeError("field band does not match the operator band")
    if mode == "conjugation":
        return phi(pmap, apply_H(H, gamma(pmap, v)))
    if mode == "formula":
        terms = list(formula_terms(pmap, v).values())
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out
    raise ParameterError(f"unknown mode {mode!r}; expected 'conjugation' or 'formula'")
