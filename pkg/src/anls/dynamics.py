"""Linear propagators, Strichartz ratios and the Galerkin-truncated NLS flow.

The truncated equation is ``i a' = Lambda a + lam P_N(|u|^{m-2} u)`` for the
eigen-coefficients ``a`` of ``u = sum_n a_n e_n``.  ``propagate`` realises
``e^{-itH}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import scipy.integrate

from . import harmonic as hm
from . import kernels
from .errors import NumericError, ParameterError, ShapeError
from .harmonic import FourierField
from .operator import (ParacontrolledMap, SpectralDecomposition, gamma, gamma_coeffs, phi,
                       phi_coeffs)
from .rng import complex_normal, stream

BLOWUP_FACTOR = 1e6
MIDPOINT_TOL = 1e-14
MIDPOINT_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class PropagatorPlan:
    """Spectral propagator ``e^{direction * i t H}`` (``direction = -1`` by default)."""

    spec: SpectralDecomposition
    direction: int = -1

    def __post_init__(self):
        if self.direction not in (-1, 1):
            raise ParameterError("direction must be +1 or -1")

    def phases(self, t) -> np.ndarray:
        return np.exp(self.direction * 1j * np.multiply.outer(t, self.spec.eigenvalues))


def propagate(plan: PropagatorPlan, u0: FourierField, t: float) -> FourierField:
    """``sum_n e^{-i t lambda_n} <u0, e_n> e_n``."""
    spec = plan.spec
    if u0.max_freq != spec.max_freq:
        raise ShapeError("initial datum and spectrum live on different bands")
    if t == 0 and spec.n_modes == 2 * spec.max_freq + 1:
        return u0
    a = spec.coefficients(u0.coeffs) * plan.phases(t)
    return FourierField(spec.max_freq, spec.synthesize(a))


def propagate_sharp(pmap: ParacontrolledMap, plan: PropagatorPlan, v0: FourierField, t: float) -> FourierField:
    """``Phi(e^{-itH} Gamma v0)``."""
    return phi(pmap, propagate(plan, gamma(pmap, v0), t))


# Strichartz

@dataclass(frozen=True)
class StrichartzStats:
    j: int
    mean: float
    max: float
    stderr: float
    values: tuple = field(repr=False, default=())


def block_support(M: int, j: int) -> np.ndarray:
    """Boolean mask of the sharp block ``j`` on band ``M``."""
    return hm.DyadicAnalysis(M).multiplier(j) > 0


def strichartz_samples(M: int, j: int, n_samples: int, seed: int) -> np.ndarray:
    """Unit-``L^2`` complex Gaussian data supported in block ``j``; one row per sample."""
    mask = block_support(M, j)
    out = np.zeros((n_samples, 2 * M + 1), dtype=complex)
    for i in range(n_samples):
        z = complex_normal(stream(seed, "strichartz", j, i), int(mask.sum()))
        out[i, mask] = z / np.linalg.norm(z)
    return out


def strichartz_ratio(pmap: ParacontrolledMap, plan: PropagatorPlan, kappa: float, eps: float, j: int,
                     n_samples: int = 30, n_time: int = 256, seed: int = 0, data=None) -> StrichartzStats:
    """Monte Carlo ratio ``||e^{-itH#} u0||_{L^6([0,1] x T)} / ||u0||_{H^{(1-kappa)/6 + eps}}``.

    ``data`` optionally supplies the initial coefficient rows instead of the
    block-``j`` Gaussian probe.
    """
    spec = plan.spec
    M = spec.max_freq
    if j < -1 or 2 ** (j + 1) > M:
        raise ParameterError(f"block {j} is not resolved at band {M} (need 2^(j+1) <= M)")
    if n_time < 64:
        raise ParameterError("n_time must be at least 64")
    s = (1.0 - kappa) / 6.0 + eps
    U0 = strichartz_samples(M, j, n_samples, seed) if data is None else np.atleast_2d(data)
    A = spec.coefficients(gamma_coeffs(pmap, U0))
    t = np.linspace(0.0, 1.0, n_time)
    ph = plan.phases(t)
    n = hm.grid_size(M, 6)
    w = hm.sobolev_weights(M, s)
    q = np.empty(len(U0))
    for i, a in enumerate(A):
        F = phi_coeffs(pmap, spec.synthesize(ph * a))
        l6 = kernels.power_sum(hm.to_grid(F, n), 6.0) / n
        num = scipy.integrate.trapezoid(l6, t) ** (1.0 / 6.0)
        q[i] = num / np.sqrt(np.sum(w * np.abs(U0[i]) ** 2))
    err = q.std(ddof=1) / np.sqrt(len(q)) if len(q) > 1 else 0.0
    return StrichartzStats(j, float(q.mean()), float(q.max()), float(err), tuple(q.tolist()))


def log2_slope(js, values) -> float:
    return float(np.polyfit(np.asarray(js, float), np.log2(values), 1)[0])


# critical threshold

@dataclass(frozen=True)
class ThresholdQuery:
    m: int
    kappa: float

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 3:
            raise ParameterError(f"m must be an integer >= 3, got {self.m}")
        if not 0.0 < self.kappa < 1.0:
            raise ParameterError(f"kappa must lie in (0, 1), got {self.kappa}")


def sigma_critical(q: ThresholdQuery | int, kappa: float | None = None) -> float:
    """Critical regularity; exact rational arithmetic, rounded once."""
    if not isinstance(q, ThresholdQuery):
        q = ThresholdQuery(q, kappa)
    m, k = int(q.m), Fraction(q.kappa)
    if m <= 8:
        val = Fraction(1, 3) - k / 6
    else:
        val = (4 - k) / 6 - Fraction(2, m - 2)
    return float(val)


# truncated NLS

@dataclass(frozen=True, eq=False)
class NlsRun:
    """Parameters of a Galerkin-truncated NLS run.

    ``nonlinear`` selects the nonlinear Strang substep: ``midpoint`` (implicit
    midpoint, mass conserving) or ``phase`` (pointwise phase rotation followed
    by projection).
    """

    spec: SpectralDecomposition
    m: int = 4
    coupling: float = 1.0
    n_modes: int | None = None
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "strang"
    nonlinear: str = "midpoint"
    sigma: float = 0.5
    allow_aliasing: bool = False

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 3:
            raise ParameterError(f"m must be an integer >= 3, got {self.m}")
        if self.n_modes is None:
            object.__setattr__(self, "n_modes", self.spec.n_modes)
        if not 1 <= self.n_modes <= self.spec.n_modes:
            raise ParameterError(f"n_modes must lie in 1..{self.spec.n_modes}")
        if self.scheme not in ("strang", "picard"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.nonlinear not in ("midpoint", "phase"):
            raise ParameterError(f"unknown nonlinear substep {self.nonlinear!r}")
        if self.dt == 0:
            raise ParameterError("dt must be nonzero")

    @cached_property
    def basis(self) -> SpectralDecomposition:
        return self.spec.truncated(self.n_modes)

    @cached_property
    def grid(self) -> int:
        M = self.spec.max_freq
        return hm.grid_size(M, 2 if self.allow_aliasing else self.m)

    @cached_property
    def _synth(self) -> np.ndarray:
        # grid values of e_n, shape (n_modes, grid)
        return hm.to_grid(self.basis.vectors.T, self.grid)

    @cached_property
    def _analysis(self) -> np.ndarray:
        return self._synth.conj().T / self.grid

    @cached_property
    def _sobolev_gram(self) -> np.ndarray:
        E = self.basis.vectors
        w = hm.sobolev_weights(self.spec.max_freq, self.sigma)
        return E.conj().T @ (w[:, None] * E)

    def to_grid(self, a) -> np.ndarray:
        return np.asarray(a) @ self._synth

    def project(self, g) -> np.ndarray:
        """Eigen-coefficients of the ``P_N`` projection of grid values."""
        return np.asarray(g) @ self._analysis

    def fourier(self, a) -> np.ndarray:
        return self.basis.synthesize(a)

    def initial_state(self, u0) -> np.ndarray:
        """``P_N u0`` in eigen-coefficients; accepts a field or Fourier rows."""
        c = u0.coeffs if isinstance(u0, FourierField) else np.asarray(u0)
        return self.basis.coefficients(c)

    def sobolev_norm(self, a) -> np.ndarray:
        a = np.asarray(a)
        return np.sqrt(np.real(np.einsum("...i,ij,...j->...", a.conj(), self._sobolev_gram, a)))


def mass(a) -> np.ndarray:
    return np.sum(np.abs(np.asarray(a)) ** 2, axis=-1)


def potential_energy(run: NlsRun, a) -> np.ndarray:
    """``integral |u|^m`` by the rectangle rule."""
    return kernels.power_sum(run.to_grid(a), float(run.m)) / run.grid


def energy(run: NlsRun, a, convention: str = "flow") -> np.ndarray:
    """Discrete Hamiltonian ``sum lambda_n |a_n|^2 + c integral |u|^m``.

    ``c = 2 lam / m`` for the ``flow`` convention (conserved by the truncated
    flow) and ``c = lam`` for the ``density`` convention.
    """
    c = 2.0 * run.coupling / run.m if convention == "flow" else run.coupling
    kin = np.sum(run.basis.eigenvalues * np.abs(np.asarray(a)) ** 2, axis=-1)
    return kin + c * potential_energy(run, a)


def _nonlinear_rhs(run: NlsRun, a) -> np.ndarray:
    return run.project(kernels.nonlinearity(run.to_grid(a), run.m))


def _nonlinear_substep(run: NlsRun, a, h: float) -> np.ndarray:
    pred = run.project(kernels.phase_rotate(run.to_grid(a), run.coupling * h, run.m))
    if run.nonlinear == "phase" or run.coupling == 0:
        return pred if run.coupling else a
    b = pred
    scale = max(float(np.max(np.abs(a), initial=0.0)), 1e-300)
    for _ in range(MIDPOINT_MAX_ITER):
        new = a - 1j * run.coupling * h * _nonlinear_rhs(run, 0.5 * (a + b))
        diff = float(np.max(np.abs(new - b), initial=0.0))
        b = new
        if diff <= MIDPOINT_TOL * scale:
            return b
        if not np.isfinite(diff):
            break
    raise NumericError("implicit midpoint substep did not converge; reduce dt", step=h)


def nls_step_strang(run: NlsRun, state, dt: float | None = None) -> np.ndarray:
    """One Strang step (half linear, nonlinear, half linear) on eigen-coefficients."""
    h = run.dt if dt is None else dt
    half = np.exp(-0.5j * h * run.basis.eigenvalues)
    with np.errstate(over="ignore", invalid="ignore"):
        a = np.asarray(state, dtype=complex) * half
        a = _nonlinear_substep(run, a, h)
        a = a * half
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite state in Strang step", step=h)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots ``states[i]`` (eigen-coefficients) at ``times[i]``."""

    run: NlsRun
    times: np.ndarray
    states: np.ndarray
    info: dict = field(default_factory=dict)

    def fourier(self) -> np.ndarray:
        return self.run.fourier(self.states)

    def field(self, i: int = -1) -> FourierField:
        return FourierField(self.run.spec.max_freq, self.run.fourier(self.states[i]))


def _n_steps(T, dt):
    n = int(round(T / abs(dt)))
    if not np.isclose(n * abs(dt), T, rtol=1e-9, atol=1e-15):
        raise ParameterError(f"T = {T} is not a multiple of dt = {dt}")
    return n


def evolve(run: NlsRun, u0, snap_every: float | None = None, T: float | None = None) -> Trajectory:
    """Strang integration of a single trajectory up to ``T`` (default ``run.T``)."""
    T = run.T if T is None else T
    a = run.initial_state(u0)
    n = _n_steps(T, run.dt)
    every = n if not snap_every else max(1, int(round(snap_every / abs(run.dt))))
    norm0 = float(run.sobolev_norm(a))
    times, states = [0.0], [a]
    for i in range(1, n + 1):
        try:
            a = nls_step_strang(run, a)
        except NumericError as exc:
            raise NumericError(f"blowup before t = {i * run.dt:.6g}", last_good_time=(i - 1) * run.dt,
                               **exc.diagnostics) from exc
        if float(run.sobolev_norm(a)) > BLOWUP_FACTOR * max(norm0, 1e-300):
            raise NumericError(f"blowup: H^sigma norm exceeded {BLOWUP_FACTOR:g} x initial",
                               last_good_time=(i - 1) * run.dt)
        if i % every == 0 or i == n:
            times.append(i * run.dt)
            states.append(a)
    return Trajectory(run, np.array(times), np.array(states))


def evolve_batch(run: NlsRun, A0, T: float | None = None):
    """Evolve rows of eigen-coefficients; returns ``(A_T, blown)`` with a per-row blowup mask."""
    T = run.T if T is None else T
    A = np.array(A0, dtype=complex, ndmin=2)
    n = _n_steps(T, run.dt) if T else 0
    norm0 = np.maximum(run.sobolev_norm(A), 1e-300)
    blown = np.zeros(len(A), dtype=bool)
    for _ in range(n):
        live = ~blown
        if not live.any():
            break
        try:
            A[live] = nls_step_strang(run, A[live])
        except NumericError:
            # isolate the offending rows
            for i in np.flatnonzero(live):
                try:
                    A[i] = nls_step_strang(run, A[i])
                except NumericError:
                    blown[i] = True
        bad = ~blown & (~np.all(np.isfinite(A), axis=1) | (run.sobolev_norm(A) > BLOWUP_FACTOR * norm0))
        blown |= bad
    return A, blown


def nls_solve_picard(run: NlsRun, u0, T_local: float, pmap: ParacontrolledMap, n_nodes: int = 64,
                     tol: float = 1e-9, max_iter: int = 100) -> Trajectory:
    """Picard iteration of the Duhamel map in the conjugated variable ``v = Phi(u)``.

    Time integrals use the cumulative trapezoid rule on ``n_nodes`` nodes.
    The returned trajectory holds ``u = Gamma v`` at the nodes; ``info``
    records the iteration count, residual history and the ``v`` trajectory.
    """
    basis = run.basis
    M = run.spec.max_freq
    if pmap.band < M:
        raise ShapeError("paracontrolled map band is below the run band")
    t = np.linspace(0.0, T_local, n_nodes)
    lam = basis.eigenvalues
    a0 = run.initial_state(u0)
    rot = np.exp(-1j * np.multiply.outer(t, lam))
    A = rot * a0
    Vtraj = phi_coeffs(pmap, basis.synthesize(A))
    history: list[float] = []
    growth = 0
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            U = gamma_coeffs(pmap, Vtraj)
            G = _nonlinear_rhs(run, basis.coefficients(U))
            integral = scipy.integrate.cumulative_trapezoid(np.conj(rot) * G, t, axis=0, initial=0.0)
            A = rot * (a0 - 1j * run.coupling * integral)
            Vnew = phi_coeffs(pmap, basis.synthesize(A))
            res = float(np.max(np.linalg.norm(Vnew - Vtraj, axis=-1)))
        history.append(res)
        Vtraj = Vnew
        if res < tol:
            break
        growth = growth + 1 if len(history) > 1 and res > history[-2] else 0
        if growth >= 3 or not np.isfinite(res):
            raise NumericError("outside local well-posedness window", residual=res, iterations=it)
    else:
        raise NumericError("Picard iteration did not converge", residual=history[-1], iterations=max_iter)
    return Trajectory(run, t, A, {"iterations": len(history), "residuals": history, "v": Vtraj})


# Galerkin convergence

@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple  # (N, err)
    exponent: float
    sigma_prime: float


def galerkin_convergence(spec: SpectralDecomposition, m: int, coupling: float, u0: FourierField, T: float,
                         N_list, dt: float = 1e-3, sigma_prime: float = 0.2, snap_every: float | None = None,
                         nonlinear: str = "midpoint") -> ConvergenceTable:
    """Self-convergence of the truncated flow against the largest dimension in ``N_list``.

    ``err(N) = sup_t ||u_N(t) - u_Nmax(t)||_{H^{sigma'}}`` over the snapshots.
    """
    N_list = sorted(int(N) for N in N_list)
    if N_list[-1] > spec.n_modes:
        raise ParameterError(f"largest dimension {N_list[-1]} exceeds {spec.n_modes} available modes")
    snap = dt * 10 if snap_every is None else snap_every
    trajs = {}
    for N in N_list:
        run = NlsRun(spec, m, coupling, N, dt, T, nonlinear=nonlinear)
        trajs[N] = evolve(run, u0, snap_every=snap).fourier()
    w = hm.sobolev_weights(spec.max_freq, sigma_prime)
    ref = trajs[N_list[-1]]
    rows = []
    for N in N_list:
        d = trajs[N] - ref
        rows.append((N, float(np.sqrt(np.max(np.sum(w * np.abs(d) ** 2, axis=-1))))))
    fit = [(N, e) for N, e in rows[:-1] if e > 0]
    exponent = float(np.polyfit(np.log([r[0] for r in fit]), np.log([r[1] for r in fit]), 1)[0]) \
        if len(fit) >= 2 else float("nan")
    return ConvergenceTable(tuple(rows), exponent, sigma_prime)
