"""Gaussian free field sampling, Gibbs reweighting and the invariance experiment.

Samples of ``mu`` are ``sum_n c_n e_n`` with independent circular complex
Gaussians ``E|c_n|^2 = 1/(lambda_n - lambda_1 + 1)``.  Gibbs measures are
realised by self-normalised importance weights on these samples.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import harmonic as hm
from . import kernels
from .dynamics import NlsRun, evolve_batch
from .errors import ParameterError, ShapeError
from .harmonic import DyadicAnalysis, FourierField, holder_slope
from .operator import SpectralDecomposition
from .rng import complex_normal, stream

MIN_NONZERO_FRACTION = 0.05
MIN_ESS = 100.0
OBSERVABLES = ("mass", "l4", "mode1", "h14")


@dataclass(frozen=True, eq=False)
class GffSampler:
    """Sampler for the Gaussian measure with covariance ``(H - lambda_1 + 1)^{-1}``."""

    spec: SpectralDecomposition
    mode_cap: int | None = None

    def __post_init__(self):
        cap = self.spec.n_modes if self.mode_cap is None else int(self.mode_cap)
        if not 1 <= cap <= self.spec.n_modes:
            raise ParameterError(f"mode_cap must lie in 1..{self.spec.n_modes}")
        object.__setattr__(self, "mode_cap", cap)
        v = self.variances
        if not np.all(np.isfinite(v) & (v > 0)):
            raise ParameterError("GFF variances must be positive and finite")

    @cached_property
    def basis(self) -> SpectralDecomposition:
        return self.spec.truncated(self.mode_cap)

    @property
    def max_freq(self) -> int:
        return self.spec.max_freq

    @property
    def lambda1(self) -> float:
        return float(self.spec.eigenvalues[0])

    @property
    def shift(self) -> float:
        return self.lambda1 - 1.0

    @cached_property
    def variances(self) -> np.ndarray:
        return 1.0 / (self.basis.eigenvalues - self.shift)

    def eigen_values_at(self, points) -> np.ndarray:
        """``e_n(x)`` for ``x`` in ``points``, shape ``(len(points), mode_cap)``."""
        x = np.asarray(points, dtype=float)
        waves = np.exp(2j * np.pi * np.multiply.outer(x, hm.freqs(self.max_freq)))
        return waves @ self.basis.vectors


def sample_gff_coeffs(s: GffSampler, count: int, seed: int, start: int = 0) -> np.ndarray:
    """Eigen-coefficients of samples ``start..start+count-1``; sample ``i`` uses stream ``(seed, i)``."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    sd = np.sqrt(s.variances)
    return np.array([sd * complex_normal(stream(seed, "gff", i), s.mode_cap) for i in range(start, start + count)])


def sample_gff(s: GffSampler, count: int, seed: int, start: int = 0) -> list[FourierField]:
    C = s.basis.synthesize(sample_gff_coeffs(s, count, seed, start))
    return [FourierField(s.max_freq, c) for c in C]


def analytic_covariance(s: GffSampler, points) -> np.ndarray:
    """``G(x, y) = sum_n e_n(x) conj(e_n(y)) / (lambda_n - lambda_1 + 1)``."""
    E = s.eigen_values_at(points)
    return (E * s.variances) @ E.conj().T


@dataclass(frozen=True)
class CovarianceReport:
    max_deviation: float
    stderr: float
    deviation: np.ndarray = field(repr=False)
    stderr_matrix: np.ndarray = field(repr=False)
    analytic: np.ndarray = field(repr=False)

    @property
    def z_scores(self) -> np.ndarray:
        return np.abs(self.deviation) / self.stderr_matrix


def covariance_check(s: GffSampler, points, n_samples: int, seed: int = 0, start: int = 0) -> CovarianceReport:
    """Monte Carlo ``E[phi(x) conj(phi(y))]`` against the analytic kernel."""
    x = np.asarray(points, dtype=float)
    if np.any((x < 0) | (x >= 1)):
        raise ParameterError("points must lie in [0, 1)")
    vals = sample_gff_coeffs(s, n_samples, seed, start) @ s.eigen_values_at(x).T
    Z = vals[:, :, None] * vals[:, None, :].conj()
    emp = Z.mean(axis=0)
    se = np.sqrt(np.mean(np.abs(Z - emp) ** 2, axis=0) / n_samples)
    G = analytic_covariance(s, x)
    D = emp - G
    i = np.unravel_index(np.argmax(np.abs(D)), D.shape)
    return CovarianceReport(float(np.abs(D[i])), float(se[i]), D, se, G)


def covariance_scaling(s: GffSampler, points, n_samples: int, replicates: int = 50, seed: int = 0) -> float:
    """Ratio of mean max-deviations at ``n`` and ``4n`` samples (about 2 under CLT scaling)."""
    small, large = [], []
    offset = 0
    for _ in range(replicates):
        small.append(covariance_check(s, points, n_samples, seed, offset).max_deviation)
        offset += n_samples
        large.append(covariance_check(s, points, 4 * n_samples, seed, offset).max_deviation)
        offset += 4 * n_samples
    return float(np.mean(small) / np.mean(large))


@dataclass(frozen=True)
class RegularityStats:
    mean: float
    std: float
    values: tuple = field(repr=False, default=())


def gff_regularity(s: GffSampler, n_samples: int, da: DyadicAnalysis | None = None, seed: int = 0,
                   j_min: int | None = None, j_max: int | None = None) -> RegularityStats:
    """Mean estimated Hoelder exponent of GFF samples.

    The default window is the six finest blocks that are fully inside the band.
    """
    M = s.max_freq
    da = da or DyadicAnalysis(M)
    if j_max is None:
        j_max = int(np.floor(np.log2(M))) - 1
    if j_min is None:
        j_min = j_max - 5
    vals = [holder_slope(u, da, j_min, j_max) for u in sample_gff(s, n_samples, seed)]
    return RegularityStats(float(np.mean(vals)), float(np.std(vals, ddof=1)) if n_samples > 1 else 0.0,
                           tuple(vals))


# Gibbs weights

def _as_rows(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples).astype(complex)
    fields = list(samples)
    if not fields:
        raise ParameterError("no samples")
    M = fields[0].max_freq
    if any(f.max_freq != M for f in fields):
        raise ShapeError("samples live on different bands")
    return np.array([f.coeffs for f in fields])


def lp_power(C, p: float) -> np.ndarray:
    """``integral |u|^p`` for Fourier rows, exact for band-limited even ``p``."""
    M = hm.band_of(C)
    n = hm.grid_size(M, max(2, int(math.ceil(p))))
    return kernels.power_sum(hm.to_grid(C, n), p) / n


def _potential_coefficient(coupling, m, convention):
    if convention == "flow":
        return 2.0 * coupling / m
    if convention == "density":
        return float(coupling)
    raise ParameterError(f"unknown weight convention {convention!r}; expected 'flow' or 'density'")


@dataclass(frozen=True, eq=False)
class GibbsEnsemble:
    """Samples of ``mu_N`` with importance weights for ``nu_B``.

    ``log_weights`` is ``-inf`` for samples outside the mass cutoff.  The
    potential term uses coefficient ``2 lam / m`` under the ``flow``
    convention (the density conserved by the truncated flow) and ``lam``
    under the ``density`` convention.
    """

    samples: np.ndarray
    log_weights: np.ndarray
    B: float
    coupling: float
    m: int
    lambda1: float
    convention: str = "flow"
    seed: int | None = None
    mode_cap: int | None = None

    @property
    def count(self) -> int:
        return len(self.log_weights)

    @property
    def max_freq(self) -> int:
        return hm.band_of(self.samples)

    @cached_property
    def weights(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_weights)

    @cached_property
    def normalized_weights(self) -> np.ndarray:
        """Weights divided by their maximum (overflow-safe)."""
        top = np.max(self.log_weights)
        if not np.isfinite(top):
            return np.zeros(self.count)
        return np.exp(self.log_weights - top)

    @property
    def ess(self) -> float:
        w = self.normalized_weights
        s2 = float(np.sum(w * w))
        return float(np.sum(w) ** 2 / s2) if s2 > 0 else 0.0

    @property
    def nonzero_fraction(self) -> float:
        return float(np.mean(np.isfinite(self.log_weights)))

    @property
    def cutoff_too_tight(self) -> bool:
        return self.nonzero_fraction < MIN_NONZERO_FRACTION

    @property
    def z_estimate(self) -> tuple[float, float]:
        """Monte Carlo ``(Z_B, stderr)`` as the mean weight."""
        w = self.weights
        return float(w.mean()), float(w.std(ddof=1) / np.sqrt(len(w))) if len(w) > 1 else 0.0

    def fields(self) -> list[FourierField]:
        return [FourierField(self.max_freq, c) for c in self.samples]

    def weighted_mean(self, values) -> tuple[float, float]:
        return weighted_mean(values, self.normalized_weights)


def weighted_mean(values, weights) -> tuple[float, float]:
    """Self-normalised mean and its delta-method standard error."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    sw = w.sum()
    mean = float(np.sum(w * v) / sw)
    return mean, float(np.sqrt(np.sum(w**2 * (v - mean) ** 2)) / sw)


def gibbs_weights(samples, coupling: float, m: int, B: float, lambda1: float, convention: str = "flow",
                  seed: int | None = None, mode_cap: int | None = None) -> GibbsEnsemble:
    """Attach weights ``1[||u|| <= B] exp((1 - lambda_1)||u||^2 - c ||u||_m^m)``."""
    if isinstance(m, bool) or int(m) != m or m < 3:
        raise ParameterError(f"m must be an integer >= 3, got {m}")
    if B < 0:
        raise ParameterError("cutoff B must be non-negative")
    if coupling < 0:
        if math.isinf(B):
            raise ParameterError("focusing measure needs a finite mass cutoff B: by scaling, "
                                 "the measure cannot be finite without truncation")
        if m > 6:
            raise ParameterError("focusing measures are only defined for m <= 6")
        if m == 6:
            warnings.warn("focusing m = 6: normalisable only for small B (small B required)", stacklevel=2)
    c = _potential_coefficient(coupling, m, convention)
    C = _as_rows(samples)
    mass = np.sum(np.abs(C) ** 2, axis=-1)
    logw = (1.0 - lambda1) * mass - c * lp_power(C, m)
    logw = np.where(mass <= B * B, logw, -np.inf) if not math.isinf(B) else logw
    C.setflags(write=False)
    logw.setflags(write=False)
    ens = GibbsEnsemble(C, logw, float(B), float(coupling), int(m), float(lambda1), convention, seed, mode_cap)
    if ens.cutoff_too_tight:
        warnings.warn("cutoff too tight: fewer than 5% of the weights are nonzero", stacklevel=2)
    return ens


def gibbs_ensemble(s: GffSampler, count: int, seed: int, coupling: float, m: int, B: float = math.inf,
                   convention: str = "flow") -> GibbsEnsemble:
    """Sample ``mu_N`` and weight it, using ``lambda_1`` of the sampler's spectrum."""
    C = s.basis.synthesize(sample_gff_coeffs(s, count, seed))
    return gibbs_weights(C, coupling, m, B, s.lambda1, convention, seed, s.mode_cap)


def log_weight_bound(lambda1: float, coupling: float, m: int, convention: str = "flow", c_m: float = 1.0) -> float:
    """``log sup_{r>0} exp((1 - lambda_1) r^2 - c c_m r^m)`` for the defocusing case.

    On the unit circle Jensen's inequality gives ``||u||_m^m >= ||u||_2^m``,
    so ``c_m = 1``.
    """
    a = 1.0 - lambda1
    b = _potential_coefficient(coupling, m, convention) * c_m
    if b <= 0:
        raise ParameterError("the bound needs a defocusing coupling")
    if a <= 0:
        return 0.0
    r = (2.0 * a / (m * b)) ** (1.0 / (m - 2))
    return float(a * r * r - b * r**m)


# invariance

def evaluate_observables(run: NlsRun, A, names=OBSERVABLES) -> dict[str, np.ndarray]:
    """Observables of eigen-coefficient rows ``A`` of the run's basis."""
    A = np.atleast_2d(A)
    out = {}
    for name in names:
        if name == "mass":
            out[name] = np.sum(np.abs(A) ** 2, axis=-1)
        elif name == "l4":
            out[name] = kernels.power_sum(run.to_grid(A), 4.0) / run.grid
        elif name == "mode1":
            out[name] = np.abs(A[:, 0]) ** 2
        elif name == "h14":
            w = hm.sobolev_weights(run.spec.max_freq, 0.25)
            out[name] = np.sum(w * np.abs(run.fourier(A)) ** 2, axis=-1)
        else:
            raise ParameterError(f"unknown observable {name!r}; expected one of {OBSERVABLES}")
    return out


@dataclass(frozen=True)
class ObservableResult:
    mean_t0: float
    mean_T: float
    delta: float
    sigma_boot: float
    ci_lo: float
    ci_hi: float
    passed: bool

    def to_dict(self) -> dict:
        return {"mean_t0": self.mean_t0, "mean_T": self.mean_T, "delta": self.delta,
                "sigma_boot": self.sigma_boot, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi, "pass": self.passed}


@dataclass(frozen=True)
class InvarianceReport:
    T: float
    results: dict
    ess: float
    n_blowups: int
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.n_blowups == 0 and all(r.passed for r in self.results.values())

    def to_dict(self) -> dict:
        return {"T": self.T, "ess": self.ess, "n_blowups": self.n_blowups, "n_samples": self.n_samples,
                "pass": self.passed, "observables": {k: v.to_dict() for k, v in self.results.items()}}


# relative floor below which a difference is roundoff, not a statistical signal
ROUNDOFF_FLOOR = 1e-10


def invariance_experiment(ens: GibbsEnsemble, run: NlsRun, observables=("l4", "mode1", "h14"), T: float | None = None,
                          n_bootstrap: int = 1000, seed: int = 0, flow=None, min_ess: float = MIN_ESS) -> InvarianceReport:
    """Compare weighted observable means at ``t = 0`` and ``t = T``.

    ``flow`` optionally replaces the truncated NLS flow; it maps Fourier
    rows to Fourier rows.  Differences are tested against a paired
    percentile bootstrap over sample indices.
    """
    T = run.T if T is None else T
    if ens.mode_cap is not None and ens.mode_cap != run.n_modes:
        raise ParameterError(f"ensemble has {ens.mode_cap} modes but the run uses {run.n_modes}")
    if ens.max_freq != run.spec.max_freq:
        raise ShapeError("ensemble and run live on different bands")
    if n_bootstrap < 500:
        raise ParameterError("n_bootstrap must be at least 500")
    if ens.ess < min_ess:
        raise ParameterError(f"effective sample size {ens.ess:.1f} is below {min_ess:g}")
    A0 = run.basis.coefficients(ens.samples)
    if flow is not None:
        AT, blown = run.basis.coefficients(flow(run.fourier(A0))), np.zeros(len(A0), dtype=bool)
    elif T == 0:
        AT, blown = A0, np.zeros(len(A0), dtype=bool)
    else:
        AT, blown = evolve_batch(run, A0, T)
    w = np.where(blown, 0.0, ens.normalized_weights)
    F0 = evaluate_observables(run, A0, observables)
    FT = evaluate_observables(run, AT, observables)
    rng = stream(seed, "bootstrap")
    idx = rng.integers(0, len(w), size=(n_bootstrap, len(w)))
    wb = w[idx]
    sw = wb.sum(axis=1)
    results = {}
    for name in observables:
        f0, fT = np.where(blown, 0.0, F0[name]), np.where(blown, 0.0, FT[name])
        m0 = float(np.sum(w * f0) / w.sum())
        mT = float(np.sum(w * fT) / w.sum())
        delta = mT - m0
        boot = np.sum(wb * (fT[idx] - f0[idx]), axis=1) / sw
        sigma = float(np.std(boot, ddof=1))
        lo, hi = (float(x) for x in np.percentile(boot, [2.5, 97.5]))
        ok = abs(delta) <= max(3.0 * sigma, ROUNDOFF_FLOOR * abs(m0))
        results[name] = ObservableResult(m0, mT, float(delta), sigma, lo, hi, bool(ok))
    return InvarianceReport(float(T), results, ens.ess, int(blown.sum()), len(w))
