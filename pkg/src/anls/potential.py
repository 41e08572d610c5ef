"""Rough periodic potentials and their reference field ``X``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .harmonic import TWO_PI, FourierField, freqs
from .rng import stream

KINDS = ("white_noise", "oscillatory", "custom")
WHITE_NOISE_KAPPA = 0.49


@dataclass(frozen=True, eq=False)
class Potential:
    """A real potential ``V`` advertised to lie in ``C^{-1+kappa}``."""

    field: FourierField
    kappa_nominal: float
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        if not self.field.reality:
            raise ParameterError("a potential must be a real field")
        if not 0.0 < self.kappa_nominal < 1.0:
            raise ParameterError(f"kappa must lie in (0, 1), got {self.kappa_nominal}")
        if self.kind not in KINDS:
            raise ParameterError(f"unknown potential kind {self.kind!r}")

    @property
    def max_freq(self) -> int:
        return self.field.max_freq

    def resized(self, M: int) -> "Potential":
        return Potential(self.field.resized(M), self.kappa_nominal, self.kind, self.seed)

    def metadata(self) -> dict:
        return {"kind": self.kind, "kappa": self.kappa_nominal, "seed": self.seed, "M": self.max_freq}


@dataclass(frozen=True, eq=False)
class ReferenceField:
    """``X`` with ``X'' = V - <V, 1>`` and zero mean."""

    X: FourierField
    source: Potential


def _check_band(M):
    if int(M) != M or M < 1:
        raise ParameterError(f"max_freq must be a positive integer, got {M}")
    return int(M)


def white_noise(M: int, seed: int) -> Potential:
    """Spatial white noise truncated to ``|k| <= M``.

    Modes are drawn in order of increasing ``|k|`` from a single stream, so
    the field at band ``M`` is the truncation of the field at any larger band
    with the same seed.
    """
    M = _check_band(M)
    rng = stream(seed, "white_noise")
    c0 = rng.standard_normal()
    z = rng.standard_normal(2 * M).reshape(M, 2)
    pos = (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)
    c = np.concatenate([np.conj(pos[::-1]), [c0], pos])
    return Potential(FourierField(M, c, True), WHITE_NOISE_KAPPA, "white_noise", int(seed))


def oscillatory(M: int, kappa: float) -> Potential:
    """``V(x) = sum_{1<=n<=M} n^{-kappa} cos(2 pi n x)``."""
    M = _check_band(M)
    if not 0.0 < kappa < 1.0:
        raise ParameterError(f"kappa must lie in (0, 1), got {kappa}")
    k = np.abs(freqs(M)).astype(float)
    c = np.where(k > 0, 0.5 * np.maximum(k, 1.0) ** (-kappa), 0.0)
    return Potential(FourierField(M, c, True), float(kappa), "oscillatory")


def custom(field: FourierField, kappa: float) -> Potential:
    return Potential(field, float(kappa), "custom")


def build_reference(V: Potential) -> ReferenceField:
    """Solve ``X'' = V - <V, 1>`` with ``<X, 1> = 0``."""
    k = V.field.freqs
    c = np.zeros_like(V.field.coeffs)
    nz = k != 0
    c[nz] = -V.field.coeffs[nz] / (TWO_PI**2 * k[nz] ** 2)
    return ReferenceField(FourierField(V.max_freq, c, True), V)
