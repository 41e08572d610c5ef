import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from anls import harmonic as hm
from anls import potential as pt
from anls.errors import ParameterError
from anls.harmonic import DyadicAnalysis, FourierField

from conftest import random_field


def _ensemble(M, n):
    return np.array([pt.white_noise(M, s).field.coeffs for s in range(n)])


class TestWhiteNoise:
    def test_deterministic(self):
        a, b = pt.white_noise(64, 11), pt.white_noise(64, 11)
        assert np.array_equal(a.field.coeffs, b.field.coeffs)
        assert not np.array_equal(a.field.coeffs, pt.white_noise(64, 12).field.coeffs)

    def test_prefix_stable(self):
        small, big = pt.white_noise(64, 5), pt.white_noise(128, 5)
        assert np.array_equal(big.field.resized(64).coeffs, small.field.coeffs)

    def test_metadata(self):
        V = pt.white_noise(16, 9)
        assert V.field.reality and V.kind == "white_noise"
        assert V.metadata() == {"kind": "white_noise", "kappa": 0.49, "seed": 9, "M": 16}

    def test_zero_mode_real(self):
        assert pt.white_noise(8, 1).field.coeff(0).imag == 0.0

    @pytest.mark.parametrize("M", [0, -3, 2.5])
    def test_bad_band(self, M):
        with pytest.raises(ParameterError):
            pt.white_noise(M, 0)

    def test_unit_variance(self):
        C = _ensemble(256, 500)
        for k in range(1, 11):
            p = np.abs(C[:, 256 + k]) ** 2
            assert abs(p.mean() - 1.0) <= 3 * p.std(ddof=1) / np.sqrt(len(p))

    def test_chi_square_goodness_of_fit(self):
        C = _ensemble(50, 500)[:, 51:]
        z = np.concatenate([C.real.ravel(), C.imag.ravel()]) * np.sqrt(2.0)
        edges = stats.norm.ppf(np.linspace(0, 1, 21))
        observed, _ = np.histogram(z, edges)
        assert stats.chisquare(observed).pvalue > 0.01

    def test_holder_slope(self):
        da = DyadicAnalysis(1024)
        slopes = [hm.holder_slope(pt.white_noise(1024, s).field, da, 3, 8) for s in range(20)]
        assert -0.65 <= np.mean(slopes) <= -0.35


class TestOscillatory:
    def test_single_mode(self):
        V = pt.oscillatory(1, 0.5)
        x = np.arange(8) / 8
        assert np.allclose(V.field.to_grid(8).real, np.cos(2 * np.pi * x), atol=1e-15)

    def test_coefficients(self):
        V = pt.oscillatory(10, 0.3)
        for n in range(1, 11):
            assert V.field.coeff(n) == V.field.coeff(-n) == pytest.approx(0.5 * n**-0.3)
        assert V.field.coeff(0) == 0

    @pytest.mark.parametrize("kappa", [0.0, 1.0, -0.2, 1.5])
    def test_kappa_range(self, kappa):
        with pytest.raises(ParameterError):
            pt.oscillatory(8, kappa)

    def test_holder_slope(self):
        V = pt.oscillatory(1024, 0.5)
        assert hm.holder_slope(V.field, DyadicAnalysis(1024), 3, 8) == pytest.approx(-0.5, abs=0.1)

    def test_reality(self):
        c = pt.oscillatory(64, 0.7).field.coeffs
        assert np.array_equal(c, np.conj(c[::-1]))


class TestPotentialType:
    def test_complex_field_rejected(self, rng):
        with pytest.raises(ParameterError):
            pt.custom(random_field(rng, 8), 0.5)

    def test_kappa_checked(self, rng):
        with pytest.raises(ParameterError):
            pt.custom(random_field(rng, 8, real=True), 1.2)

    def test_resized_keeps_metadata(self):
        V = pt.white_noise(32, 4).resized(64)
        assert V.max_freq == 64 and V.seed == 4 and V.kappa_nominal == 0.49


class TestReference:
    def test_constant_potential(self):
        V = pt.custom(FourierField.mode(8, 0, 3.0), 0.5)
        assert not np.any(pt.build_reference(V).X.coeffs)

    def test_single_mode(self):
        c = np.zeros(5, complex)
        c[3] = c[1] = 1.0
        X = pt.build_reference(pt.custom(FourierField(2, c, True), 0.5)).X
        assert X.coeff(1) == pytest.approx(-1 / (4 * np.pi**2))
        assert X.coeff(1) == pytest.approx(-0.02533, abs=1e-5)

    @settings(max_examples=30, deadline=None)
    @given(M=st.integers(1, 200), seed=st.integers(0, 2**32 - 1))
    def test_laplacian_recovers_potential(self, M, seed):
        V = pt.custom(random_field(np.random.default_rng(seed), M, real=True), 0.5)
        X = pt.build_reference(V).X
        assert X.coeff(0) == 0
        back = X.laplacian().coeffs
        target = V.field.coeffs.copy()
        target[M] = 0
        nz = target != 0
        assert np.all(np.abs(back[nz] - target[nz]) <= 1e-12 * np.abs(target[nz]))
        assert X.reality

    def test_white_noise_reference_slope(self):
        da = DyadicAnalysis(1024)
        V = pt.white_noise(1024, 0)
        assert 1.2 <= hm.holder_slope(pt.build_reference(V).X, da, 3, 8) <= 1.7

    def test_two_derivatives_gained(self):
        da = DyadicAnalysis(1024)
        gains = []
        for s in range(10):
            V = pt.white_noise(1024, s)
            gains.append(hm.holder_slope(pt.build_reference(V).X, da, 3, 8)
                         - hm.holder_slope(V.field, da, 3, 8))
        assert 1.7 <= np.mean(gains) <= 2.3
