"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line with the measured
quantities, whatever the outcome, and then asserts.
"""
import math
import os
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from anls import dynamics as dy
from anls import gibbs as gb
from anls import harmonic as hm
from anls import operator as op
from anls import potential as pt
from anls.harmonic import DyadicAnalysis, FourierField
from anls.harness import cli
from anls.harness.config import load_config
from anls.harness.manifest import MANIFEST_NAME, RunManifest
from anls.harness.runner import reproduce
from anls.rng import complex_normal, stream

from conftest import random_field

KAPPA = pt.WHITE_NOISE_KAPPA
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DEMO_ORDER = ("potential", "spectrum", "gamma_check", "strichartz", "evolve", "threshold",
              "gibbs_sample", "invariance", "regularity")


@pytest.fixture
def verdict(capsys):
    def report(number, checks):
        ok = all(c[2] for c in checks)
        detail = "; ".join(f"{name} {value}" + ("" if good else " (failed)") for name, value, good in checks)
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return report


def _spectrum(V, M):
    return op.diagonalize(op.assemble(V, M))


def _free(M):
    return pt.custom(FourierField.zeros(2 * M), 0.5)


def test_criterion_1_exactness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for M in (16, 64, 256):
        for _ in range(100):
            u, v = random_field(rng, M), random_field(rng, M)
            total = hm.paraproduct(u, v).coeffs + hm.resonant(u, v).coeffs + hm.paraproduct(v, u).coeffs
            worst = max(worst, np.max(np.abs(total - hm.pointwise_product(u, v).coeffs)))

    V = pt.white_noise(128, 3)
    pm = op.build_map(pt.build_reference(V))
    rt = 0.0
    for _ in range(50):
        v = random_field(rng, 64, decay=rng.uniform(0, 2))
        rt = max(rt, (op.phi(pm, op.gamma(pm, v)) - v).l2_norm() / v.l2_norm())

    pars = 0.0
    for M in (16, 64, 256):
        u = random_field(rng, M)
        pars = max(pars, abs(u.grid_l2_norm() - u.l2_norm()) / u.l2_norm())

    lam = _spectrum(_free(64), 64).eigenvalues
    ref = np.sort(4 * np.pi**2 * hm.freqs(64).astype(float) ** 2)
    spec_err = np.max(np.abs(lam - ref) / np.maximum(ref, 1.0))
    elapsed = time.perf_counter() - t0
    verdict(1, [("decomposition", f"{worst:.1e}", worst <= 1e-11),
                ("phi(gamma(v)) - v", f"{rt:.1e}", rt <= 1e-10),
                ("parseval", f"{pars:.1e}", pars <= 1e-10),
                ("free spectrum", f"{spec_err:.1e}", spec_err <= 1e-10),
                ("time", f"{elapsed:.1f}s", elapsed < 60)])


def test_criterion_2_spectral_oracle(verdict):
    t0 = time.perf_counter()
    H = op.assemble(pt.white_noise(128, 3), 64)
    S = op.diagonalize(H)
    A, U, lam = H.matrix, S.vectors, S.eigenvalues
    resid = np.max(np.linalg.norm(A @ U - U * lam, axis=0) / (1 + np.abs(lam)))
    gram = np.max(np.abs(U.conj().T @ U - np.eye(len(lam))))

    V = pt.white_noise(256, 3)
    l64 = _spectrum(V, 64).eigenvalues[:10]
    l128 = _spectrum(V, 128).eigenvalues[:10]
    stab = np.max(np.abs(l64 - l128) / (1 + np.abs(l128)))

    signed = 0
    for seed in range(10):
        g = _spectrum(pt.white_noise(256, seed), 128).eigenfield(0).to_grid(1024)
        signed += bool(np.max(np.abs(g.imag)) < 1e-10 and (np.all(g.real > 0) or np.all(g.real < 0)))
    elapsed = time.perf_counter() - t0
    verdict(2, [("scaled residual", f"{resid:.1e}", resid <= 1e-9),
                ("orthonormality", f"{gram:.1e}", gram <= 1e-10),
                ("eigenvalue shift 64->128", f"{stab:.3f}", stab <= 0.05),
                ("single-signed ground states", f"{signed}/10", signed == 10),
                ("time", f"{elapsed:.1f}s", elapsed < 120)])


def test_criterion_3_paracontrolled_remainder(verdict):
    t0 = time.perf_counter()
    delta = KAPPA / 2
    Ms = (64, 128, 256)
    worst = []
    for M in Ms:
        V = pt.white_noise(2 * M, 3)
        H = op.assemble(V, M)
        pm = op.build_map(pt.build_reference(V))
        rng = np.random.default_rng(1)
        r = []
        for _ in range(100):
            v = random_field(rng, M, band=M // 4, decay=1.0)
            rem = op.apply_Hsharp(pm, H, v) + v.laplacian()
            r.append(rem.sobolev_norm(delta) / v.sobolev_norm(1 - KAPPA + delta))
        worst.append(max(r))
    slope = np.polyfit(np.log(Ms), np.log(worst), 1)[0]
    elapsed = time.perf_counter() - t0
    verdict(3, [("ratios", "/".join(f"{w:.3g}" for w in worst), all(np.isfinite(worst))),
                ("log-log slope", f"{slope:+.3f}", abs(slope) <= 0.1),
                ("time", f"{elapsed:.1f}s", elapsed < 180)])


def test_criterion_4_regularity(verdict):
    t0 = time.perf_counter()
    da = DyadicAnalysis(1024)
    v_slopes, gains = [], []
    for s in range(10):
        V = pt.white_noise(1024, s)
        sv = hm.holder_slope(V.field, da, 3, 8)
        v_slopes.append(sv)
        gains.append(hm.holder_slope(pt.build_reference(V).X, da, 3, 8) - sv)
    wn, gain = np.mean(v_slopes), np.mean(gains)

    gff = {}
    for name, V in (("zero", _free(1024)), ("white noise", pt.white_noise(2048, 3))):
        gff[name] = gb.gff_regularity(gb.GffSampler(_spectrum(V, 1024)), 20, seed=0).mean

    k = np.arange(-1024, 1025)
    smooth = hm.holder_slope(FourierField(1024, (1.0 + k**2) ** -2.0, True), da, 4, 9)
    elapsed = time.perf_counter() - t0
    checks = [("white noise slope", f"{wn:.3f}", -0.65 <= wn <= -0.35),
              ("X gain", f"{gain:.3f}", 1.7 <= gain <= 2.3)]
    checks += [(f"GFF slope ({n})", f"{g:.3f}", 0.35 <= g <= 0.65) for n, g in gff.items()]
    checks += [("smooth control slope", f"{smooth:.2f}", not 0.35 <= smooth <= 0.65),
               ("time", f"{elapsed:.1f}s", elapsed < 180)]
    verdict(4, checks)


def test_criterion_5_strichartz(verdict):
    t0 = time.perf_counter()
    js = range(2, 7)
    checks = []
    for name, V in (("V=0", _free(128)), ("white noise", pt.white_noise(256, 3))):
        S = _spectrum(V, 128)
        pm = op.build_map(pt.build_reference(V))
        plan = dy.PropagatorPlan(S)
        means = [dy.strichartz_ratio(pm, plan, 0.49, 0.05, j, n_samples=30).mean for j in js]
        slope = dy.log2_slope(js, means)
        checks.append((f"{name} slope", f"{slope:+.3f}", bool(np.all(np.isfinite(means))) and slope <= 0.15))
    elapsed = time.perf_counter() - t0
    verdict(5, checks + [("time", f"{elapsed:.1f}s", elapsed < 300)])


def test_criterion_6_dynamics(verdict):
    t0 = time.perf_counter()
    V = pt.white_noise(64, 3)
    S = _spectrum(V, 32)
    pm = op.build_map(pt.build_reference(V))
    sampler = gb.GffSampler(S, 16)
    u0 = gb.sample_gff(sampler, 1, 0)[0]

    run = dy.NlsRun(S, 4, 1.0, 16, 1e-3, 1.0)
    m = dy.mass(dy.evolve(run, u0, snap_every=0.1).states)
    drift = np.max(np.abs(m - m[0])) / m[0]

    u8 = gb.sample_gff(gb.GffSampler(S, 8), 1, 0)[0]
    de = []
    for dt in (1e-3, 5e-4):
        r = dy.NlsRun(S, 4, 1.0, 8, dt, 1.0)
        e = dy.energy(r, dy.evolve(r, u8).states)
        de.append(abs(e[-1] - e[0]))
    ratio = de[0] / de[1]

    rng = np.random.default_rng(3)
    small = random_field(rng, 32, band=8, decay=1.0)
    small = small * (1e-3 / small.l2_norm())
    r = dy.NlsRun(S, 4, 1.0, 16, 1e-3, 0.05)
    gap = np.linalg.norm(dy.nls_solve_picard(r, small, 0.05, pm).fourier()[-1] - dy.evolve(r, small).fourier()[-1])

    sigma, sigma_p = 0.4, 0.2
    tab = dy.galerkin_convergence(S, 4, 1.0, gb.sample_gff(gb.GffSampler(S), 1, 0)[0], 0.1, [8, 16, 32, 64],
                                  sigma_prime=sigma_p)
    errs = [e for _, e in tab.rows]
    monotone = all(b <= a for a, b in zip(errs, errs[1:]))
    elapsed = time.perf_counter() - t0
    verdict(6, [("mass drift per unit time", f"{drift:.1e}", drift <= 1e-8),
                ("energy Richardson ratio", f"{ratio:.2f}", 3 <= ratio <= 5),
                ("Picard vs Strang", f"{gap:.1e}", gap <= 1e-6),
                ("Galerkin errors non-increasing", str(monotone), monotone),
                ("Galerkin exponent", f"{tab.exponent:.3f}", tab.exponent <= -(sigma - sigma_p) + 0.3),
                ("time", f"{elapsed:.1f}s", elapsed < 300)])


def test_criterion_7_gibbs(verdict):
    t0 = time.perf_counter()
    V = pt.white_noise(64, 3)
    S = _spectrum(V, 32)
    points = np.linspace(0, 1, 6, endpoint=False)
    s = gb.GffSampler(S)
    rep = gb.covariance_check(s, points, 2000, seed=0)
    cov_ok = rep.max_deviation <= 3 * rep.stderr
    ratio = gb.covariance_scaling(s, points, 500, seed=0)

    s8 = gb.GffSampler(S, 8)
    bound = gb.log_weight_bound(s8.lambda1, 1.0, 4)
    r = np.linspace(0, 10, 200001)
    grid_max = np.max((1 - s8.lambda1) * r**2 - 0.5 * r**4)
    ens = gb.gibbs_ensemble(s8, 2000, 0, 1.0, 4)
    respected = np.max(ens.log_weights) <= bound + 1e-12
    bound_ok = bool(np.isfinite(bound) and abs(bound - grid_max) <= 1e-8 and respected)

    # importance sampling at lam = 0 against direct draws from N(0, 1/lambda_n)
    c = V.field.coeffs.copy()
    c[V.max_freq] += 3.0
    Sp = _spectrum(pt.custom(FourierField(V.max_freq, c, True), 0.49), 32)
    sp = gb.GffSampler(Sp, 8)
    ens0 = gb.gibbs_ensemble(sp, 4000, 0, 0.0, 4)
    lam = sp.basis.eigenvalues
    direct = np.array([complex_normal(stream(1, "direct", i), 8) for i in range(4000)]) / np.sqrt(lam)
    direct = sp.basis.synthesize(direct)
    z = []
    for f in (lambda C: np.sum(np.abs(C) ** 2, axis=1), lambda C: gb.lp_power(C, 4)):
        m_is, se_is = ens0.weighted_mean(f(ens0.samples))
        vals = f(direct)
        z.append(abs(m_is - vals.mean()) / math.hypot(se_is, vals.std(ddof=1) / math.sqrt(len(vals))))
    elapsed = time.perf_counter() - t0
    verdict(7, [("covariance max deviation / stderr", f"{rep.max_deviation / rep.stderr:.2f}", cov_ok),
                ("CLT ratio", f"{ratio:.2f}", 1.7 <= ratio <= 2.3),
                ("weight bound", f"{bound:.4f} (grid {grid_max:.4f}, max log-weight {np.max(ens.log_weights):.4f})",
                 bound_ok),
                ("importance sampling |z|", "/".join(f"{x:.2f}" for x in z), max(z) <= 3),
                ("time", f"{elapsed:.1f}s", elapsed < 480)])


def test_criterion_8_invariance(verdict):
    t0 = time.perf_counter()
    S = _spectrum(pt.white_noise(64, 3), 32)
    ens = gb.gibbs_ensemble(gb.GffSampler(S, 16), 2000, 0, 1.0, 4)
    run = dy.NlsRun(S, 4, 1.0, 16, 1e-3, 1.0)
    rep = gb.invariance_experiment(ens, run, ("l4", "mode1", "h14"), T=1.0, n_bootstrap=1000, seed=0)

    plan = dy.PropagatorPlan(S)

    def inflate(F):
        return S.synthesize(S.coefficients(1.05 * F) * plan.phases(1.0))

    control = gb.invariance_experiment(ens, run, ("mass",), T=1.0, n_bootstrap=1000, seed=0, flow=inflate)
    elapsed = time.perf_counter() - t0
    checks = [(name, f"|delta|/sigma {abs(r.delta) / r.sigma_boot:.2f}", r.passed) for name, r in rep.results.items()]
    verdict(8, checks + [("blowups", str(rep.n_blowups), rep.n_blowups == 0),
                         ("ESS", f"{rep.ess:.0f}", rep.ess >= 100),
                         ("negative control rejected", str(not control.passed), not control.passed),
                         ("time", f"{elapsed:.1f}s", elapsed < 480)])


def test_criterion_9_threshold(verdict):
    a = dy.sigma_critical(dy.ThresholdQuery(4, 0.5))
    b = dy.sigma_critical(dy.ThresholdQuery(10, 0.5))
    verdict(9, [("sigma(4, 0.5)", repr(a), a == 0.25), ("sigma(10, 0.5)", repr(b), b == 1 / 3)])


def _run_demo(root: Path):
    shutil.copytree(CONFIGS, root / "configs")
    cwd = os.getcwd()
    os.chdir(root)
    try:
        codes = {name: cli.main(["--config", f"configs/{name}.json"]) for name in DEMO_ORDER}
    finally:
        os.chdir(cwd)
    outs = {}
    for name in DEMO_ORDER:
        out = root / load_config(root / "configs" / f"{name}.json").output_dir
        outs[name] = RunManifest.read(out / MANIFEST_NAME).outputs
    return codes, outs


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    t0 = time.perf_counter()
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    codes_a, outs_a = _run_demo(tmp_path / "a")
    codes_b, outs_b = _run_demo(tmp_path / "b")
    capsys.readouterr()
    same = [n for n in DEMO_ORDER if outs_a[n] == outs_b[n] and outs_a[n]]
    repro = []
    for name in DEMO_ORDER:
        out = tmp_path / "a" / load_config(tmp_path / "a" / "configs" / f"{name}.json").output_dir
        if not reproduce(out).differences:
            repro.append(name)
    elapsed = time.perf_counter() - t0
    ok_codes = all(c == 0 for c in codes_a.values()) and codes_a == codes_b
    verdict(10, [("exit codes", "/".join(str(codes_a[n]) for n in DEMO_ORDER), ok_codes),
                 ("identical digests across two runs", f"{len(same)}/{len(DEMO_ORDER)}", len(same) == len(DEMO_ORDER)),
                 ("reproduce", f"{len(repro)}/{len(DEMO_ORDER)}", len(repro) == len(DEMO_ORDER)),
                 ("time", f"{elapsed:.1f}s", True)])
