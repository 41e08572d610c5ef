"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 7] [--sizes 256,4096,65536]

Times each elementwise kernel on a (16, n) complex grid, then a short
Strang integration with each backend swapped in.
"""
import argparse
import timeit

import numpy as np

from anls import _pykernels, kernels

try:
    from anls import _ckernels
except ImportError:
    _ckernels = None


def best(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_table(sizes, repeat):
    rng = np.random.default_rng(0)
    cases = [("nonlinearity m=4", "nonlinearity", (4,)), ("nonlinearity m=7", "nonlinearity", (7,)),
             ("phase_rotate m=4", "phase_rotate", (1e-3, 4)), ("power_sum p=4", "power_sum", (4.0,)),
             ("power_sum p=3.5", "power_sum", (3.5,))]
    print(f"{'kernel':<18}{'n':>8}{'numpy (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for n in sizes:
        u = rng.standard_normal((16, n)) + 1j * rng.standard_normal((16, n))
        for label, name, args in cases:
            fn = getattr(kernels, name)
            tp = best(lambda: fn(u, *args, impl=_pykernels), repeat)
            if _ckernels is None:
                print(f"{label:<18}{n:>8}{tp * 1e6:>14.1f}{'-':>14}{'-':>10}")
                continue
            tc = best(lambda: fn(u, *args, impl=_ckernels), repeat)
            print(f"{label:<18}{n:>8}{tp * 1e6:>14.1f}{tc * 1e6:>14.1f}{tp / tc:>10.2f}")


def strang_table(repeat):
    from anls import dynamics as dy
    from anls import gibbs as gb
    from anls import operator as op
    from anls import potential as pt

    S = op.diagonalize(op.assemble(pt.white_noise(128, 3), 64))
    run = dy.NlsRun(S, 4, 1.0, 32, 1e-3, 0.05)
    A0 = gb.sample_gff_coeffs(gb.GffSampler(S, 32), 64, 0)
    saved = kernels._impl
    times = {}
    try:
        for name, impl in (("numpy", _pykernels), ("cython", _ckernels)):
            if impl is None:
                continue
            kernels._impl = impl
            times[name] = best(lambda: dy.evolve_batch(run, A0), max(1, repeat // 2))
    finally:
        kernels._impl = saved
    line = "  ".join(f"{k} {v * 1e3:.1f} ms" for k, v in times.items())
    print(f"\nStrang, 64 samples x 32 modes x 50 steps: {line}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--sizes", default="256,4096,65536")
    args = ap.parse_args()
    print(f"default backend: {kernels.BACKEND}")
    kernel_table([int(x) for x in args.sizes.split(",")], args.repeat)
    strang_table(args.repeat)


if __name__ == "__main__":
    main()
