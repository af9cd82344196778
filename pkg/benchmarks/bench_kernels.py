"""Time the compiled MI kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--n 250] [--n-bins 16] [--n-perm 100] [--pairs 200]
"""
import argparse
import timeit

import numpy as np

from crashnet import _pykernels

try:
    from crashnet import _ckernels
except ImportError:
    _ckernels = None


def workload(mod, pairs, nb, n_perm):
    def run():
        for bx, by, u in pairs:
            mod.joint_mi(bx, by, nb)
            mod.perm_mi(bx, by, nb, mod.fisher_yates(u))
    return run


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=250)
    ap.add_argument("--n-bins", type=int, default=16)
    ap.add_argument("--n-perm", type=int, default=100)
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    pairs = [
        (rng.integers(0, args.n_bins, args.n).astype(np.intp),
         rng.integers(0, args.n_bins, args.n).astype(np.intp),
         rng.random((args.n_perm, args.n - 1)))
        for _ in range(args.pairs)
    ]
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.insert(0, ("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the fallback only")

    times = {}
    for name, mod in backends:
        best = min(timeit.repeat(workload(mod, pairs, args.n_bins, args.n_perm), number=1, repeat=args.repeat))
        times[name] = best
        print(f"{name:>7}: {best * 1e3:9.1f} ms for {args.pairs} pairs "
              f"({best / args.pairs * 1e6:8.1f} us/pair, n={args.n}, n_perm={args.n_perm})")
    if len(times) == 2:
        print(f"speed-up: {times['python'] / times['cython']:.1f}x")

    if _ckernels is not None:
        bx, by, u = pairs[0]
        a = _ckernels.perm_mi(bx, by, args.n_bins, _ckernels.fisher_yates(u))
        b = _pykernels.perm_mi(bx, by, args.n_bins, _pykernels.fisher_yates(u))
        print(f"max |cython - python| on one pair: {np.max(np.abs(a - b)):.3e}")


if __name__ == "__main__":
    main()
