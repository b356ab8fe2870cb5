"""Compare the compiled kernels against the pure-Python fallback.

Run from the repository root::

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Each kernel is timed on the same inputs under both backends (best of
``--repeat`` runs) and the outputs are checked for agreement.
"""
import argparse
import time

import numpy as np

from mixedbias import _kernels_py

try:
    from mixedbias import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(quick):
    rng = np.random.default_rng(0)
    n = 20_000 if quick else 100_000
    p = 10 if quick else 20
    x = rng.standard_normal(n) * 10.0 ** rng.integers(-8, 8, n)
    Phi = np.ascontiguousarray(rng.standard_normal((n // 10, p)))
    w = rng.uniform(0.5, 2.0, n // 10)
    X = rng.standard_normal((4 * p, p))
    G = np.ascontiguousarray(X.T @ X / X.shape[0])
    M = rng.standard_normal(p)
    return [
        (f"compensated_mean n={n}", lambda k: k.compensated_mean(x)),
        (f"compensated_colmeans {Phi.shape}", lambda k: k.compensated_colmeans(Phi)),
        (f"weighted_gram_mean {Phi.shape}", lambda k: k.weighted_gram_mean(Phi, w)),
        (f"lasso_cd p={p}", lambda k: k.lasso_cd(G, M, 0.05, 1e-12, 10_000)[0]),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the fallback can be timed")

    print(f"{'kernel':<40}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}  agree")
    for label, call in _cases(args.quick):
        t_py, out_py = _best(lambda: call(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{label:<40}{t_py:>12.4g}{'-':>12}{'-':>10}")
            continue
        t_c, out_c = _best(lambda: call(_kernels_c), args.repeat)
        a, b = np.asarray(out_py, dtype=float), np.asarray(out_c, dtype=float)
        scale = max(1.0, float(np.abs(a).max()))
        agree = bool(np.abs(a - b).max() <= 1e-12 * scale)
        print(f"{label:<40}{t_py:>12.4g}{t_c:>12.4g}{t_py / t_c:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
