"""Compiled-vs-pure backend timing for the kernel and solver hot paths.

Run from the repository root after an editable install:

    python benchmarks/bench_smo.py --sizes 100 200 400 --repeats 3

Both backends are driven with identical inputs, and the script checks that
their outputs agree bit-for-bit before reporting timings, so the speedups
always describe the same arithmetic.
"""

import argparse
import time

import numpy as np

from fleetrisk._core import BACKEND, pure

try:
    from fleetrisk._core import _speedups as compiled
except ImportError:
    compiled = None


def make_problem(n: int, seed: int):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([
        rng.normal(size=(half, 6)) + 0.8,
        rng.normal(size=(n - half, 6)) - 0.8,
    ])
    y = np.r_[np.ones(half), -np.ones(n - half)]
    caps = 4.0 * rng.uniform(0.1, 1.0, size=n)
    return X, y, caps


def run_once(impl, X, y, caps):
    n = X.shape[0]
    t0 = time.perf_counter()
    K = impl.gram_matrix(X, pure.RBF, 0.25, 0.0)
    t_gram = time.perf_counter() - t0
    t0 = time.perf_counter()
    out = impl.smo_solve(K, y, caps, 1e-6, 1e-12, 10 * n, 1_000_000)
    t_smo = time.perf_counter() - t0
    return K, out, t_gram, t_smo


def best_of(impl, X, y, caps, repeats):
    gram_times, smo_times = [], []
    K = out = None
    for _ in range(repeats):
        K, out, t_gram, t_smo = run_once(impl, X, y, caps)
        gram_times.append(t_gram)
        smo_times.append(t_smo)
    return K, out, min(gram_times), min(smo_times)


def check_identical(res_pure, res_comp):
    K_p, out_p = res_pure
    K_c, out_c = res_comp
    if not np.array_equal(K_p, K_c):
        raise AssertionError("gram matrices differ between backends")
    alpha_p, G_p, obj_p, iters_p, conv_p = out_p
    alpha_c, G_c, obj_c, iters_c, conv_c = out_c
    if not (np.array_equal(alpha_p, alpha_c) and np.array_equal(G_p, G_c)):
        raise AssertionError("solver vectors differ between backends")
    if (obj_p, iters_p, conv_p) != (obj_c, iters_c, conv_c):
        raise AssertionError("solver scalars differ between backends")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400])
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats; the best run is reported")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    print(f"default backend: {BACKEND}")
    if compiled is None:
        print("compiled extension not built; timing the pure backend only")
    header = f"{'n':>6} {'gram pure':>11} {'gram comp':>11} {'x':>6} " \
             f"{'smo pure':>11} {'smo comp':>11} {'x':>6} {'iters':>7}"
    print(header)
    for n in args.sizes:
        X, y, caps = make_problem(n, args.seed)
        K_p, out_p, gram_p, smo_p = best_of(pure, X, y, caps, args.repeats)
        if compiled is None:
            print(f"{n:>6} {gram_p * 1e3:>9.1f}ms {'-':>11} {'-':>6} "
                  f"{smo_p * 1e3:>9.1f}ms {'-':>11} {'-':>6} {out_p[3]:>7}")
            continue
        K_c, out_c, gram_c, smo_c = best_of(compiled, X, y, caps, args.repeats)
        check_identical((K_p, out_p), (K_c, out_c))
        print(f"{n:>6} {gram_p * 1e3:>9.1f}ms {gram_c * 1e3:>9.1f}ms "
              f"{gram_p / gram_c:>5.1f}x {smo_p * 1e3:>9.1f}ms "
              f"{smo_c * 1e3:>9.1f}ms {smo_p / smo_c:>5.1f}x {out_p[3]:>7}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
