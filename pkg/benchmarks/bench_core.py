"""Compare the compiled and numpy implementations of the hot kernels.

    python benchmarks/bench_core.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from aglerkit import _pycore

try:
    from aglerkit import _core
except ImportError:
    _core = None


def cases(rng):
    def c(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    for n, N, m in [(2, 1, 1000), (5, 1, 1000), (4, 2, 500), (6, 3, 200)]:
        z = 0.9 * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
        yield f"genkernel_forms n={n} N={N} m={m}", "genkernel_forms", (z, c(n, N, N), c(m, N), c(m, N))
    for n, p, e, m in [(3, 1, 1, 5000), (5, 2, 2, 2000), (5, 3, 3, 1000)]:
        yield (f"kernel_matrices n={n} p={p} e={e} m={m}", "kernel_matrices",
               (c(n, n, p, p), c(n, n, e, e), c(m, n, p, e)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; only the numpy path is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'case':44s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for label, name, a in cases(rng):
        py = getattr(_pycore, name)
        t_py = min(timeit.repeat(lambda: py(*a), number=1, repeat=args.repeat)) * 1e3
        if _core is None:
            print(f"{label:44s} {t_py:10.2f}")
            continue
        cy = getattr(_core, name)
        t_cy = min(timeit.repeat(lambda: cy(*a), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(py(*a) - cy(*a))))
        print(f"{label:44s} {t_py:10.2f} {t_cy:10.2f} {t_py / t_cy:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
