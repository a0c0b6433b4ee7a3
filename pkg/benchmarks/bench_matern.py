"""Benchmark: compiled Matern kernel vs the pure-Python fallback.

Times the construction of dense Matern correlation matrices, the hot step
of a spatial grid fit (every distinct range value rebuilds the matrix).
Half-integer smoothness hits the vectorized closed forms in both
backends; general smoothness exercises the series/large-argument kernel,
where the compiled loop is expected to dominate.

Run as ``python benchmarks/bench_matern.py``.
"""

import time

import numpy as np

from pcvcm.kernels import _matern_py

try:
    from pcvcm.kernels import _matern_c
except ImportError:
    _matern_c = None


def time_call(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'nu':>5} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for n in (100, 300, 600):
        locations = rng.uniform(0.0, 10.0, size=(n, 2))
        diff = locations[:, None, :] - locations[None, :, :]
        dists = np.sqrt((diff ** 2).sum(axis=-1)).reshape(-1)
        for nu in (1.5, 0.8):
            t_py = time_call(_matern_py.matern_many, dists, nu, 2.0)
            if _matern_c is None:
                print(f"{n:>6} {nu:>5} {t_py * 1e3:>10.2f}ms {'n/a':>12}")
                continue
            t_c = time_call(_matern_c.matern_many, dists, nu, 2.0)
            np.testing.assert_allclose(
                _matern_c.matern_many(dists, nu, 2.0),
                _matern_py.matern_many(dists, nu, 2.0), rtol=1e-6)
            print(f"{n:>6} {nu:>5} {t_py * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms "
                  f"{t_py / t_c:>8.1f}x")
    if _matern_c is None:
        print("compiled kernel not built; showing fallback timings only")


if __name__ == "__main__":
    main()
