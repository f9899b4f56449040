"""Time each hot kernel under the numba and the numpy backend.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends get identical inputs; the script also checks that they agree.
"""

import argparse
import time

import numpy as np

from netshuffle import _accel, kernels
from netshuffle.graph import generate_topology, stationary_distribution, walk_distributions
from netshuffle.protocol import partition_powers


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    g = generate_topology("erdos_renyi", 200, seed=0, p=0.05)
    indptr, indices = g.csr
    starts = rng.integers(0, g.n, 200_000)
    steps = rng.random((200_000, 40))
    yield "walk_destinations 200k x 40 steps", lambda b: kernels.walk_destinations(indptr, indices, starts, steps, b)

    cdf = np.cumsum(rng.dirichlet(np.ones(16), size=8), axis=1)
    rows = rng.integers(0, 8, 2_000_000)
    u = rng.random(2_000_000)
    yield "inverse_cdf 2M draws, k=16", lambda b: kernels.inverse_cdf(cdf, rows, u, b)

    small = generate_topology("erdos_renyi", 6, seed=1, p=0.6)
    sym = rng.dirichlet(np.ones(2), size=6)
    dest = walk_distributions(small, 8).T.copy()
    powers = partition_powers(6, 2)
    yield "enumerate_assignments 12^6 atoms", lambda b: kernels.enumerate_assignments(sym, dest, powers, b)

    g8 = generate_topology("erdos_renyi", 8, seed=2, p=0.5)
    L = np.log(walk_distributions(g8, 6)) - np.log(stationary_distribution(g8))[:, None]
    yield "log_ratio_extremes 8^8 assignments", lambda b: kernels.log_ratio_extremes(L, b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':38s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fn in cases():
        fn("numba")  # compile, or load from cache
        t_nb, a = best_of(lambda: fn("numba"), args.repeat)
        t_np, b = best_of(lambda: fn("numpy"), args.repeat)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
        print(f"{name:38s} {t_nb * 1e3:8.1f}ms {t_np * 1e3:8.1f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
