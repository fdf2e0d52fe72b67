"""Time the compiled and pure-Python kernels side by side.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the best-of-N wall time for the split scan, tree routing and an
end-to-end forest fit, and checks that both backends agree bit for bit.
"""
import argparse
import time

import numpy as np

from ucts import _backend, forest, sample_2d
from ucts.forest import ForestConfig
from ucts.tree import GrowthParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def scan_case(kern, m=20000, K=3, seed=0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.normal(size=m))
    t = rng.integers(0, K, m).astype(np.int64)
    y = rng.normal(size=m)
    est = np.array([y[t == k].mean() for k in range(K)])
    return lambda: kern.uplift_scan(x, t, y, est, 25, 1.0, m // 10)


def fit_case(name, n=1000, ntree=50):
    data = sample_2d(n, 0)
    cfg = ForestConfig(ntree=ntree, growth=GrowthParams(min_split=80))

    def run():
        with _backend.use_backend(name):
            return forest.train(data, cfg)
    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    if "cython" not in names:
        print("compiled backend not built; timing the Python kernels only")
    rows = []
    results = {}
    X = sample_2d(50000, 1).features
    for name in names:
        kern = _backend.load(name)
        t_scan, scan_out = best_of(scan_case(kern), args.repeat)
        t_fit, model = best_of(fit_case(name), max(1, args.repeat // 2))
        with _backend.use_backend(name):
            t_apply, mu = best_of(lambda: model.predict_mu(X), args.repeat)
        results[name] = (scan_out, mu)
        rows.append((name, t_scan, t_apply, t_fit))

    print(f"{'backend':<8} {'uplift_scan':>12} {'predict 100k':>13} {'fit 50 trees':>13}")
    for name, a, b, c in rows:
        print(f"{name:<8} {a * 1e3:>10.2f}ms {b * 1e3:>11.2f}ms {c:>12.3f}s")
    if len(rows) == 2:
        (_, a0, b0, c0), (_, a1, b1, c1) = rows
        print(f"{'speedup':<8} {a1 / a0:>11.1f}x {b1 / b0:>12.1f}x {c1 / c0:>12.1f}x")
        same = results["cython"][0] == results["python"][0] and np.array_equal(
            results["cython"][1], results["python"][1])
        print("backends agree bit for bit:", same)


if __name__ == "__main__":
    main()
