"""Compare the numba kernels against the pure-NumPy fallback.

    python benchmarks/bench_kernels.py [--n 10000] [--repeat 3]

Each model is fitted on the default synthetic throughput split under both
backends; the script also checks that the two backends give bit-identical
predictions and reports single-row prediction latency.
"""
import argparse
import time

import numpy as np

from nrpredict import _accel
from nrpredict.ingest import derive_features
from nrpredict.models import default_hyper, fit_model, predict
from nrpredict.preprocess import prepare
from nrpredict.synthgen import GeneratorConfig, generate_trace

KINDS = ("tree", "random_forest", "xgb_style", "lgbm_style")


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def row_latency(model, rows, n=2000):
    lat = np.empty(n)
    for i in range(n):
        x = rows[i % len(rows)][None, :]
        t0 = time.perf_counter()
        predict(model, x)
        lat[i] = time.perf_counter() - t0
    return np.median(lat) * 1e3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trees", type=int, default=None, help="override n_trees for ensembles")
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    train, test, _ = prepare(derive_features(generate_trace(GeneratorConfig(n_samples=args.n)), "throughput"))
    print(f"train={train.n} test={test.n} repeat={args.repeat}")
    print(f"{'model':<15}{'numba fit s':>13}{'numpy fit s':>13}{'speedup':>9}{'row ms nb':>11}{'row ms np':>11}  same")
    prev = _accel.backend()
    try:
        for kind in KINDS:
            extra = {"n_trees": args.trees} if args.trees and kind != "tree" else {}
            hyper = default_hyper(kind, **extra)
            res = {}
            for backend in ("numba", "numpy"):
                _accel.set_backend(backend)
                fit_model(kind, train.take(np.arange(min(200, train.n))), hyper)  # compile / warm caches
                secs, model = best_of(lambda: fit_model(kind, train, hyper), args.repeat)
                res[backend] = (secs, predict(model, test.rows), row_latency(model, test.rows))
            nb, npy = res["numba"], res["numpy"]
            same = np.array_equal(nb[1], npy[1])
            print(f"{kind:<15}{nb[0]:>13.3f}{npy[0]:>13.3f}{npy[0] / nb[0]:>8.1f}x{nb[2]:>11.4f}{npy[2]:>11.4f}  {same}")
    finally:
        _accel.set_backend(prev)


if __name__ == "__main__":
    main()
