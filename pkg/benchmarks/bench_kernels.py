"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 10000] [--repeat 3]

Each line reports the best of ``--repeat`` runs for both backends and the
speed-up of the compiled one.  Data are shaped like the detector workloads:
five features, PU-sized training sets.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from puea.oneclass import (
    DetectorParams,
    IForestParams,
    McdParams,
    OcsvmParams,
    _backend,
    fit_detector,
)
from puea.oneclass.ocsvm import initial_alpha, scale_gamma


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rows: int, rng):
    X = rng.normal(size=(rows, 5)) @ rng.normal(size=(5, 5))
    Q = rng.normal(size=(rows // 10, 5))
    small = X[:2000]
    gamma = scale_gamma(small)
    tree_rows = X[:256]
    u = rng.random(512), rng.random(512)
    forest = fit_detector("iforest", X, DetectorParams(iforest=IForestParams(100, 256, 0)))
    leaf_adj = np.zeros(len(forest.feature))
    idx = np.sort(rng.choice(rows, size=(32, rows // 2)), axis=1)
    mu = X[:32].copy()
    prec = np.broadcast_to(np.eye(5), (32, 5, 5)).copy()

    def kernel(name, *args):
        return lambda k: getattr(k, name)(*args)

    return {
        "knn self k=20": kernel("knn", X, X, 20, True),
        "knn query k=20": kernel("knn", Q, X, 20, False),
        "build_itree x100": lambda k: [k.build_itree(tree_rows, *u, 8) for _ in range(100)],
        "forest_path_length": kernel("forest_path_length", X, forest.feature, forest.split, forest.left,
                                     forest.right, leaf_adj, forest.roots),
        "smo m=2000": kernel("smo_one_class", small, gamma, 1 / (0.05 * 2000), 1e-4, 100_000, 2000,
                             initial_alpha(2000, 0.05)),
        "scatter 32 subsets": kernel("scatter", X, idx),
        "mahalanobis 32 fits": kernel("mahalanobis_sq", X, mu, prec),
        "rbf_decision": kernel("rbf_decision", Q, small[:500], np.full(500, 1 / 500), gamma),
    }, X


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=10_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--no-fits", action="store_true", help="skip whole-detector timings")
    args = parser.parse_args(argv)

    if "cython" not in _backend.available():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    jobs, X = workloads(args.rows, rng)
    backends = {name: _backend.get(name) for name in ("python", "cython")}

    print(f"{'kernel':<22}{'python s':>11}{'cython s':>11}{'speed-up':>10}")
    for label, job in jobs.items():
        t = {name: best_of(lambda: job(k), args.repeat) for name, k in backends.items()}
        print(f"{label:<22}{t['python']:>11.4f}{t['cython']:>11.4f}{t['python'] / t['cython']:>9.1f}x")

    if args.no_fits:
        return
    params = DetectorParams(ocsvm=OcsvmParams(), mcd=McdParams())
    print(f"\n{'fit + calibrate':<22}{'python s':>11}{'cython s':>11}{'speed-up':>10}")
    for kind in ("iforest", "ocsvm", "mcd", "lof"):
        t = {}
        for name in backends:
            with _backend.use(name):
                t[name] = best_of(lambda: fit_detector(kind, X, params), 1)
        print(f"{kind:<22}{t['python']:>11.4f}{t['cython']:>11.4f}{t['python'] / t['cython']:>9.1f}x")


if __name__ == "__main__":
    main()
