"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each kernel runs on the same inputs under both backends; the table reports
the best-of-``repeat`` wall time and the speed-up. The end-to-end rows time
one full estimate of every measure on a 2000-sample window and 1000 steps
of the SCN3 camera scenario.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from mutinf import depmeasures as dm
from mutinf import kernels
from mutinf.env import make_scenario
from mutinf.env.camera import PAN_LEVELS, TILT_LEVELS, ZOOM_LEVELS


def kernel_cases(rng):
    n = 2000
    x = rng.normal(size=n)
    y = x + rng.normal(size=n)
    sizes = rng.integers(1, 6, 400)
    counts = rng.integers(0, 6, (300, 8))
    prefix = np.vstack([np.zeros((1, 8), dtype=np.int64), np.cumsum(counts, axis=0)])
    xlogx = dm._xlogx_table(int(prefix[-1].sum()))
    m, t = 6, 200
    vis = (rng.uniform(0, 20, m), rng.uniform(0, 20, m), *np.split(rng.normal(size=2 * m), 2),
           np.full(m, 0.9), np.full(m, 0.5), np.full(m, 7.0), rng.uniform(0, 20, t), rng.uniform(0, 20, t),
           np.array([[4.0, 4.0, 5.0, 5.0], [10.0, 3.0, 12.0, 7.0]]))
    return {
        "kendall_score n=2000": lambda impl: kernels.kendall_score(x, y, impl),
        "dcov_sums n=2000": lambda impl: kernels.dcov_sums(x, y, impl),
        "ksg_counts n=2000 k=3": lambda impl: kernels.ksg_counts(x, y, 3, impl),
        "equipartition 400 groups": lambda impl: kernels.equipartition(sizes, 20, impl),
        "mic_dp 300 clumps x 8": lambda impl: kernels.mic_dp(prefix, xlogx, 8, impl),
        "scn_visibility 6 cams 200 targets": lambda impl: kernels.scn_visibility(*vis, impl=impl),
    }


def end_to_end_cases(rng):
    n = 2000
    x = rng.integers(0, 12, n).astype(float)
    r = ((x > 5) + rng.integers(0, 3, n)).astype(float)
    pairs = dm.PairedSamples.of(x, r)
    configs = [{f"cam{i}": (float(rng.choice(PAN_LEVELS)), float(rng.choice(TILT_LEVELS)),
                            float(rng.choice(ZOOM_LEVELS))) for i in range(1, 7)} for _ in range(1000)]

    def measures(_):
        for m in dm.ALL_MEASURES:
            dm.estimate(m, pairs)

    def scenario(_):
        sc = make_scenario("SCN3", "discrete", 0)
        for joint in configs:
            sc.step(joint)

    return {"all measures, 2000 samples": measures, "SCN3 1000 steps": scenario}


def best_time(fn, impl, repeat):
    return min(timeit.repeat(lambda: fn(impl), number=1, repeat=repeat))


def swap_backend(impl):
    """Point the dispatching module at ``impl``; returns the previous module."""
    prev = kernels._impl
    kernels._impl = impl
    return prev


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the pure-Python backend is available", file=sys.stderr)
        return 1
    py, cy = backends["python"], backends["cython"]
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in kernel_cases(rng).items():
        rows.append((name, best_time(fn, py, args.repeat), best_time(fn, cy, args.repeat)))
    for name, fn in end_to_end_cases(rng).items():
        times = []
        for impl in (py, cy):
            prev = swap_backend(impl)
            try:
                times.append(best_time(fn, None, max(1, args.repeat // 2)))
            finally:
                swap_backend(prev)
        rows.append((name, *times))
    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'python s':>10}  {'cython s':>10}  {'speed-up':>8}")
    for name, tp, tc in rows:
        print(f"{name:<{width}}  {tp:10.5f}  {tc:10.5f}  {tp / tc:8.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "python_seconds", "cython_seconds", "speedup"])
            for name, tp, tc in rows:
                w.writerow([name, repr(tp), repr(tc), repr(tp / tc)])
    return 0


if __name__ == "__main__":
    sys.exit(main())
