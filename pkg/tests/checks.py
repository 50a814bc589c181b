"""Shared experiment-level checks used by the module tests and the acceptance suite."""

import math
from itertools import combinations_with_replacement

import numpy as np

import oracles
from mutinf import depmeasures as dm
from mutinf.depmeasures import Kind, Measure, PairedSamples

REL_TOL = 1e-12

ORACLES = {
    Measure.PEARSON: oracles.pearson,
    Measure.KENDALL: oracles.kendall,
    Measure.SPEARMAN: oracles.spearman,
    Measure.DCOR: oracles.dcor,
    Measure.DISCRETE_MI: oracles.discrete_mi,
    Measure.MIC: oracles.mic,
}


def close(a, b, tol=REL_TOL):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1.0)


def small_inputs(max_len=8, alphabet=(0, 1, 2)):
    """Every multiset of paired symbols up to ``max_len`` samples.

    The estimators are invariant under reordering the pairs, so multisets
    cover all sequences.
    """
    cells = [(a, b) for a in alphabet for b in alphabet]
    for n in range(1, max_len + 1):
        for combo in combinations_with_replacement(cells, n):
            yield [c[0] for c in combo], [c[1] for c in combo]


def compare(measure, x, y, p=None):
    """Return ``None`` on agreement, else a description of the mismatch."""
    if p is None:
        p = PairedSamples.of(np.array(x, dtype=np.int64), np.array(y, dtype=np.int64))
    got = dm.estimate(measure, p)
    want = ORACLES[measure](x, y)
    if want is None:
        return None if not got.defined else f"{measure.value} {x} {y}: expected undefined, got {got.value}"
    if not got.defined:
        return f"{measure.value} {x} {y}: expected {want}, got undefined"
    if not close(got.value, want):
        return f"{measure.value} {x} {y}: expected {want!r}, got {got.value!r}"
    return None


def oracle_sweep(max_len=8):
    """Compare every oracle-backed measure on all small inputs."""
    cases, failures = 0, []
    for x, y in small_inputs(max_len):
        p = PairedSamples(dm.SampleSeries(x, Kind.DISCRETE), dm.SampleSeries(y, Kind.DISCRETE))
        for measure in ORACLES:
            cases += 1
            err = compare(measure, x, y, p)
            if err:
                failures.append(err)
    return cases, failures


def knn_sweep(n_cases=40, seed=3):
    """kNN MI against the loop oracle on random sizes at and above the minimum."""
    rng = np.random.default_rng(seed)
    failures = []
    for _ in range(n_cases):
        n = int(rng.integers(dm.KNN_MIN_SAMPLES, 40))
        x = rng.integers(0, 3, n).astype(float)
        y = rng.integers(0, 3, n).astype(float) if rng.random() < 0.5 else rng.normal(size=n)
        got = dm.continuous_mi_knn(PairedSamples.of(x, y, Kind.CONTINUOUS, Kind.CONTINUOUS))
        want = float(oracles.ksg_tiebroken(list(x), list(y)))
        if not close(got.raw, want):
            failures.append(f"knn n={n}: expected {want!r}, got {got.raw!r}")
    return n_cases, failures


def _random_pair(rng):
    n = int(rng.integers(2, 60))
    style = rng.integers(0, 3)
    if style == 0:
        x = rng.integers(0, 4, n)
        y = rng.integers(0, 4, n)
    elif style == 1:
        x = rng.normal(size=n)
        y = x + rng.normal(scale=float(rng.random()), size=n)
    else:
        x = rng.integers(0, 6, n)
        y = (x * 7 + rng.integers(0, 2, n)) % 5
    return x, y


def property_sweep(n_inputs=1000, seed=11):
    """Symmetry, range and invariance properties on seeded random inputs."""
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_inputs):
        x, y = _random_pair(rng)
        p = PairedSamples.of(x, y)
        q = p.swapped()
        for m in dm.ALL_MEASURES:
            if not dm.applicable(m, p) or (m is Measure.KNN_MI and len(p) < dm.KNN_MIN_SAMPLES):
                continue
            a, b = dm.estimate(m, p), dm.estimate(m, q)
            if a.defined != b.defined or (a.defined and not close(a.value, b.value)):
                failures.append(f"#{i} {m.value} symmetry {a.value} vs {b.value}")
            if a.defined:
                lo, hi = (-1.0, 1.0) if m.signed else (0.0, math.inf)
                if m in (Measure.DCOR, Measure.MIC):
                    hi = 1.0
                if not lo <= a.value <= hi:
                    failures.append(f"#{i} {m.value} range {a.value}")
        # monotone invariance of the rank measures
        fx = np.exp(np.asarray(x, dtype=float) / 3.0) * 2.0 - 1.0
        r = PairedSamples.of(fx, y)
        for m in (Measure.KENDALL, Measure.SPEARMAN):
            a, b = dm.estimate(m, p), dm.estimate(m, r)
            if a.defined != b.defined or (a.defined and not close(a.value, b.value)):
                failures.append(f"#{i} {m.value} monotone {a.value} vs {b.value}")
        # affine behaviour of Pearson
        a = dm.pearson(p)
        if a.defined:
            scale = 0.5 + float(rng.random()) * 4.0
            pos = dm.pearson(PairedSamples.of(scale * np.asarray(x, float) + 3.0, y))
            neg = dm.pearson(PairedSamples.of(-scale * np.asarray(x, float) + 3.0, y))
            if not close(pos.value, a.value, 1e-9) or not close(neg.value, -a.value, 1e-9):
                failures.append(f"#{i} pearson affine {a.value} {pos.value} {neg.value}")
        # relabelling of symbols for discrete MI
        if dm.applicable(Measure.DISCRETE_MI, p):
            xs = np.unique(x)
            code = dict(zip(xs.tolist(), rng.permutation(len(xs)) * 10 + 100))
            rx = np.array([code[v] for v in np.asarray(x).tolist()])
            a = dm.discrete_mi(p)
            b = dm.discrete_mi(PairedSamples.of(rx, y))
            if not close(a.value, b.value):
                failures.append(f"#{i} discrete_mi relabel {a.value} vs {b.value}")
            hx = oracles.discrete_mi(list(x), list(x))
            hy = oracles.discrete_mi(list(y), list(y))
            if a.value > min(hx, hy) + 1e-12:
                failures.append(f"#{i} discrete_mi above entropy bound")
    return n_inputs, failures
