"""Estimators of statistical dependence between two paired sample series.

All estimators take a :class:`PairedSamples` and return a
:class:`DependencyEstimate`. Information-theoretic values are in bits.
Comparisons between estimates should use :attr:`DependencyEstimate.strength`,
which is the absolute value for the signed correlation coefficients.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import digamma

from . import kernels
from .errors import UsageError

__all__ = [
    "Kind",
    "Measure",
    "SampleSeries",
    "PairedSamples",
    "DependencyEstimate",
    "pearson",
    "kendall_tau",
    "spearman_rho",
    "distance_correlation",
    "discrete_mi",
    "discrete_mi_by_group",
    "continuous_mi_knn",
    "mic",
    "estimate",
    "permutation_p_value",
]

KNN_MIN_SAMPLES = 10
KNN_DEFAULT_K = 3
MIC_DEFAULT_EXPONENT = 0.6
# smallest grid bound that still admits a 2x2 grid
MIC_MIN_BOUND = 5
_KNN_JITTER_SEED = 20160901
_KNN_JITTER_SCALE = 1e-10


class Kind(str, enum.Enum):
    CATEGORICAL = "discrete-categorical"
    DISCRETE = "discrete-numeric"
    CONTINUOUS = "continuous"

    @property
    def is_discrete(self) -> bool:
        return self is not Kind.CONTINUOUS


class Measure(str, enum.Enum):
    PEARSON = "pearson"
    KENDALL = "kendall"
    SPEARMAN = "spearman"
    DCOR = "dcor"
    DISCRETE_MI = "discrete_mi"
    KNN_MI = "knn_mi"
    MIC = "mic"

    @property
    def signed(self) -> bool:
        return self in (Measure.PEARSON, Measure.KENDALL, Measure.SPEARMAN)


ALL_MEASURES = tuple(Measure)


def infer_kind(values) -> Kind:
    arr = np.asarray(values)
    if arr.dtype.kind in "biu":
        return Kind.DISCRETE
    if arr.dtype.kind == "f":
        if arr.size and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)):
            return Kind.DISCRETE
        return Kind.CONTINUOUS
    return Kind.CATEGORICAL


@dataclass(frozen=True)
class SampleSeries:
    """Ordered scalar observations. Categorical data must already be numeric codes."""

    values: np.ndarray
    kind: Kind = Kind.CONTINUOUS

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "biuf":
            raise UsageError("sample values must be numeric; map categories to codes first")
        object.__setattr__(self, "values", np.ascontiguousarray(vals, dtype=np.float64))
        object.__setattr__(self, "kind", Kind(self.kind))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class PairedSamples:
    x: SampleSeries
    y: SampleSeries

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise UsageError(f"paired series differ in length: {len(self.x)} vs {len(self.y)}")

    def __len__(self):
        return len(self.x)

    @classmethod
    def of(cls, x, y, x_kind: Optional[Kind] = None, y_kind: Optional[Kind] = None) -> "PairedSamples":
        """Build from raw sequences, inferring the kind where not given."""
        x_kind = infer_kind(x) if x_kind is None else x_kind
        y_kind = infer_kind(y) if y_kind is None else y_kind
        return cls(SampleSeries(np.asarray(x), x_kind), SampleSeries(np.asarray(y), y_kind))

    def swapped(self) -> "PairedSamples":
        return PairedSamples(self.y, self.x)

    def with_y(self, values) -> "PairedSamples":
        return PairedSamples(self.x, SampleSeries(values, self.y.kind))


@dataclass(frozen=True)
class DependencyEstimate:
    measure: Measure
    value: float
    sample_count: int
    defined: bool = True
    # dCov for distance correlation, unclamped estimate for kNN mutual information
    raw: Optional[float] = None

    @property
    def strength(self) -> float:
        """Magnitude used when comparing or ranking; 0 when undefined."""
        if not self.defined:
            return 0.0
        return abs(self.value)


def _undefined(measure, n, raw=None):
    return DependencyEstimate(measure, float("nan"), n, defined=False, raw=raw)


def _arrays(p: PairedSamples):
    if len(p) == 0:
        raise UsageError("estimators need at least one paired sample")
    return p.x.values, p.y.values


def _is_constant(v) -> bool:
    return v.shape[0] == 0 or v.min() == v.max()


def _pearson_arrays(x, y):
    dx = x - x.mean()
    dy = y - y.mean()
    sxy = float(np.sum(dx * dy))
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    if sxx <= 0.0 or syy <= 0.0:
        # spread lost to underflow
        return None
    r = sxy / (math.sqrt(sxx) * math.sqrt(syy))
    return min(1.0, max(-1.0, r))


def pearson(p: PairedSamples) -> DependencyEstimate:
    x, y = _arrays(p)
    n = len(p)
    if n < 2 or _is_constant(x) or _is_constant(y):
        return _undefined(Measure.PEARSON, n)
    r = _pearson_arrays(x, y)
    if r is None:
        return _undefined(Measure.PEARSON, n)
    return DependencyEstimate(Measure.PEARSON, r, n)


def kendall_tau(p: PairedSamples) -> DependencyEstimate:
    """Kendall's tau with tied pairs counted as neither concordant nor discordant.

    The denominator stays ``n(n-1)/2`` regardless of ties.
    """
    x, y = _arrays(p)
    n = len(p)
    if n < 2:
        return _undefined(Measure.KENDALL, n)
    score = kernels.kendall_score(x, y)
    return DependencyEstimate(Measure.KENDALL, score / (n * (n - 1) / 2), n)


def average_ranks(v):
    """1-based ranks; tied values share the mean of their positions."""
    _, inverse, counts = np.unique(v, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    return (ends - (counts - 1) / 2.0)[inverse.ravel()]


def spearman_rho(p: PairedSamples) -> DependencyEstimate:
    x, y = _arrays(p)
    n = len(p)
    if n < 2:
        return _undefined(Measure.SPEARMAN, n)
    rx = average_ranks(x)
    ry = average_ranks(y)
    if _is_constant(rx) or _is_constant(ry):
        return _undefined(Measure.SPEARMAN, n)
    return DependencyEstimate(Measure.SPEARMAN, _pearson_arrays(rx, ry), n)


def distance_correlation(p: PairedSamples) -> DependencyEstimate:
    """Normalised distance correlation; ``raw`` holds the distance covariance.

    The distance covariance is the mean of the elementwise product of the two
    double-centred distance matrices.
    """
    x, y = _arrays(p)
    n = len(p)
    if n < 2 or _is_constant(x) or _is_constant(y):
        return _undefined(Measure.DCOR, n)
    sab, saa, sbb = kernels.dcov_sums(x, y)
    n2 = float(n) * n
    dcov = sab / n2
    dvar_x = saa / n2
    dvar_y = sbb / n2
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return _undefined(Measure.DCOR, n, raw=dcov)
    value = math.sqrt(max(dcov, 0.0) / math.sqrt(dvar_x * dvar_y))
    return DependencyEstimate(Measure.DCOR, min(value, 1.0), n, raw=dcov)


def discrete_mi_by_group(x, y, groups):
    """Plug-in mutual information of ``x`` and ``y`` within each group, in bits.

    Returns ``(ids, values, counts)`` for the distinct group ids in
    ascending order. Values are clamped at 0; the raw sums are exact up to
    the final division (``math.fsum``).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ids, gi = np.unique(np.asarray(groups), return_inverse=True)
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    ng, nbx, nby = ids.shape[0], int(xi.max()) + 1, int(yi.max()) + 1
    joint = np.bincount((gi * nbx + xi) * nby + yi, minlength=ng * nbx * nby).reshape(ng, nbx, nby)
    counts = joint.sum(axis=(1, 2))
    cx = joint.sum(axis=2).astype(np.float64)
    cy = joint.sum(axis=1).astype(np.float64)
    g, i, j = np.nonzero(joint)
    c = joint[g, i, j].astype(np.float64)
    terms = c * np.log2(c * counts[g] / (cx[g, i] * cy[g, j]))
    cuts = np.flatnonzero(np.diff(g)) + 1
    values = np.array([max(math.fsum(t.tolist()), 0.0) for t in np.split(terms, cuts)]) / counts
    return ids, values, counts


def discrete_mi(p: PairedSamples) -> DependencyEstimate:
    """Plug-in mutual information from frequency counts, in bits."""
    x, y = _arrays(p)
    if not (p.x.kind.is_discrete and p.y.kind.is_discrete):
        raise UsageError("discrete mutual information needs two discrete series")
    n = len(p)
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nbx = int(xi.max()) + 1
    nby = int(yi.max()) + 1
    joint = np.bincount(xi * nby + yi, minlength=nbx * nby).reshape(nbx, nby)
    cx = joint.sum(axis=1).astype(np.float64)
    cy = joint.sum(axis=0).astype(np.float64)
    rows, cols = np.nonzero(joint)
    c = joint[rows, cols].astype(np.float64)
    raw = math.fsum((c * np.log2(c * n / (cx[rows] * cy[cols]))).tolist()) / n
    return DependencyEstimate(Measure.DISCRETE_MI, max(raw, 0.0), n, raw=raw)


def _ksg_bits(x, y, k):
    n = x.shape[0]
    nx, ny = kernels.ksg_counts(x, y, k)
    avg = float(np.mean(digamma(nx + 1) + digamma(ny + 1)))
    return (float(digamma(k)) + float(digamma(n)) - avg) / math.log(2)


def _jitter(n):
    rng = np.random.default_rng(_KNN_JITTER_SEED)
    return rng.random(n) - 0.5, rng.random(n) - 0.5


def continuous_mi_knn(p: PairedSamples, k: int = KNN_DEFAULT_K) -> DependencyEstimate:
    """Kraskov-Stoegbauer-Grassberger estimator (first variant), in bits.

    Tied values are broken with deterministic noise far below the data
    resolution. The estimate is averaged over both assignments of the two
    noise streams so that it stays exactly symmetric in ``x`` and ``y``.
    ``value`` is clamped at zero; ``raw`` keeps the unclamped estimate.
    """
    x, y = _arrays(p)
    n = len(p)
    if n < KNN_MIN_SAMPLES:
        return _undefined(Measure.KNN_MI, n)
    if not 1 <= k < n:
        raise UsageError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    u, v = _jitter(n)
    sx = _KNN_JITTER_SCALE * max(1.0, float(np.max(np.abs(x))))
    sy = _KNN_JITTER_SCALE * max(1.0, float(np.max(np.abs(y))))
    first = _ksg_bits(x + sx * u, y + sy * v, k)
    second = _ksg_bits(x + sx * v, y + sy * u, k)
    raw = 0.5 * (first + second)
    return DependencyEstimate(Measure.KNN_MI, max(raw, 0.0), n, raw=raw)


def mic_bound(n: int, b_exponent: float = MIC_DEFAULT_EXPONENT) -> int:
    return max(math.ceil(n ** b_exponent), MIC_MIN_BOUND)


def _xlogx_table(n):
    c = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = c[1:] * np.log2(c[1:])
    return out


def equipartition_codes(v, nbins):
    """Bin code per sample for a near-equal-mass partition that keeps ties together."""
    _, inverse, counts = np.unique(v, return_inverse=True, return_counts=True)
    group_bin, used = kernels.equipartition(counts, nbins)
    return group_bin[inverse.ravel()], used


def _axis_cells(a, q, max_cells):
    """Ordered cells along ``a`` whose boundaries are the candidate cut points.

    Runs of tie groups that fall into a single ``q`` bin are merged (cutting
    inside such a run never helps); if more than ``max_cells`` remain they
    are merged again into ``max_cells`` near-equal-mass cells.
    """
    order = np.argsort(a, kind="stable")
    a_sorted = a[order]
    q_sorted = q[order]
    n = a.shape[0]
    is_start = np.concatenate(([True], a_sorted[1:] != a_sorted[:-1]))
    starts = np.flatnonzero(is_start)
    group_of = np.cumsum(is_start) - 1
    qmin = np.minimum.reduceat(q_sorted, starts)
    qmax = np.maximum.reduceat(q_sorted, starts)
    pure_q = np.where(qmin == qmax, qmin, -1)
    same = (pure_q[1:] >= 0) & (pure_q[1:] == pure_q[:-1])
    clump_of_group = np.cumsum(np.concatenate(([True], ~same))) - 1
    n_clumps = int(clump_of_group[-1]) + 1
    cell = clump_of_group[group_of]
    if n_clumps > max_cells:
        sizes = np.bincount(cell, minlength=n_clumps)
        merged, _ = kernels.equipartition(sizes, max_cells)
        cell = merged[cell]
    return cell, q_sorted, n


def _best_scores(a, q, ny, max_bins, clump_factor, xlogx):
    cell, q_sorted, _ = _axis_cells(a, q, clump_factor * max_bins)
    n_cells = int(cell[-1]) + 1
    counts = np.zeros((n_cells, ny), dtype=np.int64)
    np.add.at(counts, (cell, q_sorted), 1)
    prefix = np.vstack([np.zeros((1, ny), dtype=np.int64), np.cumsum(counts, axis=0)])
    return kernels.mic_dp(prefix, xlogx, max_bins)


def mic(p: PairedSamples, b_exponent: float = MIC_DEFAULT_EXPONENT, clump_factor: int = 15) -> DependencyEstimate:
    """Maximal information coefficient.

    For every grid with ``nx * ny < B`` one axis is cut into ``ny``
    near-equal-mass bins and the cuts of the other axis are chosen optimally
    by dynamic programming among candidate cut points; both axis roles are
    searched. Each grid's MI is normalised by ``log2`` of the smaller number
    of occupied bins.
    """
    x, y = _arrays(p)
    n = len(p)
    if n < 4:
        return _undefined(Measure.MIC, n)
    if _is_constant(x) or _is_constant(y):
        return DependencyEstimate(Measure.MIC, 0.0, n)
    bound = mic_bound(n, b_exponent)
    xlogx = _xlogx_table(n)
    best = 0.0
    for a, b in ((x, y), (y, x)):
        for ny in range(2, (bound - 1) // 2 + 1):
            nx_max = (bound - 1) // ny
            if nx_max < 2:
                break
            q, used = equipartition_codes(b, ny)
            if used < 2:
                continue
            hq = xlogx[n] - math.fsum(xlogx[np.bincount(q, minlength=used)])
            scores = _best_scores(a, q, used, nx_max, clump_factor, xlogx)
            for nbins in range(2, nx_max + 1):
                if not np.isfinite(scores[nbins]):
                    break
                mi = max((hq + scores[nbins]) / n, 0.0)
                value = mi / math.log2(min(nbins, used))
                if value > best:
                    best = float(value)
    return DependencyEstimate(Measure.MIC, min(best, 1.0), n)


_ESTIMATORS = {
    Measure.PEARSON: pearson,
    Measure.KENDALL: kendall_tau,
    Measure.SPEARMAN: spearman_rho,
    Measure.DCOR: distance_correlation,
    Measure.DISCRETE_MI: discrete_mi,
    Measure.KNN_MI: continuous_mi_knn,
    Measure.MIC: mic,
}


def applicable(measure: Measure, p: PairedSamples) -> bool:
    """Whether ``measure`` accepts the kinds of ``p``."""
    if Measure(measure) is Measure.DISCRETE_MI:
        return p.x.kind.is_discrete and p.y.kind.is_discrete
    return True


def estimate(measure, p: PairedSamples, **options) -> DependencyEstimate:
    """Dispatch to the estimator for ``measure``."""
    return _ESTIMATORS[Measure(measure)](p, **options)


def permutation_p_value(p: PairedSamples, measure, n_perm: int, rng_seed: int, **options) -> float:
    """Share of y-permutations at least as strong as the observed estimate.

    Uses ``(1 + exceed) / (1 + n_perm)`` so the result is never zero.
    """
    if n_perm < 1:
        raise UsageError("n_perm must be at least 1")
    observed = estimate(measure, p, **options)
    if not observed.defined:
        return 1.0
    rng = np.random.default_rng(rng_seed)
    y = p.y.values
    exceed = 0
    for _ in range(n_perm):
        perm = estimate(measure, p.with_y(y[rng.permutation(len(y))]), **options)
        if perm.strength >= observed.strength:
            exceed += 1
    return (1 + exceed) / (1 + n_perm)
