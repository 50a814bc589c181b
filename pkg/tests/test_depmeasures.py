import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import checks
import oracles
from mutinf import depmeasures as dm
from mutinf.depmeasures import Kind, Measure, PairedSamples
from mutinf.errors import UsageError

# reference value of the tie-broken KSG loop oracle for the shuffled-sequence case
KSG_SHUFFLED_RAW = -0.10192756495458333


def ps(x, y, **kw):
    return PairedSamples.of(np.asarray(x), np.asarray(y), **kw)


def test_pearson_examples():
    assert dm.pearson(ps([1, 2, 3], [1, 2, 3])).value == pytest.approx(1.0, abs=1e-15)
    assert dm.pearson(ps([1, 2, 3], [3, 2, 1])).value == pytest.approx(-1.0, abs=1e-15)
    x, y = [0, 1, 0, 1, 1], [1, 1, 0, 1, 0]
    assert checks.close(dm.pearson(ps(x, y)).value, oracles.pearson(x, y))


def test_kendall_examples():
    assert dm.kendall_tau(ps([1, 2, 3], [10, 20, 30])).value == 1.0
    assert dm.kendall_tau(ps([1, 2, 3], [3, 2, 1])).value == -1.0
    x, y = [1, 1, 2, 3], [2, 1, 1, 3]
    assert dm.kendall_tau(ps(x, y)).value == oracles.kendall(x, y)


def test_spearman_examples():
    assert dm.spearman_rho(ps([1, 4, 9], [1, 2, 3])).value == pytest.approx(1.0, abs=1e-15)
    assert dm.spearman_rho(ps([1, 2, 3, 4], [8, 4, 2, 1])).value == pytest.approx(-1.0, abs=1e-15)
    x, y = [1, 2, 2, 5], [0, 3, 1, 4]
    assert checks.close(dm.spearman_rho(ps(x, y)).value, oracles.spearman(x, y))


def test_average_ranks_match_oracle():
    v = [3, 1, 3, 2, 2, 2, 9]
    assert dm.average_ranks(np.array(v, float)).tolist() == oracles.average_ranks(v)


def test_dcor_examples():
    e = dm.distance_correlation(ps([1, 2, 3, 4], [1, 2, 3, 4]))
    assert e.value == pytest.approx(1.0, abs=1e-15)
    assert not dm.distance_correlation(ps([1, 2, 3, 4], [7, 7, 7, 7])).defined
    x, y = [0, 1, 2, 3], [0, 1, 0, 1]
    e = dm.distance_correlation(ps(x, y))
    assert checks.close(e.value, oracles.dcor(x, y))
    assert e.raw > 0


def test_discrete_mi_examples():
    x = [0, 0, 1, 1] * 5
    y = [0, 1, 0, 1] * 5
    assert dm.discrete_mi(ps(x, y)).value == pytest.approx(0.0, abs=1e-15)
    assert dm.discrete_mi(ps([0] * 6 + [1] * 6, [0] * 6 + [1] * 6)).value == pytest.approx(1.0, abs=1e-15)
    x = [0] * 10 + [1] * 10 + [2] * 10
    y = [v % 2 for v in x]
    assert checks.close(dm.discrete_mi(ps(x, y)).value, oracles.discrete_mi(x, y))


def test_discrete_mi_rejects_continuous():
    with pytest.raises(UsageError):
        dm.discrete_mi(ps([0.5, 1.5], [0, 1]))


def test_empty_input_is_usage_error():
    for m in dm.ALL_MEASURES:
        with pytest.raises(UsageError):
            dm.estimate(m, ps(np.array([], dtype=np.int64), np.array([], dtype=np.int64)))


def test_knn_minimum_and_ordering():
    x = np.arange(8.0)
    assert not dm.continuous_mi_knn(ps(x, x)).defined
    x = np.linspace(0, 1, 200)
    shuffled = np.random.default_rng(1).permutation(x)
    same = dm.continuous_mi_knn(ps(x, x)).value
    indep = dm.continuous_mi_knn(ps(x, shuffled)).value
    assert same > 3 and same > indep


def test_knn_frozen_reference():
    rng = np.random.default_rng(7)
    x = rng.random(200)
    y = rng.permutation(x)
    e = dm.continuous_mi_knn(ps(x, y))
    assert checks.close(e.raw, KSG_SHUFFLED_RAW)
    assert e.value == 0.0


def test_knn_matches_loop_oracle():
    n, failures = checks.knn_sweep(20)
    assert not failures


def test_knn_rejects_bad_k():
    with pytest.raises(UsageError):
        dm.continuous_mi_knn(ps(np.arange(12.0), np.arange(12.0)), k=12)


def test_mic_examples():
    x = np.arange(100)
    assert dm.mic(ps(x, x)).value == pytest.approx(1.0, abs=1e-12)
    assert dm.mic(ps(x, np.full(100, 3))).value == 0.0
    assert not dm.mic(ps([1, 2, 3], [1, 2, 3])).defined


def test_mic_parabola_matches_exhaustive_search():
    xs = np.linspace(-1, 1, 50)
    value = dm.mic(ps(xs, xs ** 2)).value
    # exhaustive contiguous-partition oracle over every grid with nx * ny < 11
    assert value >= 0.9
    assert checks.close(value, 1.0)


def test_mic_matches_exhaustive_search_on_random_inputs():
    rng = np.random.default_rng(5)
    for _ in range(15):
        n = int(rng.integers(4, 30))
        x = rng.integers(0, 7, n).tolist()
        y = [(v * 3 + int(rng.integers(0, 3))) % 5 for v in x]
        assert checks.close(dm.mic(ps(x, y)).value, oracles.mic(x, y))


def test_oracle_sweep_up_to_five_samples():
    # the full length-8 sweep runs in the acceptance suite
    cases, failures = checks.oracle_sweep(max_len=5)
    assert cases > 10000
    assert not failures, failures[:5]


def _perm_loop(x, y, n_perm, seed):
    observed = abs(oracles.pearson(x, y))
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        order = rng.permutation(len(y))
        r = oracles.pearson(x, [y[i] for i in order])
        hits += abs(r) >= observed
    return (1 + hits) / (1 + n_perm)


def test_permutation_p_value_examples():
    x = np.arange(20.0)
    assert dm.permutation_p_value(ps(x, 2 * x + 1), Measure.PEARSON, 200, 0) <= 2 / 201
    assert dm.permutation_p_value(ps(x, np.ones(20)), Measure.PEARSON, 200, 0) == 1.0
    rng = np.random.default_rng(30)
    a, b = rng.normal(size=30), rng.normal(size=30)
    got = dm.permutation_p_value(ps(a, b), Measure.PEARSON, 200, 9)
    assert got == _perm_loop(a.tolist(), b.tolist(), 200, 9)
    with pytest.raises(UsageError):
        dm.permutation_p_value(ps(a, b), Measure.PEARSON, 0, 9)


def test_permutation_p_values_roughly_uniform_under_independence():
    ps_ = []
    for seed in range(60):
        rng = np.random.default_rng(1000 + seed)
        ps_.append(dm.permutation_p_value(ps(rng.normal(size=30), rng.normal(size=30)),
                                          Measure.PEARSON, 200, seed))
    ps_ = np.array(ps_)
    assert 0.3 < ps_.mean() < 0.7
    assert 0.03 < np.mean(ps_ <= 0.2) < 0.4


def test_grouped_mi_matches_per_group():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 4, 300)
    y = (x + rng.integers(0, 2, 300)) % 3
    g = rng.integers(0, 5, 300)
    ids, values, counts = dm.discrete_mi_by_group(x, y, g)
    for gid, v, c in zip(ids, values, counts):
        sel = g == gid
        assert c == sel.sum()
        assert checks.close(v, oracles.discrete_mi(x[sel].tolist(), y[sel].tolist()))


def test_estimates_are_deterministic():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=80), rng.normal(size=80)
    for m in dm.ALL_MEASURES:
        if dm.applicable(m, ps(x, y)):
            assert dm.estimate(m, ps(x, y)) == dm.estimate(m, ps(x, y))
    assert dm.permutation_p_value(ps(x, y), Measure.KENDALL, 50, 3) == \
        dm.permutation_p_value(ps(x, y), Measure.KENDALL, 50, 3)


def test_infer_kind():
    assert dm.infer_kind(np.array([1, 2])) is Kind.DISCRETE
    assert dm.infer_kind(np.array([1.0, 2.0])) is Kind.DISCRETE
    assert dm.infer_kind(np.array([1.5, 2.0])) is Kind.CONTINUOUS
    with pytest.raises(UsageError):
        dm.SampleSeries(np.array(["a", "b"]))


small_ints = st.lists(st.integers(0, 4), min_size=2, max_size=40)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_symmetry_and_range(data):
    x = data.draw(small_ints)
    y = data.draw(st.lists(st.integers(0, 4), min_size=len(x), max_size=len(x)))
    p = ps(x, y)
    for m in dm.ALL_MEASURES:
        if m is Measure.KNN_MI and len(x) < dm.KNN_MIN_SAMPLES:
            continue
        a, b = dm.estimate(m, p), dm.estimate(m, p.swapped())
        assert a.defined == b.defined
        if a.defined:
            assert checks.close(a.value, b.value)
            if m.signed:
                assert -1.0 <= a.value <= 1.0
            else:
                assert a.value >= 0.0
            if m in (Measure.DCOR, Measure.MIC):
                assert a.value <= 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False)),
                min_size=3, max_size=40))
def test_rank_measures_invariant_under_increasing_maps(pairs):
    x = np.array([a for a, _ in pairs])
    y = np.array([b for _, b in pairs])
    p = ps(x, y, x_kind=Kind.CONTINUOUS, y_kind=Kind.CONTINUOUS)
    fx, fy = np.arctan(x) * 5 + 1, y ** 3
    # the maps can merge values that differ by less than float spacing
    if len(np.unique(fx)) != len(np.unique(x)) or len(np.unique(fy)) != len(np.unique(y)):
        return
    q = ps(fx, fy, x_kind=Kind.CONTINUOUS, y_kind=Kind.CONTINUOUS)
    for m in (Measure.KENDALL, Measure.SPEARMAN):
        a, b = dm.estimate(m, p), dm.estimate(m, q)
        assert a.defined == b.defined
        if a.defined:
            assert checks.close(a.value, b.value)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=40),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine(xs, a, b):
    x = np.array(xs)
    y = np.sin(x) + 0.1 * x
    p = ps(x, y, x_kind=Kind.CONTINUOUS, y_kind=Kind.CONTINUOUS)
    r = dm.pearson(p)
    # skip inputs whose spread is lost to rounding
    if not r.defined or np.ptp(x) < 1e-6 * max(1.0, np.max(np.abs(x))):
        return
    pos = dm.pearson(ps(a * x + b, y, x_kind=Kind.CONTINUOUS, y_kind=Kind.CONTINUOUS))
    neg = dm.pearson(ps(-a * x + b, y, x_kind=Kind.CONTINUOUS, y_kind=Kind.CONTINUOUS))
    assert math.isclose(pos.value, r.value, abs_tol=1e-9)
    assert math.isclose(neg.value, -r.value, abs_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 3)), min_size=1, max_size=60),
       st.permutations(range(6)))
def test_discrete_mi_relabel_invariant_and_bounded(pairs, perm):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    v = dm.discrete_mi(ps(x, y)).value
    relabelled = dm.discrete_mi(ps([perm[a] * 3 + 7 for a in x], y)).value
    assert checks.close(v, relabelled)
    assert v <= min(oracles.discrete_mi(x, x), oracles.discrete_mi(y, y)) + 1e-12
