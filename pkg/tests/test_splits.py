import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filterlogit.data import Dataset
from filterlogit.splits import (
    BaggingConfig,
    SplitCriterion,
    ThresholdSet,
    aggregate_thresholds,
    bagged_thresholds,
    best_split,
    estimate_thresholds,
    impurity,
    kmeans_1d,
    marginal_thresholds,
)
from oracles import exhaustive_gini_split, exhaustive_split_float


@pytest.mark.parametrize("p,crit,val", [(0.5, "gini", 0.5), (0.0, "entropy", 0.0), (0.3, "gini", 0.42),
                                        (1.0, "entropy", 0.0), (0.5, "entropy", math.log(2))])
def test_impurity_values(p, crit, val):
    assert impurity(p, crit) == pytest.approx(val, abs=1e-15)


def test_impurity_range_checked():
    with pytest.raises(ValueError):
        impurity(1.2)


def test_best_split_example():
    s = best_split([1, 2, 3, 4], [-1, -1, 1, 1])
    assert s.cut == 2.5 and s.gain == pytest.approx(0.5)


def test_no_split_signals():
    assert best_split([1, 2, 3], [1, 1, 1]) is None
    assert best_split([2, 2, 2, 2], [1, -1, 1, -1]) is None
    assert best_split([1.0], [1]) is None


def test_region_restricts_candidates():
    x = [1, 2, 3, 4, 10, 11]
    y = [-1, -1, 1, 1, -1, 1]
    s = best_split(x, y, region=(0, 5))
    assert s.cut == 2.5


def test_tie_goes_to_smaller_cut():
    # symmetric pattern: cuts 1.5 and 3.5 have identical gain
    s = best_split([1, 2, 3, 4], [1, -1, -1, 1])
    assert s.cut == 1.5


def _random_instance(rng):
    n = int(rng.integers(2, 201))
    kind = rng.integers(3)
    if kind == 0:
        x = rng.integers(0, rng.integers(2, 12), n).astype(float)
    elif kind == 1:
        x = rng.normal(size=n).round(int(rng.integers(0, 3)))
    else:
        half = rng.integers(0, 2, n // 2)
        x = np.arange(n, dtype=float)
        y = np.r_[half, [rng.integers(0, 2)] * (n % 2), half[::-1]]
        return x, y
    return x, rng.integers(0, 2, n)


def test_gini_matches_exact_enumeration(rng, backend, monkeypatch):
    from filterlogit import kernels

    monkeypatch.setattr(kernels, "split_scan", backend.split_scan)
    for _ in range(300):
        x, y01 = _random_instance(rng)
        got = best_split(x, 2 * y01 - 1)
        want = exhaustive_gini_split(x, y01)
        if want is None:
            assert got is None
        else:
            assert got.cut == want[0]
            assert got.gain == pytest.approx(float(want[1]), abs=1e-12)


def test_entropy_matches_enumeration(rng):
    phi = lambda q: 0.0 if q in (0.0, 1.0) else -q * math.log(q) - (1 - q) * math.log(1 - q)
    for _ in range(100):
        x, y01 = _random_instance(rng)
        got = best_split(x, 2 * y01 - 1, criterion="entropy")
        cands = exhaustive_split_float(x, y01, phi)
        if not cands or max(g for _, g in cands) <= 1e-12:
            assert got is None
            continue
        assert got.gain == pytest.approx(max(g for _, g in cands), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-100, 100), st.booleans()), min_size=2, max_size=60))
def test_gain_nonnegative_and_monotone_invariant(pairs):
    x = np.array([a for a, _ in pairs], dtype=float)
    y = np.array([1 if b else -1 for _, b in pairs])
    s = best_split(x, y)
    if s is None:
        return
    assert s.gain >= 0
    # strictly increasing (and exact in floating point): same partition chosen
    g = x ** 3 + 7 * x
    t = best_split(g, y)
    assert t is not None
    assert np.array_equal(x < s.cut, g < t.cut)
    assert t.gain == pytest.approx(s.gain, abs=1e-12)


def test_marginal_k1_equals_best_split(rng):
    for _ in range(50):
        x, y01 = _random_instance(rng)
        s = best_split(x, 2 * y01 - 1)
        m = marginal_thresholds(x, 2 * y01 - 1, 1)
        assert (s is None and m.size == 0) or (m.tolist() == [s.cut])


def test_marginal_recovers_three_jumps(rng):
    n = 2000
    x = rng.uniform(-3, 3, n)
    truth = np.array([-1.5, 0.0, 1.5])
    prob = np.array([0.1, 0.8, 0.2, 0.9])[np.searchsorted(truth, x, side="right")]
    y = np.where(rng.random(n) < prob, 1, -1)
    cuts = marginal_thresholds(x, y, 3)
    assert cuts.size == 3
    assert np.all(np.abs(cuts - truth) < 0.1)


def test_marginal_stops_without_gain():
    assert marginal_thresholds([1, 2, 3, 4], [1, 1, 1, 1], 3).size == 0
    assert marginal_thresholds([1, 2, 3, 4], [-1, -1, 1, 1], 3).tolist() == [2.5]


def test_pure_noise_cuts_near_extremes(rng):
    # end-cut preference: with delta = 5% of the range, most noise cuts land in the tails
    hits = 0
    for _ in range(200):
        x = rng.uniform(size=300)
        y = rng.choice([-1, 1], 300)
        c = marginal_thresholds(x, y, 1)
        lo, hi = x.min(), x.max()
        d = 0.05 * (hi - lo)
        hits += bool(c.size) and (c[0] <= lo + d or c[0] >= hi - d)
    # a cut placed uniformly over the sample would land there about 10% of the time
    assert hits / 200 > 0.2


def test_bagged_identity_resample_equals_marginal(rng):
    X = rng.normal(size=(80, 4))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=80) > 0.2, 1, -1)
    d = Dataset(X, y)
    pooled = bagged_thresholds(d, BaggingConfig(1, 0), k_splits=2, resample=lambda b, n: np.arange(n))
    for j in range(4):
        assert pooled[j].tolist() == marginal_thresholds(X[:, j], y, 2).tolist()


def test_bagging_deterministic(rng):
    X = rng.normal(size=(60, 3))
    y = np.where(X[:, 0] > 0, 1, -1)
    d = Dataset(X, y)
    a = estimate_thresholds(d, BaggingConfig(20, 99))
    b = estimate_thresholds(d, BaggingConfig(20, 99))
    c = estimate_thresholds(d, BaggingConfig(20, 100))
    assert a == b and a != c


def test_bagging_backends_agree(rng):
    from filterlogit import _pykernels, kernels

    X = rng.normal(size=(120, 6)).round(1)
    y = np.where(X[:, 1] > 0.3, 1, -1)
    y[rng.random(120) < 0.2] *= -1
    pre_x = np.ascontiguousarray(np.sort(X, axis=0).T)
    order = np.argsort(X, axis=0, kind="stable")
    ys = np.ascontiguousarray(((y + 1) // 2).astype(float)[order].T)
    w = np.ascontiguousarray(rng.integers(0, 3, (6, 120)).astype(float))
    for crit in (0, 1):
        a = _pykernels.column_cuts(pre_x, ys, w, 3, crit)
        b = kernels.get_backend("compiled").column_cuts(pre_x, ys, w, 3, crit) if kernels.BACKEND == "compiled" else a
        np.testing.assert_array_equal(a, b)


def test_aggregate_mean_and_kmeans():
    ts = aggregate_thresholds([np.array([2.0, 4.0, 6.0])], "mean")
    assert ts.cuts[0].tolist() == [4.0]
    ts = aggregate_thresholds([np.array([1.0, 1.0, 3.0, 3.0])], "kmeans", k=2)
    assert ts.cuts[0].tolist() == [1.0, 3.0]


def test_aggregate_fallback_recorded():
    ts = aggregate_thresholds([np.array([1.0, 1.0, 2.0]), np.zeros(0)], "kmeans", k=3, names=["a", "b"])
    assert ts.cuts[0].tolist() == [1.0, 2.0]
    assert ts.metadata["kmeans_fallback"] == {"a": 2}
    assert ts.metadata["no_cuts"] == ["b"]


def test_kmeans_backends_agree(rng):
    from filterlogit import _pykernels, kernels

    for _ in range(50):
        v = np.sort(rng.normal(size=int(rng.integers(5, 200))).round(2))
        k = int(min(rng.integers(1, 7), np.unique(v).size))
        u = rng.random((10, k))
        a = _pykernels.kmeans_1d(v, k, u, 100, 1e-10)
        b = kernels.kmeans_1d(v, k, u, 100, 1e-10)
        np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-12)


def test_kmeans_finds_separated_clusters(rng):
    v = np.r_[rng.normal(-5, 0.1, 50), rng.normal(0, 0.1, 50), rng.normal(5, 0.1, 50)]
    c = kmeans_1d(v, 3, seed=1)
    assert np.allclose(c, [-5, 0, 5], atol=0.1)


def test_family_one_kmeans_brackets_true_cuts(rng):
    from filterlogit.simulation import FAMILY_CUTS, Family, SimDesign, generate

    d = generate(SimDesign(Family.THRESHOLD_I, n=1000, p=3, p0=3), rng)
    ts = estimate_thresholds(d, BaggingConfig(30, 5), k=6)
    for j in range(3):
        assert ts.cuts[j].size == 6
        for t in FAMILY_CUTS:
            assert np.min(np.abs(ts.cuts[j] - t)) < 0.15


def test_threshold_set_validation_and_json():
    ts = ThresholdSet(("a", "b"), [np.array([0.5]), np.array([-1.0, 2.0])])
    assert ThresholdSet.from_json(ts.to_json()) == ts
    assert ts.block_sizes.tolist() == [1, 2]
    with pytest.raises(ValueError):
        ThresholdSet(("a",), [np.array([2.0, 1.0])])
    with pytest.raises(ValueError):
        ThresholdSet(("a",), [np.zeros(0)])
