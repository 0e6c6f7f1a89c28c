import numpy as np
import pytest

from filterlogit.data import Dataset
from filterlogit.selection import (
    CvConfig,
    FoldError,
    Metric,
    cv_k,
    cv_lambda,
    default_grid,
    fit_cv,
    stratified_folds,
)
from filterlogit.solver import Method, SolverConfig, fit_dataset, lambda_max, prepare
from filterlogit.splits import BaggingConfig, ThresholdSet, estimate_thresholds


def data(rng, n=200, p=6, signal=2.0):
    X = rng.normal(size=(n, p))
    eta = signal * (X[:, 0] > 0) + signal * (X[:, 1] > 0.5)
    eta = eta - eta.mean()
    y = np.where(rng.random(n) < 1 / (1 + np.exp(-eta)), 1, -1)
    return Dataset(X, y)


def cuts(p):
    return ThresholdSet(tuple(f"x{j + 1}" for j in range(p)), [np.array([-0.5, 0.0, 0.5])] * p)


def test_folds_stratified(rng):
    y = np.r_[np.ones(23), -np.ones(77)]
    f = stratified_folds(y, 5, 3)
    for k in range(5):
        pos = np.sum(y[f == k] > 0)
        assert pos in (4, 5)
    assert np.array_equal(f, stratified_folds(y, 5, 3))


def test_folds_fail_when_class_too_small():
    y = np.r_[np.ones(3), -np.ones(50)]
    with pytest.raises(FoldError):
        stratified_folds(y, 5, 0)


def test_default_grid():
    g = default_grid(2.0, 50, 1e-3)
    assert g.size == 50 and g[0] == 2.0 and g[-1] == pytest.approx(2e-3)
    assert np.all(np.diff(g) < 0)


def test_single_point_grid(rng):
    d = data(rng)
    lam, curve = cv_lambda(d, cuts(6), CvConfig(lambda_grid=(0.05,)))
    assert lam == 0.05
    assert curve.mean.size == 1


def test_cv_deterministic(rng):
    d = data(rng)
    cfg = CvConfig(n_lambda=12, rng_seed=4)
    a = cv_lambda(d, cuts(6), cfg)
    b = cv_lambda(d, cuts(6), cfg)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].fold_values, b[1].fold_values)


def test_pure_noise_picks_large_lambda(rng):
    n = 300
    X = rng.normal(size=(n, 5))
    y = np.where(rng.random(n) < 0.5, 1, -1)
    d = Dataset(X, y)
    ts = cuts(5)
    lam, curve = cv_lambda(d, ts, CvConfig(n_lambda=20, two_se_rule=True))
    assert lam >= curve.lambdas[5]


def test_two_se_never_smaller_lambda(rng):
    d = data(rng)
    cfg = CvConfig(n_lambda=15)
    l1, _ = cv_lambda(d, cuts(6), cfg)
    l2, _ = cv_lambda(d, cuts(6), CvConfig(n_lambda=15, two_se_rule=True))
    assert l2 >= l1


def test_auc_metric_runs(rng):
    d = data(rng)
    lam, curve = cv_lambda(d, cuts(6), CvConfig(n_lambda=10, metric=Metric.AUC))
    # metric is negated AUC; the signal is strong enough for AUC above 0.6
    assert np.nanmin(curve.mean) < -0.6
    assert lam in curve.lambdas


def test_fit_cv_warm_start_matches_cold(rng):
    d = data(rng)
    ts = cuts(6)
    solver = SolverConfig(method=Method.PROX_NEWTON, tol=1e-10)
    model, curve = fit_cv(d, ts, CvConfig(n_lambda=12), solver)
    cold = fit_dataset(d, ts, SolverConfig(lam=model.lam, tol=1e-10))
    np.testing.assert_allclose(model.theta, cold.theta, atol=1e-6)
    assert model.lam in curve.lambdas


def test_grid_starts_at_lambda_max(rng):
    d = data(rng)
    ts = cuts(6)
    _, zt = prepare(d, ts)
    _, curve = cv_lambda(d, ts, CvConfig(n_lambda=5))
    assert curve.lambdas[0] == pytest.approx(lambda_max(zt, d.labels))


def test_patience_marks_unreached(rng):
    d = data(rng)
    _, curve = cv_lambda(d, cuts(6), CvConfig(n_lambda=40, patience=2))
    assert np.isfinite(curve.mean[0])


def test_no_leakage_validation_fold(rng, monkeypatch):
    # each fold's path is fit on exactly the rows outside that fold
    import filterlogit.selection as sel

    seen = []
    orig = sel.fit_path

    def spy(train, thresholds, grid, solver, **kw):
        seen.append(train.features.copy())
        return orig(train, thresholds, grid, solver, **kw)

    monkeypatch.setattr(sel, "fit_path", spy)
    d = data(rng, n=100)
    folds = stratified_folds(d.labels, 5, 0)
    cv_lambda(d, cuts(6), CvConfig(n_lambda=4))
    for k, Xtr in enumerate(seen):
        np.testing.assert_array_equal(Xtr, d.features[folds != k])


def test_cv_k_single_candidate(rng):
    d = data(rng)
    assert cv_k(d, [3])[0] == 3
    with pytest.raises(ValueError):
        cv_k(d, [])


def test_cv_k_prefers_small_k_on_step_signal(rng):
    d = data(rng, n=300, p=3, signal=2.5)
    k, summary = cv_k(d, [1, 4], CvConfig(metric=Metric.AUC, n_lambda=10), BaggingConfig(20, 1))
    assert set(summary) == {1, 4}
    assert k == 1


def test_cv_on_estimated_thresholds(rng):
    d = data(rng)
    ts = estimate_thresholds(d, BaggingConfig(20, 0), k=1)
    model, _ = fit_cv(d, ts, CvConfig(n_lambda=10, two_se_rule=True))
    assert 0 in model.selected()
