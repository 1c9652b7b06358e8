import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conformal_randomness.betting import HistogramBetting, product_martingale
from conformal_randomness.changedetect import run_detector
from conformal_randomness.core import DomainError, EvidenceCategory
from conformal_randomness.estimators import (
    BartelsRandomnessTest,
    ConformalChangeDetector,
    ConformalPValues,
    ConformalTestMartingale,
)
from conformal_randomness.pvalues import conformal_pvalues


@pytest.fixture
def stream():
    rng = np.random.default_rng(0)
    return rng.normal(size=(120, 2)), rng.integers(0, 2, 120)


def test_params_and_clone():
    est = ConformalChangeDetector(ncm="knn-diff", strategy="power:0.5", procedure="cusum", threshold=20)
    params = est.get_params()
    assert params["threshold"] == 20 and params["procedure"] == "cusum"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(threshold=50)
    assert est.threshold == 50


def test_pvalues_match_functional_route(stream):
    X, y = stream
    est = ConformalPValues(random_state=4)
    assert np.array_equal(est.fit_transform(X, y), conformal_pvalues(X, y, "knn-ratio", 4))


def test_partial_fit_continues_the_stream(stream):
    X, y = stream
    whole = ConformalPValues(random_state=1).fit(X, y).p_values_
    est = ConformalPValues(random_state=1).fit(X[:50], y[:50])
    new = est.transform(X[50:], y[50:])
    assert np.array_equal(np.concatenate([est.p_values_[:50], new]), whole)
    assert est.n_features_in_ == 2


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ConformalPValues().transform([[0.0]], [1])


def test_input_validation():
    with pytest.raises(DomainError):
        ConformalPValues().fit([[0.0], [1.0]])  # knn needs labels
    with pytest.raises(ValueError):
        ConformalPValues(ncm="identity").fit([[0.0], [np.nan]])
    with pytest.raises(DomainError):
        ConformalPValues().fit([[0.0], [1.0]], [1])


def test_martingale_matches_functional_route(stream):
    X, y = stream
    est = ConformalTestMartingale(strategy="histogram:5,2", random_state=2).fit(X, y)
    ref = product_martingale(conformal_pvalues(X, y, "knn-ratio", 2), HistogramBetting(5, 2))
    assert np.allclose(est.log_capital_, ref.log_capital, rtol=0, atol=1e-12)
    assert est.score() == pytest.approx(ref.log10_capital[-1])
    assert isinstance(est.evidence_, EvidenceCategory)


def test_one_dimensional_input_is_a_scalar_stream():
    z = np.random.default_rng(3).random(50)
    est = ConformalTestMartingale(ncm="identity", strategy="power:0.5", random_state=0)
    out = est.fit_transform(z)
    assert out.shape == (50,) and est.n_features_in_ == 1


def test_change_detector(stream):
    X, y = stream
    det = ConformalChangeDetector(strategy="histogram:10,10", procedure="sr", threshold=3, random_state=5)
    flags = det.fit_predict(X, y)
    ref = run_detector("sr", 3, det.multipliers_)
    assert det.alarms_ == ref.alarms == [i + 1 for i in np.flatnonzero(flags)]
    assert det.alarm_frequency_ == pytest.approx(len(ref.alarms) / len(X))
    more = det.predict(X[:10], y[:10])
    assert more.shape == (10,) and det.statistic_.shape == (130,)
    with pytest.raises(DomainError):
        ConformalChangeDetector(threshold=1.0).fit(X, y)


def test_change_detector_fires_after_shift():
    rng = np.random.default_rng(9)
    z = np.concatenate([rng.normal(size=300), rng.normal(4, 1, size=300)])
    det = ConformalChangeDetector(ncm="identity", threshold=100, random_state=0).fit(z)
    assert any(a > 300 for a in det.alarms_)


def test_bartels_estimator():
    rng = np.random.default_rng(1)
    est = BartelsRandomnessTest(ncm="identity").fit(rng.random(100))
    assert 0 < est.p_value_ <= 1 and est.result_.n == 100
    trend = BartelsRandomnessTest(ncm="identity", sidedness="left_sided").fit(np.arange(100.0))
    assert trend.p_value_ < 1e-6
