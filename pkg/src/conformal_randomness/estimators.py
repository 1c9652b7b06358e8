"""scikit-learn style front end.

The online estimators are stateful in the stream: ``fit`` starts a new
stream and consumes ``X`` in row order, ``partial_fit`` (and ``transform`` /
``predict``) continue it.  Row order is arrival order, so shuffle only if
that is the experiment.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_stream, check_threshold
from .batch import bartels_rvn
from .betting import MartingaleState, parse_strategy
from .changedetect import DetectorState
from .core import jeffreys_category_log10
from .nonconformity import get_scorer
from .pvalues import ConformalTransducer


class ConformalPValues(TransformerMixin, BaseEstimator):
    """Online conformal p-values for a stream of observations.

    Parameters
    ----------
    ncm : str or NonconformityMeasure
        ``"knn-ratio"``, ``"knn-diff"``, ``"identity"`` or ``"median"``.
    random_state : int or None
        Seed for the tie-breaking numbers.
    incremental : bool
        Use the O(n) per-step update where available.
    """

    def __init__(self, ncm="knn-ratio", random_state=None, incremental=True):
        self.ncm = ncm
        self.random_state = random_state
        self.incremental = incremental

    def _reset(self):
        self.transducer_ = ConformalTransducer(
            get_scorer(self.ncm), random_state=self.random_state, incremental=self.incremental
        )
        self.p_values_ = np.empty(0)
        self.n_features_in_ = None

    def fit(self, X, y=None):
        self._reset()
        return self.partial_fit(X, y)

    def _consume(self, X, y):
        X, y = check_stream(X, y, get_scorer(self.ncm).needs_labels)
        if self.n_features_in_ is None:
            self.n_features_in_ = X.shape[1]
        labels = y if y is not None else [None] * len(X)
        new = np.array([self.transducer_.step(x, lab) for x, lab in zip(X, labels)])
        self.p_values_ = np.concatenate([self.p_values_, new])
        return new

    def partial_fit(self, X, y=None):
        if not hasattr(self, "transducer_"):
            self._reset()
        self._consume(X, y)
        return self

    def transform(self, X, y=None):
        """Continue the stream with ``X`` and return the new p-values."""
        check_is_fitted(self, "transducer_")
        return self._consume(X, y)

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).p_values_.copy()


class ConformalTestMartingale(ConformalPValues):
    """Conformal test martingale: p-values fed to a betting strategy.

    ``strategy`` is ``"power:K"``, ``"mixture:M"``, ``"histogram:B,C"`` or a
    :class:`~conformal_randomness.betting.BettingStrategy`.  After fitting,
    ``log10_capital_`` holds ``log10 S_0 .. log10 S_n``.
    """

    def __init__(self, ncm="knn-ratio", strategy="histogram:10,10", random_state=None, incremental=True):
        super().__init__(ncm=ncm, random_state=random_state, incremental=incremental)
        self.strategy = strategy

    def _reset(self):
        super()._reset()
        self.strategy_ = parse_strategy(self.strategy)
        self.strategy_.reset()
        self.state_ = MartingaleState()
        self.multipliers_ = np.empty(0)
        self.log_capital_ = np.zeros(1)

    def _consume(self, X, y):
        X, y = check_stream(X, y, get_scorer(self.ncm).needs_labels)
        if self.n_features_in_ is None:
            self.n_features_in_ = X.shape[1]
        labels = y if y is not None else [None] * len(X)
        ps, mults, logs = [], [], []
        for x, lab in zip(X, labels):
            f = self.strategy_.betting_function()
            p = self.transducer_.step(x, lab)
            m = float(f(p))
            self.strategy_.update(p)
            self.state_ = self.state_.advance(m)
            ps.append(p)
            mults.append(m)
            logs.append(self.state_.log_capital)
        self.p_values_ = np.concatenate([self.p_values_, ps])
        self.multipliers_ = np.concatenate([self.multipliers_, mults])
        self.log_capital_ = np.concatenate([self.log_capital_, logs])
        return np.array(logs) / np.log(10.0)

    @property
    def log10_capital_(self):
        return self.log_capital_ / np.log(10.0)

    @property
    def capital_(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_capital_)

    @property
    def evidence_(self):
        """Jeffreys category of the current capital."""
        check_is_fitted(self, "state_")
        return jeffreys_category_log10(self.state_.log10_capital)

    def transform(self, X, y=None):
        """Continue the stream with ``X`` and return log10 capital after each new step."""
        check_is_fitted(self, "transducer_")
        return self._consume(X, y)

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).log10_capital_[1:].copy()

    def score(self, X=None, y=None):
        """Final log10 capital (of the stream so far, extended by ``X`` if given)."""
        if X is not None:
            self.partial_fit(X, y)
        check_is_fitted(self, "state_")
        return self.state_.log10_capital


class ConformalChangeDetector(ConformalTestMartingale):
    """CUSUM or Shiryaev-Roberts alarms on top of a conformal test martingale.

    The betting strategy must keep the capital positive (histogram with
    ``C > 0``, power or mixture).
    """

    def __init__(
        self,
        ncm="knn-ratio",
        strategy="histogram:10,10",
        procedure="sr",
        threshold=100.0,
        random_state=None,
        incremental=True,
    ):
        super().__init__(ncm=ncm, strategy=strategy, random_state=random_state, incremental=incremental)
        self.procedure = procedure
        self.threshold = threshold

    def _reset(self):
        super()._reset()
        self.detector_ = DetectorState(self.procedure, check_threshold(self.threshold))
        self.statistic_ = np.empty(0)
        self.alarm_flags_ = np.zeros(0, dtype=bool)

    def _consume(self, X, y):
        start = len(self.multipliers_)
        out = super()._consume(X, y)
        new = self.multipliers_[start:]
        stats = np.empty(len(new))
        flags = np.zeros(len(new), dtype=bool)
        for i, r in enumerate(new):
            flags[i] = self.detector_.update(float(r))
            stats[i] = self.detector_.value
        self.statistic_ = np.concatenate([self.statistic_, stats])
        self.alarm_flags_ = np.concatenate([self.alarm_flags_, flags])
        return out

    @property
    def alarms_(self):
        return list(self.detector_.alarms)

    @property
    def alarm_frequency_(self):
        return self.detector_.alarm_frequency() if self.detector_.step else 0.0

    def predict(self, X, y=None):
        """Continue the stream with ``X``; return one alarm flag per new observation."""
        check_is_fitted(self, "transducer_")
        start = len(self.alarm_flags_)
        self._consume(X, y)
        return self.alarm_flags_[start:].copy()

    def fit_predict(self, X, y=None):
        return self.fit(X, y).alarm_flags_.copy()


class BartelsRandomnessTest(BaseEstimator):
    """Bartels's rank test applied to the nonconformity scores of a batch."""

    def __init__(self, ncm="knn-ratio", sidedness="two_sided"):
        self.ncm = ncm
        self.sidedness = sidedness

    def fit(self, X, y=None):
        scorer = get_scorer(self.ncm)
        X, y = check_stream(X, y, scorer.needs_labels)
        self.scores_ = scorer(X, y)
        self.result_ = bartels_rvn(self.scores_, self.sidedness)
        self.p_value_ = self.result_.p_value
        self.statistic_ = self.result_.statistic
        return self
