"""The conformal transducer: observations plus tie-breaking noise in, p-values out."""

from __future__ import annotations

import bisect
from typing import Hashable, Optional

import numba
import numpy as np

from .core import DomainError, SeededRandomness, as_randomness
from .nonconformity import (
    IdentityNCM,
    KNNRatio,
    NonconformityMeasure,
    _difference,
    _euclidean,
    _ratio,
    encode_labels,
    get_scorer,
)


def conformal_pvalue(scores, theta: float) -> float:
    """Smoothed conformal p-value of the last score among all ``n`` scores.

    ``(#{i: a_i > a_n} + theta * #{i: a_i == a_n}) / n``; the last score always
    ties with itself, so the result is positive whenever ``theta`` is.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise DomainError("conformal p-value needs at least one score")
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta!r}")
    last = scores[-1]
    greater = np.count_nonzero(scores > last)
    equal = np.count_nonzero(scores == last)
    return (greater + theta * equal) / scores.size


@numba.njit(cache=True)
def _knn_step(X, codes, same, diff, alpha, n, use_ratio):
    # observation n joins the bag 0..n-1; returns (#greater, #equal) for its score
    xn = X[n]
    cn = codes[n]
    best_same = np.inf
    best_diff = np.inf
    for j in range(n):
        d = _euclidean(xn, X[j])
        if codes[j] == cn:
            if d < same[j]:
                same[j] = d
                alpha[j] = _ratio(d, diff[j]) if use_ratio else _difference(d, diff[j])
            if d < best_same:
                best_same = d
        else:
            if d < diff[j]:
                diff[j] = d
                alpha[j] = _ratio(same[j], d) if use_ratio else _difference(same[j], d)
            if d < best_diff:
                best_diff = d
    same[n] = best_same
    diff[n] = best_diff
    a_n = _ratio(best_same, best_diff) if use_ratio else _difference(best_same, best_diff)
    alpha[n] = a_n
    greater = 0
    equal = 1
    for j in range(n):
        if alpha[j] > a_n:
            greater += 1
        elif alpha[j] == a_n:
            equal += 1
    return greater, equal


@numba.njit(cache=True)
def _knn_stream(X, codes, thetas, use_ratio):
    n_obs = X.shape[0]
    same = np.empty(n_obs)
    diff = np.empty(n_obs)
    alpha = np.empty(n_obs)
    out = np.empty(n_obs)
    for n in range(n_obs):
        greater, equal = _knn_step(X, codes, same, diff, alpha, n, use_ratio)
        out[n] = (greater + thetas[n] * equal) / (n + 1)
    return out


@numba.njit(cache=True)
def _rank_stream(z, thetas):
    # identity scores: O(n) count against the prefix, no sorting needed
    n_obs = z.shape[0]
    out = np.empty(n_obs)
    for n in range(n_obs):
        greater = 0
        equal = 1
        zn = z[n]
        for j in range(n):
            if z[j] > zn:
                greater += 1
            elif z[j] == zn:
                equal += 1
        out[n] = (greater + thetas[n] * equal) / (n + 1)
    return out


def _fast_path(scorer: NonconformityMeasure) -> Optional[str]:
    if isinstance(scorer, KNNRatio) and scorer.distance is None:
        return "knn"
    if isinstance(scorer, IdentityNCM):
        return "identity"
    return None


class ConformalTransducer:
    """Online conformal transducer over one stream.

    Each :meth:`step` appends the observation to the bag, rescores, draws one
    tie-breaking number and emits the p-value of the newest observation.
    With ``incremental=True`` the 1-NN measures under Euclidean distance keep
    per-observation nearest-neighbour distances, making a step O(n * dim); the
    identity measure keeps a sorted list.  Both give exactly the same p-values
    as full rescoring.
    """

    def __init__(self, scorer="knn-ratio", random_state=None, incremental: bool = True):
        self.scorer = get_scorer(scorer)
        self.randomness: SeededRandomness = as_randomness(random_state)
        self.incremental = incremental
        self._mode = _fast_path(self.scorer) if incremental else None
        self._X = None
        self._codes = np.empty(0, dtype=np.int64)
        self._labels: list = []
        self._label_codes: dict = {}
        self._same = np.empty(0)
        self._diff = np.empty(0)
        self._alpha = np.empty(0)
        self._sorted: list = []
        self.n = 0

    @property
    def history(self):
        """Features (n x dim) and labels (list, or None) seen so far."""
        X = np.empty((0, 0)) if self._X is None else self._X[: self.n]
        return X, (self._labels if self._labels else None)

    def _append(self, x: np.ndarray, label):
        if self._X is None:
            self._X = np.empty((16, x.size))
            self._codes = np.empty(16, dtype=np.int64)
            self._same = np.empty(16)
            self._diff = np.empty(16)
            self._alpha = np.empty(16)
        elif x.size != self._X.shape[1]:
            raise DomainError(
                f"observation has dimension {x.size}, stream has {self._X.shape[1]}"
            )
        labelled = bool(self._labels)
        if self.n > 0 and labelled == (label is None):
            raise DomainError("labels must be present for all observations or none")
        if self.n == self._X.shape[0]:
            grow = self._X.shape[0]
            self._X = np.vstack([self._X, np.empty_like(self._X[:grow])])
            self._codes = np.concatenate([self._codes, np.empty(grow, dtype=np.int64)])
            self._same = np.concatenate([self._same, np.empty(grow)])
            self._diff = np.concatenate([self._diff, np.empty(grow)])
            self._alpha = np.concatenate([self._alpha, np.empty(grow)])
        self._X[self.n] = x
        if label is not None:
            self._labels.append(label)
            self._codes[self.n] = self._label_codes.setdefault(label, len(self._label_codes))
        self.n += 1

    def step(self, features, label: Optional[Hashable] = None) -> float:
        x = np.atleast_1d(np.asarray(features, dtype=float)).reshape(-1)
        if self.scorer.needs_labels and label is None:
            raise DomainError(f"{self.scorer.name} needs a label for every observation")
        self._append(x, label)
        theta = self.randomness.uniform()
        n = self.n
        if n == 1 and self._mode is None:
            # a lone score ties with itself whatever the measure says
            return theta
        if self._mode == "knn":
            greater, equal = _knn_step(
                self._X, self._codes, self._same, self._diff, self._alpha, n - 1, self.scorer.ratio
            )
            return (greater + theta * equal) / n
        if self._mode == "identity":
            if x.size != 1:
                raise DomainError("identity nonconformity measure needs scalar observations")
            v = float(x[0])
            bisect.insort(self._sorted, v)
            hi = bisect.bisect_right(self._sorted, v)
            lo = bisect.bisect_left(self._sorted, v)
            return ((n - hi) + theta * (hi - lo)) / n
        X, y = self.history
        return conformal_pvalue(self.scorer(X, y), theta)


def conformal_pvalues(X, y=None, scorer="knn-ratio", random_state=None, incremental=True) -> np.ndarray:
    """P-values for a whole stream, in arrival order.

    Draws the tie-breaking numbers in the same order as repeated
    :meth:`ConformalTransducer.step` calls, so both routes agree exactly.
    """
    scorer = get_scorer(scorer)
    rng = as_randomness(random_state)
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(X), -1)
    mode = _fast_path(scorer) if incremental else None
    if mode == "knn":
        if y is None:
            raise DomainError(f"{scorer.name} needs a label for every observation")
        codes = encode_labels(y)
        thetas = rng.uniforms(len(X))
        return _knn_stream(np.ascontiguousarray(X), codes, thetas, scorer.ratio)
    if mode == "identity":
        if X.shape[1] != 1:
            raise DomainError("identity nonconformity measure needs scalar observations")
        thetas = rng.uniforms(len(X))
        return _rank_stream(np.ascontiguousarray(X[:, 0]), thetas)
    t = ConformalTransducer(scorer, random_state=rng, incremental=False)
    labels = [None] * len(X) if y is None else list(y)
    return np.array([t.step(x, lab) for x, lab in zip(X, labels)])
