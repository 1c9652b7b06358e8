"""Equivariant nonconformity measures.

A nonconformity measure maps a bag ``(z_1, ..., z_n)`` to scores
``(alpha_1, ..., alpha_n)`` such that permuting the bag permutes the scores
the same way.  Scores live on the extended real line; the 1-NN measures use
``+inf``/``-inf`` sentinels when a minimum is taken over an empty set:

* own label unique in the bag: ratio and difference are ``+inf``;
* every label equal: ratio is ``0``, difference is ``-inf``;
* ratio with zero denominator: ``+inf``, or ``1`` when the numerator is zero too.
"""

from __future__ import annotations

from typing import Callable, Optional

import numba
import numpy as np

from .core import DomainError

DistanceFunction = Callable[[np.ndarray, np.ndarray], float]

_INF = np.inf


@numba.njit(cache=True)
def _euclidean(a, b):
    acc = 0.0
    for t in range(a.shape[0]):
        diff = a[t] - b[t]
        acc += diff * diff
    return np.sqrt(acc)


@numba.njit(cache=True)
def _pairwise_euclidean(X):
    n = X.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = _euclidean(X[i], X[j])
            D[i, j] = d
            D[j, i] = d
    return D


@numba.njit(cache=True)
def _ratio(same, diff):
    if same == _INF:
        return _INF
    if diff == _INF:
        return 0.0
    if diff == 0.0:
        return 1.0 if same == 0.0 else _INF
    return same / diff


@numba.njit(cache=True)
def _difference(same, diff):
    if same == _INF:
        return _INF
    if diff == _INF:
        return -_INF
    return same - diff


@numba.njit(cache=True)
def _class_minima(D, codes):
    n = D.shape[0]
    same = np.full(n, _INF)
    diff = np.full(n, _INF)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            d = D[i, j]
            if codes[j] == codes[i]:
                if d < same[i]:
                    same[i] = d
            elif d < diff[i]:
                diff[i] = d
    return same, diff


@numba.njit(cache=True)
def _class_minima_euclidean(X, codes):
    # same as _class_minima on the Euclidean matrix, without materialising it
    n = X.shape[0]
    same = np.full(n, _INF)
    diff = np.full(n, _INF)
    for i in range(n):
        for j in range(i + 1, n):
            d = _euclidean(X[i], X[j])
            if codes[j] == codes[i]:
                if d < same[i]:
                    same[i] = d
                if d < same[j]:
                    same[j] = d
            else:
                if d < diff[i]:
                    diff[i] = d
                if d < diff[j]:
                    diff[j] = d
    return same, diff


@numba.njit(cache=True)
def _combine(same, diff, use_ratio):
    n = same.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _ratio(same[i], diff[i]) if use_ratio else _difference(same[i], diff[i])
    return out


def encode_labels(y) -> np.ndarray:
    """Integer codes for arbitrary hashable labels (order of first appearance)."""
    codes = {}
    return np.fromiter((codes.setdefault(v, len(codes)) for v in y), dtype=np.int64, count=len(y))


def distance_matrix(X, d: Optional[DistanceFunction] = None) -> np.ndarray:
    """``D[i, j] = d(x_i, x_j)``; Euclidean when ``d`` is None.  Not symmetrised."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if d is None:
        return _pairwise_euclidean(np.ascontiguousarray(X))
    n = X.shape[0]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = d(X[i], X[j])
    return D


def _nn_scores(X, y, d, use_ratio):
    X = np.asarray(X, dtype=float)
    if y is None:
        raise DomainError("1-NN nonconformity measures need labelled observations")
    if len(X) != len(y):
        raise DomainError(f"{len(X)} feature rows but {len(y)} labels")
    if len(X) == 0:
        return np.empty(0)
    X = np.ascontiguousarray(X.reshape(len(X), -1))
    if d is None:
        same, diff = _class_minima_euclidean(X, encode_labels(y))
    else:
        same, diff = _class_minima(distance_matrix(X, d), encode_labels(y))
    return _combine(same, diff, use_ratio)


def knn_ratio_score(X, y, d: Optional[DistanceFunction] = None) -> np.ndarray:
    """Nearest same-label distance divided by nearest other-label distance."""
    return _nn_scores(X, y, d, True)


def knn_diff_score(X, y, d: Optional[DistanceFunction] = None) -> np.ndarray:
    """Nearest same-label distance minus nearest other-label distance."""
    return _nn_scores(X, y, d, False)


def median_ncm(z) -> np.ndarray:
    """1 where ``z_i`` is at least the median of the other values, else 0.

    Even-sized leave-one-out multisets use the mean of the two central values.
    Accepts a 1-D bag or a 2-D array holding one bag per row.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    n = Z.shape[1]
    if n < 2:
        raise DomainError("median nonconformity measure needs at least two observations")
    keep = ~np.eye(n, dtype=bool)
    others = np.broadcast_to(Z[:, None, :], (Z.shape[0], n, n))[:, keep].reshape(Z.shape[0], n, n - 1)
    medians = np.median(others, axis=2)
    out = (Z >= medians).astype(float)
    return out[0] if single else out


def identity_ncm(z) -> np.ndarray:
    """Scores equal to the (scalar) observations themselves."""
    return np.asarray(z, dtype=float).reshape(-1).copy()


def symmetrize_distance(d: DistanceFunction) -> DistanceFunction:
    """Arithmetic mean of ``d(x, y)`` and ``d(y, x)``."""

    def symmetric(x, y):
        return 0.5 * (d(x, y) + d(y, x))

    return symmetric


class NonconformityMeasure:
    """Base class for scorers: ``scorer(X, y)`` returns one score per row."""

    needs_labels = False
    name = "base"

    def __call__(self, X, y=None) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class KNNRatio(NonconformityMeasure):
    needs_labels = True
    name = "knn-ratio"
    ratio = True

    def __init__(self, distance: Optional[DistanceFunction] = None):
        self.distance = distance

    def __call__(self, X, y=None):
        return _nn_scores(X, y, self.distance, self.ratio)

    def __repr__(self):
        return f"{type(self).__name__}(distance={self.distance!r})"


class KNNDifference(KNNRatio):
    name = "knn-diff"
    ratio = False


class MedianNCM(NonconformityMeasure):
    name = "median"

    def __call__(self, X, y=None):
        return median_ncm(np.asarray(X, dtype=float).reshape(-1))


class IdentityNCM(NonconformityMeasure):
    name = "identity"

    def __call__(self, X, y=None):
        return identity_ncm(X)


SCORERS = {cls.name: cls for cls in (KNNRatio, KNNDifference, MedianNCM, IdentityNCM)}


def get_scorer(name_or_scorer) -> NonconformityMeasure:
    if isinstance(name_or_scorer, NonconformityMeasure):
        return name_or_scorer
    try:
        return SCORERS[name_or_scorer]()
    except KeyError:
        raise DomainError(
            f"unknown nonconformity measure {name_or_scorer!r}; choose from {sorted(SCORERS)}"
        ) from None
