import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from conformal_randomness.core import DomainError
from conformal_randomness.nonconformity import (
    KNNDifference,
    KNNRatio,
    distance_matrix,
    get_scorer,
    identity_ncm,
    knn_diff_score,
    knn_ratio_score,
    median_ncm,
    symmetrize_distance,
)

INF = math.inf


def brute_force(X, y, ratio=True):
    """Literal minima over the bag, written without the library kernels."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    out = []
    for i in range(len(X)):
        same = [np.linalg.norm(X[i] - X[j]) for j in range(len(X)) if j != i and y[j] == y[i]]
        diff = [np.linalg.norm(X[i] - X[j]) for j in range(len(X)) if y[j] != y[i]]
        s = min(same, default=INF)
        d = min(diff, default=INF)
        if s == INF:
            out.append(INF)
        elif d == INF:
            out.append(0.0 if ratio else -INF)
        elif ratio:
            out.append((1.0 if s == 0 else INF) if d == 0 else s / d)
        else:
            out.append(s - d)
    return np.array(out)


def test_three_point_example():
    X = [[0.0], [1.0], [5.0]]
    y = ["A", "A", "B"]
    assert knn_ratio_score(X, y).tolist() == [0.2, 0.25, INF]
    assert knn_diff_score(X, y).tolist() == [-4.0, -3.0, INF]


def test_duplicated_point_scores_zero():
    X = [[0.0], [0.0], [1.0]]
    y = [0, 0, 1]
    assert knn_ratio_score(X, y)[:2].tolist() == [0.0, 0.0]


def test_symmetric_pair_difference_zero():
    # 0 and 1 are each other's same-label neighbour, and -1 / 2 sit at the same distance
    X = [[0.0], [1.0], [-1.0], [2.0]]
    y = ["A", "A", "B", "B"]
    assert knn_diff_score(X, y)[:2].tolist() == [0.0, 0.0]


def test_sentinels():
    assert knn_ratio_score([[0.0], [1.0]], ["a", "a"]).tolist() == [0.0, 0.0]
    assert knn_diff_score([[0.0], [1.0]], ["a", "a"]).tolist() == [-INF, -INF]
    assert knn_ratio_score([[0.0], [1.0]], ["a", "b"]).tolist() == [INF, INF]
    # zero denominator: 0/0 -> 1, positive/0 -> inf
    X = [[0.0], [0.0], [0.0], [3.0]]
    assert knn_ratio_score(X, [0, 1, 0, 1]).tolist() == [1.0, INF, 1.0, 1.0]


def test_custom_distance_matches_euclidean_route():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 3, size=30)
    d = lambda a, b: float(np.linalg.norm(a - b))  # noqa: E731
    assert np.allclose(knn_ratio_score(X, y, d), knn_ratio_score(X, y), rtol=1e-12)
    assert np.allclose(distance_matrix(X), distance_matrix(X, d))


bags = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        hnp.arrays(np.float64, (n, 2), elements=st.integers(-3, 3).map(float)),
        hnp.arrays(np.int64, n, elements=st.integers(0, 2)),
        st.permutations(range(n)),
    )
)


@settings(max_examples=60, deadline=None)
@given(bags)
def test_knn_scores_match_brute_force_and_are_equivariant(bag):
    X, y, perm = bag
    perm = np.array(perm)
    for ratio, fn in ((True, knn_ratio_score), (False, knn_diff_score)):
        scores = fn(X, y)
        assert np.array_equal(scores, brute_force(X, y, ratio))
        assert np.array_equal(fn(X[perm], y[perm]), scores[perm])


@settings(max_examples=30, deadline=None)
@given(bags, st.floats(-100, 100))
def test_translation_invariance(bag, shift):
    X, y, _ = bag
    a = knn_ratio_score(X, y)
    b = knn_ratio_score(X + shift, y)
    finite = np.isfinite(a) & np.isfinite(b)
    assert np.allclose(a[finite], b[finite], rtol=1e-9, atol=1e-9)


def test_knn_needs_labels():
    with pytest.raises(DomainError):
        knn_ratio_score([[0.0]], None)
    with pytest.raises(DomainError):
        knn_ratio_score([[0.0], [1.0]], [0])


def test_median_examples():
    assert median_ncm([0.1, 0.9]).tolist() == [0.0, 1.0]
    assert median_ncm([0.3] * 5).tolist() == [1.0] * 5
    # leave-one-out multisets of size 3 and 2 (even: mean of central pair)
    assert median_ncm([1.0, 2.0, 3.0, 4.0]).tolist() == [0.0, 0.0, 1.0, 1.0]
    assert median_ncm([1.0, 2.0, 4.0]).tolist() == [0.0, 0.0, 1.0]


def test_median_batch_matches_rows():
    Z = np.random.default_rng(1).random((20, 6))
    assert np.array_equal(median_ncm(Z), np.array([median_ncm(row) for row in Z]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5).map(float), min_size=2, max_size=9), st.randoms())
def test_median_equivariant(z, rnd):
    perm = list(range(len(z)))
    rnd.shuffle(perm)
    z = np.array(z)
    assert np.array_equal(median_ncm(z[perm]), median_ncm(z)[perm])


def test_identity_examples():
    assert identity_ncm([0, 1, 1]).tolist() == [0.0, 1.0, 1.0]
    assert identity_ncm([]).tolist() == []
    assert identity_ncm([5]).tolist() == [5.0]


def test_symmetrize():
    d = lambda a, b: 1.0 if a < b else 3.0  # noqa: E731
    s = symmetrize_distance(d)
    assert s(0, 1) == 2.0 == s(1, 0)
    e = lambda a, b: abs(a - b)  # noqa: E731
    grid = np.linspace(-2, 2, 9)
    assert all(symmetrize_distance(e)(a, b) == e(a, b) for a in grid for b in grid)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_symmetrized_is_symmetric(a, b):
    s = symmetrize_distance(lambda u, v: (u - v) ** 2 + 0.5 * u)
    assert s(a, b) == s(b, a)


def test_get_scorer():
    assert isinstance(get_scorer("knn-ratio"), KNNRatio)
    assert isinstance(get_scorer("knn-diff"), KNNDifference)
    sc = KNNRatio()
    assert get_scorer(sc) is sc
    with pytest.raises(DomainError):
        get_scorer("tangent")
