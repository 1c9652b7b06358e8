"""Batch-mode tests: Bartels's rank von Neumann ratio and its composition with
nonconformity scores, plus the median-score demonstration of why the
composition is valid for exchangeability but not for randomness."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm, rankdata

from .core import DomainError, as_randomness
from .nonconformity import get_scorer, median_ncm
from .upperprob import balanced_probability

MIN_N = 10


class Sidedness(str, enum.Enum):
    TWO_SIDED = "two_sided"
    LEFT_SIDED = "left_sided"
    RIGHT_SIDED = "right_sided"


@dataclass(frozen=True)
class BatchTestResult:
    statistic: float
    standardized: float
    p_value: float
    sidedness: str
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def rvn_variance(n: int) -> float:
    """Exact null variance of the rank von Neumann ratio for ``n`` distinct ranks."""
    return 4 * (n - 2) * (5 * n * n - 2 * n - 9) / (5 * n * (n + 1) * (n - 1) ** 2)


def rvn_statistic(xs) -> float:
    """Sum of squared successive rank differences over the rank sum of squares."""
    ranks = rankdata(np.asarray(xs, dtype=float), method="average")
    denom = np.sum((ranks - ranks.mean()) ** 2)
    if denom == 0:
        raise DomainError("rank von Neumann ratio is undefined for constant input")
    return float(np.sum(np.diff(ranks) ** 2) / denom)


def bartels_rvn(xs, sidedness="two_sided") -> BatchTestResult:
    """Bartels's rank test of randomness with the normal approximation.

    Midranks for ties.  ``left_sided`` rejects for small ratios (trend or
    positive serial correlation), ``right_sided`` for large ones.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    if n < MIN_N:
        raise DomainError(
            f"normal approximation needs n >= {MIN_N}, got {n}; use an exact or permutation test"
        )
    if np.isnan(xs).any():
        raise DomainError("input contains NaN")
    try:
        side = Sidedness(sidedness)
    except ValueError:
        raise DomainError(f"unknown sidedness {sidedness!r}") from None
    rvn = rvn_statistic(xs)
    z = (rvn - 2.0) / math.sqrt(rvn_variance(n))
    if side is Sidedness.LEFT_SIDED:
        p = norm.cdf(z)
    elif side is Sidedness.RIGHT_SIDED:
        p = norm.sf(z)
    else:
        p = 2 * norm.sf(abs(z))
    p = float(min(1.0, p))
    # the normal tail can underflow for huge |z|; keep p in (0, 1]
    p = max(p, np.nextafter(0.0, 1.0))
    return BatchTestResult(rvn, float(z), p, side.value, n)


def compose_p_variable(f: Callable, A, X, y=None) -> float:
    """Apply batch test ``f`` to the nonconformity scores ``A(X, y)``."""
    scorer = get_scorer(A) if isinstance(A, str) else A
    scores = scorer(X, y)
    result = f(scores)
    return float(getattr(result, "p_value", result))


def counterexample_demo(N: int = 10, trials: int = 10_000, random_state=None) -> dict:
    """Fraction of uniform samples whose median scores are exactly balanced.

    The balanced set has probability at most ``C(N, N/2) 2^-N < N^-1/2``
    under any product measure on ``{0,1}^N``, yet the median scores of an
    IID uniform sample land in it almost surely.
    """
    if N < 2 or N % 2:
        raise DomainError(f"N must be even and at least 2, got {N}")
    gen = as_randomness(random_state).generator
    Z = gen.random((trials, N))
    scores = median_ncm(Z)
    balanced = np.mean(scores.sum(axis=1) == N // 2)
    return {
        "N": N,
        "trials": trials,
        "balanced_fraction": float(balanced),
        "product_probability": balanced_probability(N),
        "bound": N ** -0.5,
    }
