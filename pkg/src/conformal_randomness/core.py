"""Shared types, seeded randomness, evidence scale and p-value calibrators."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class DataError(ValueError):
    """Raised for unreadable or malformed input data."""


@dataclass(frozen=True)
class Observation:
    """One streamed observation: a feature vector and an optional label."""

    features: tuple
    label: Optional[Hashable] = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))

    @property
    def dim(self) -> int:
        return len(self.features)


def check_observations(observations: Sequence[Observation]) -> None:
    """Constant feature dimension; labels present for all or none."""
    if not observations:
        return
    dim = observations[0].dim
    labelled = observations[0].label is not None
    for i, z in enumerate(observations):
        if z.dim != dim:
            raise DomainError(f"observation {i} has dimension {z.dim}, expected {dim}")
        if (z.label is not None) != labelled:
            raise DomainError(f"observation {i}: labels must be present for all or none")


class EvidenceCategory(enum.IntEnum):
    SUPPORTS_NULL = 0
    BARE_MENTION = 1
    SUBSTANTIAL = 2
    STRONG = 3
    VERY_STRONG = 4
    DECISIVE = 5

    @property
    def label(self) -> str:
        return self.name.lower()


_JEFFREYS_THRESHOLDS = (1.0, math.sqrt(10.0), 10.0, 10.0 ** 1.5, 100.0)


def jeffreys_category(value: float) -> EvidenceCategory:
    """Map a Bayes factor against the null onto Jeffreys's qualitative scale.

    Intervals are left-open: a value sitting exactly on a threshold belongs
    to the lower category, so ``jeffreys_category(1.0)`` supports the null.
    """
    value = float(value)
    if not math.isfinite(value) and value != math.inf:
        raise DomainError(f"evidence value must be a number, got {value!r}")
    if value <= 0:
        raise DomainError(f"evidence value must be positive, got {value!r}")
    for i, threshold in enumerate(_JEFFREYS_THRESHOLDS):
        if value <= threshold:
            return EvidenceCategory(i)
    return EvidenceCategory.DECISIVE


def jeffreys_category_log10(log10_value: float) -> EvidenceCategory:
    """Same as :func:`jeffreys_category` for a value given on the log10 scale."""
    if math.isnan(log10_value) or log10_value == -math.inf:
        raise DomainError(f"evidence value must be positive, got 10**{log10_value!r}")
    for i, threshold in enumerate(_JEFFREYS_THRESHOLDS):
        if log10_value <= math.log10(threshold):
            return EvidenceCategory(i)
    return EvidenceCategory.DECISIVE


def calibrate(p: float, kappa: float) -> float:
    """Calibrator ``p -> p**(1 - kappa) / kappa`` turning a p-value into a Bayes factor."""
    if not 0 < p <= 1:
        raise DomainError(f"p must lie in (0, 1], got {p!r}")
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa!r}")
    return p ** (1.0 - kappa) / kappa


def vovk_sellke_bound(p: float) -> float:
    """Minimum over kappa in (0, 1) of ``calibrate(p, kappa)``, i.e. ``-e p ln p``."""
    if not 0 < p < 1 / math.e:
        raise DomainError(
            f"p must lie in (0, 1/e) for the minimum to be interior, got {p!r}; "
            "for p >= 1/e the infimum is approached at the boundary kappa -> 1"
        )
    return -math.e * p * math.log(p)


class SeededRandomness:
    """A single-owner stream of uniform [0, 1) draws with a position counter.

    Backed by numpy's PCG64; equal seeds give bit-identical sequences.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self.position = 0

    def uniform(self) -> float:
        self.position += 1
        return float(self._gen.random())

    def uniforms(self, size: int) -> np.ndarray:
        self.position += size
        return self._gen.random(size)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying generator, for auxiliary draws (permutations, synthetic data)."""
        return self._gen

    def __repr__(self):
        return f"SeededRandomness(seed={self.seed}, position={self.position})"


def as_randomness(random_state) -> SeededRandomness:
    """Accept None, an int seed or an existing :class:`SeededRandomness`."""
    if isinstance(random_state, SeededRandomness):
        return random_state
    if random_state is None:
        return SeededRandomness(int(np.random.SeedSequence().entropy) & 0xFFFFFFFFFFFFFFFF)
    return SeededRandomness(int(random_state))
