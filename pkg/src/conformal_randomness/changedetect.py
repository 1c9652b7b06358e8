"""Conformal CUSUM and Shiryaev-Roberts alarm procedures.

Both detectors consume the martingale's one-step ratio ``S_n / S_{n-1}``,
so they work with log-space capital and never need the absolute value.
After an alarm at step ``n`` the statistic restarts, comparing later
capital with ``S_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .core import DomainError

PROCEDURES = ("cusum", "sr")


@dataclass
class DetectorState:
    procedure: str
    threshold: float
    statistic: float = 0.0
    step: int = 0
    last_alarm: int = 0
    alarms: List[int] = field(default_factory=list)
    value: float = 0.0  # statistic at the latest step, before any reset

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise DomainError(f"procedure must be one of {PROCEDURES}, got {self.procedure!r}")
        if not self.threshold > 1:
            raise DomainError(f"threshold must exceed 1, got {self.threshold!r}")

    def update(self, ratio: float) -> bool:
        """Consume ``S_n / S_{n-1}``; return True when an alarm is raised at this step."""
        if not ratio > 0 or math.isnan(ratio):
            raise DomainError(f"martingale must stay positive, got ratio {ratio!r}")
        self.step += 1
        if self.procedure == "cusum":
            self.statistic = max(self.statistic, 1.0) * ratio
        else:
            self.statistic = ratio * (self.statistic + 1.0)
        self.value = self.statistic
        if self.statistic >= self.threshold:
            self.alarms.append(self.step)
            self.last_alarm = self.step
            self.statistic = 0.0
            return True
        return False

    def alarm_frequency(self) -> float:
        return alarm_frequency(self.alarms, self.step)


def _ratio(S_prev, S_cur):
    if not (S_prev > 0 and S_cur > 0):
        raise DomainError(f"capital must be strictly positive, got {S_prev!r} -> {S_cur!r}")
    return S_cur / S_prev


def cusum_step(d: DetectorState, S_prev: float, S_cur: float):
    """Advance a CUSUM detector by one step; returns ``(d, alarm)``."""
    if d.procedure != "cusum":
        raise DomainError("cusum_step needs a cusum detector")
    return d, d.update(_ratio(S_prev, S_cur))


def sr_step(d: DetectorState, S_prev: float, S_cur: float):
    """Advance a Shiryaev-Roberts detector by one step; returns ``(d, alarm)``."""
    if d.procedure != "sr":
        raise DomainError("sr_step needs a Shiryaev-Roberts detector")
    return d, d.update(_ratio(S_prev, S_cur))


def alarm_frequency(alarms: Sequence[int], n: int) -> float:
    """Number of alarms raised at or before step ``n``, divided by ``n``."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    return sum(1 for t in alarms if t <= n) / n


def run_detector(procedure: str, threshold: float, ratios) -> DetectorState:
    d = DetectorState(procedure, threshold)
    for r in ratios:
        d.update(float(r))
    return d


def detector_statistics(procedure: str, threshold: float, ratios):
    """Statistic after each step (before any reset) and the alarm flags."""
    d = DetectorState(procedure, threshold)
    stats = np.empty(len(ratios))
    flags = np.zeros(len(ratios), dtype=bool)
    for n, r in enumerate(ratios):
        flags[n] = d.update(float(r))
        stats[n] = d.value
    return stats, flags


def literal_alarms(procedure: str, threshold: float, S: Sequence[float]) -> List[int]:
    """Alarm times straight from the max/sum definition, O(n^2).

    ``S`` is the capital trajectory ``S_0, S_1, ...``; kept as a reference
    implementation for checking the recursions.
    """
    S = np.asarray(S, dtype=float)
    if np.any(S <= 0):
        raise DomainError("capital must be strictly positive")
    alarms = []
    last = 0
    for n in range(1, len(S)):
        ratios = S[n] / S[last:n]
        stat = ratios.max() if procedure == "cusum" else ratios.sum()
        if stat >= threshold:
            alarms.append(n)
            last = n
    return alarms


def literal_statistic(procedure: str, S: Sequence[float], start: int, n: int) -> float:
    """``max`` or ``sum`` over ``i = start..n-1`` of ``S_n / S_i``."""
    S = np.asarray(S, dtype=float)
    ratios = S[n] / S[start:n]
    return float(ratios.max() if procedure == "cusum" else ratios.sum())
