"""Betting functions, betting martingales and conformal martingales.

A betting strategy proposes a density ``f_n`` on [0, 1] before seeing the
n-th p-value and is paid ``f_n(p_n)`` times its capital.  Capital is kept as
a natural logarithm so that trajectories reaching 1e18 and beyond, or
decaying towards 0, stay exact; ``capital`` may overflow to ``inf`` while
``log10_capital`` remains finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .core import DomainError

_LOG10 = math.log(10.0)


class BettingFunction:
    """A density on [0, 1], callable on scalars or arrays."""

    def __init__(self, density: Callable, name: str = "custom"):
        self._density = density
        self.name = name

    def __call__(self, u):
        return self._density(u)

    def integral(self) -> float:
        from scipy.integrate import quad

        return quad(lambda u: float(self(u)), 0.0, 1.0, limit=200)[0]

    def __repr__(self):
        return f"BettingFunction({self.name})"


class PiecewiseConstant(BettingFunction):
    """Step density: ``values[i]`` on ``[edges[i], edges[i+1])``, last cell closed."""

    def __init__(self, edges, values, name: str = "piecewise"):
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.edges.size != self.values.size + 1:
            raise DomainError("need exactly one more edge than values")
        super().__init__(self._lookup, name)

    def _lookup(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, u, side="right") - 1, 0, self.values.size - 1)
        return self.values[idx] if u.ndim else float(self.values[idx])

    def integral(self) -> float:
        return float(np.dot(np.diff(self.edges), self.values))


UNIFORM = BettingFunction(lambda u: np.ones_like(np.asarray(u, dtype=float)) if np.ndim(u) else 1.0, "uniform")


def power_betting_function(kappa: float) -> BettingFunction:
    """``u -> kappa * u**(kappa - 1)``, a density for every kappa in (0, 1)."""
    if not 0 < kappa < 1:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa!r}")

    def density(u):
        with np.errstate(divide="ignore"):
            return kappa * np.power(u, kappa - 1.0)

    return BettingFunction(density, f"power({kappa:g})")


@dataclass
class MartingaleState:
    """Capital after ``step`` bets, stored as a natural log."""

    step: int = 0
    log_capital: float = 0.0

    @property
    def capital(self) -> float:
        return math.exp(self.log_capital) if self.log_capital < 709.7 else math.inf

    @property
    def log10_capital(self) -> float:
        return self.log_capital / _LOG10

    def advance(self, multiplier: float) -> "MartingaleState":
        if math.isnan(multiplier) or multiplier < 0:
            raise DomainError(f"betting function returned {multiplier!r}")
        if self.log_capital in (-math.inf, math.inf):
            # zero and infinite capital are absorbing
            return MartingaleState(self.step + 1, self.log_capital)
        with np.errstate(divide="ignore"):
            log_m = math.log(multiplier) if multiplier > 0 else -math.inf
        return MartingaleState(self.step + 1, self.log_capital + log_m)


class BettingStrategy:
    """Chooses ``f_n`` from the p-values seen so far.

    Subclasses implement :meth:`betting_function` and :meth:`update`; the
    predictable order is enforced by :meth:`bet`, which asks for ``f_n``
    before ``p_n`` is revealed to the strategy.
    """

    name = "strategy"

    def reset(self) -> None:
        pass

    def betting_function(self) -> BettingFunction:
        raise NotImplementedError

    def update(self, p: float) -> None:
        pass

    def multiplier(self, p: float) -> float:
        """``f_n(p_n)`` and then absorb ``p_n`` into the strategy's state."""
        value = float(self.betting_function()(p))
        self.update(p)
        return value

    def log_paths(self, P: np.ndarray) -> np.ndarray:
        """Log-capital paths for a batch of p-value rows (runs x steps).

        Returns an array of shape (runs, steps + 1) starting with zeros.
        The default loops over rows with fresh copies of the strategy.
        """
        P = np.atleast_2d(P)
        out = np.zeros((P.shape[0], P.shape[1] + 1))
        for r, row in enumerate(P):
            self.reset()
            state = MartingaleState()
            for n, p in enumerate(row, 1):
                state = state.advance(self.multiplier(p))
                out[r, n] = state.log_capital
        self.reset()
        return out


class FixedBetting(BettingStrategy):
    """Bets the same function at every step."""

    def __init__(self, f: BettingFunction = UNIFORM):
        self.f = f
        self.name = f.name

    def betting_function(self):
        return self.f

    def log_paths(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        with np.errstate(divide="ignore"):
            logs = np.log(self.f(P))
        out = np.zeros((P.shape[0], P.shape[1] + 1))
        out[:, 1:] = _absorbing_cumsum(logs)
        return out


def _absorbing_cumsum(logs: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        csum = np.cumsum(logs, axis=1)
    # -inf once reached must stay -inf (cumsum of -inf and +inf would give nan)
    dead = np.maximum.accumulate(np.isneginf(logs), axis=1)
    csum[dead] = -np.inf
    return csum


class PowerBetting(FixedBetting):
    def __init__(self, kappa: float):
        super().__init__(power_betting_function(kappa))
        self.kappa = kappa


class SimpleMixture(BettingStrategy):
    """Average of the power martingales over kappa, midpoint rule with ``m`` nodes.

    Its one-step betting function is the mixture of power densities weighted
    by the current capital of each component.
    """

    name = "mixture"

    def __init__(self, m: int = 100):
        if m < 2:
            raise DomainError(f"mixture needs at least 2 quadrature nodes, got {m}")
        self.m = m
        self.kappas = (np.arange(1, m + 1) - 0.5) / m
        self.reset()

    def reset(self):
        self._log_components = np.zeros(self.m)

    def betting_function(self):
        log_w = self._log_components - logsumexp(self._log_components)
        weights = np.exp(log_w)
        kappas = self.kappas

        def density(u):
            u = np.asarray(u, dtype=float)
            with np.errstate(divide="ignore"):
                vals = kappas * np.power(u[..., None], kappas - 1.0)
            return (vals * weights).sum(axis=-1)

        return BettingFunction(density, f"mixture({self.m})")

    def multiplier(self, p):
        with np.errstate(divide="ignore"):
            log_f = np.log(self.kappas) + (self.kappas - 1.0) * np.log(p)
        before = logsumexp(self._log_components)
        self._log_components = self._log_components + log_f
        if not math.isfinite(before):
            return 1.0  # capital already absorbed at 0 or inf
        return math.exp(logsumexp(self._log_components) - before)

    def update(self, p):
        with np.errstate(divide="ignore"):
            self._log_components = self._log_components + np.log(self.kappas) + (self.kappas - 1.0) * np.log(p)

    def log_paths(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        with np.errstate(divide="ignore"):
            logp = np.log(P)
        out = np.zeros((P.shape[0], P.shape[1] + 1))
        comp = np.zeros((P.shape[0], self.m))
        log_k = np.log(self.kappas)
        for n in range(P.shape[1]):
            comp += log_k + (self.kappas - 1.0) * logp[:, n : n + 1]
            out[:, n + 1] = logsumexp(comp, axis=1) - math.log(self.m)
        return out


class HistogramBetting(BettingStrategy):
    """Bets the regularised histogram of past p-values.

    ``B`` equal bins on [0, 1] (last bin closed on the right, interior
    boundaries belong to the bin on their right), each seeded with ``C``
    dummy p-values.  With ``n`` real p-values seen and ``n_i`` of them in bin
    ``i`` the density is ``(C + n_i) / (C + n / B)`` on bin ``i``.
    """

    name = "histogram"

    def __init__(self, B: int = 10, C: float = 10.0):
        if B < 1:
            raise DomainError(f"need at least one bin, got B={B}")
        if C < 0:
            raise DomainError(f"pseudo-count must be nonnegative, got C={C}")
        self.B = int(B)
        self.C = float(C)
        self.reset()

    def reset(self):
        self.counts = np.zeros(self.B, dtype=np.int64)
        self.n = 0

    def bin_of(self, p: float) -> int:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"p-value must lie in [0, 1], got {p!r}")
        return min(int(p * self.B), self.B - 1)

    def betting_function(self):
        if self.C == 0 and self.n == 0:
            raise DomainError("histogram with C=0 has no bet before the first p-value")
        values = (self.C + self.counts) / (self.C + self.n / self.B)
        return PiecewiseConstant(np.linspace(0.0, 1.0, self.B + 1), values, f"histogram({self.B},{self.C:g})")

    def multiplier(self, p):
        if self.C == 0 and self.n == 0:
            raise DomainError("histogram with C=0 has no bet before the first p-value")
        i = self.bin_of(p)
        value = (self.C + self.counts[i]) / (self.C + self.n / self.B)
        self.update(p)
        return float(value)

    def update(self, p):
        self.counts[self.bin_of(p)] += 1
        self.n += 1

    def log_paths(self, P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if np.any((P < 0) | (P > 1)):
            raise DomainError("p-values must lie in [0, 1]")
        runs, steps = P.shape
        bins = np.minimum((P * self.B).astype(np.int64), self.B - 1)
        counts = np.zeros((runs, self.B))
        rows = np.arange(runs)
        out = np.zeros((runs, steps + 1))
        with np.errstate(divide="ignore"):
            for n in range(steps):
                b = bins[:, n]
                out[:, n + 1] = out[:, n] + np.log((self.C + counts[rows, b]) / (self.C + n / self.B))
                counts[rows, b] += 1
        return out


StrategySpec = Union[BettingStrategy, str]


def parse_strategy(spec: StrategySpec) -> BettingStrategy:
    """Build a strategy from ``power:K``, ``mixture:M``, ``histogram:B,C`` or ``uniform``."""
    if isinstance(spec, BettingStrategy):
        return spec
    name, _, args = str(spec).partition(":")
    try:
        if name == "power":
            return PowerBetting(float(args))
        if name == "mixture":
            return SimpleMixture(int(args) if args else 100)
        if name == "histogram":
            if args:
                b, c = args.split(",")
                return HistogramBetting(int(b), float(c))
            return HistogramBetting()
        if name == "uniform":
            return FixedBetting(UNIFORM)
    except ValueError as exc:
        raise DomainError(f"cannot parse strategy {spec!r}: {exc}") from None
    raise DomainError(f"unknown strategy {spec!r}; use power:K, mixture:M, histogram:B,C or uniform")


@dataclass
class Trajectory:
    """Per-step record of a betting martingale: p-values, multipliers, log capital."""

    p: np.ndarray
    multipliers: np.ndarray
    log_capital: np.ndarray = field(repr=False)

    @property
    def capital(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_capital)

    @property
    def log10_capital(self) -> np.ndarray:
        return self.log_capital / _LOG10

    @property
    def final(self) -> MartingaleState:
        return MartingaleState(len(self.p), float(self.log_capital[-1]))

    def __len__(self):
        return len(self.p)


def product_martingale(
    ps: Iterable[float],
    fs: Union[BettingStrategy, Sequence[BettingFunction], Callable[[list], BettingFunction]],
) -> Trajectory:
    """Run ``S_n = f_1(p_1) ... f_n(p_n)`` with predictably chosen ``f_n``.

    ``fs`` is a strategy object, a fixed sequence of betting functions, or a
    callable that receives the list of past p-values and returns ``f_n``.
    """
    ps = [float(p) for p in ps]
    if isinstance(fs, BettingStrategy):
        choose = None
        strategy = fs
    elif callable(fs) and not isinstance(fs, BettingFunction):
        choose = fs
        strategy = None
    else:
        seq = list(fs)
        if len(seq) < len(ps):
            raise DomainError(f"{len(seq)} betting functions for {len(ps)} p-values")
        choose = lambda past: seq[len(past)]  # noqa: E731
        strategy = None
    state = MartingaleState()
    logs = [0.0]
    mults = []
    for n, p in enumerate(ps):
        if strategy is not None:
            m = strategy.multiplier(p)
        else:
            m = float(choose(ps[:n])(p))
        state = state.advance(m)
        mults.append(m)
        logs.append(state.log_capital)
    return Trajectory(np.array(ps), np.array(mults), np.array(logs))


def simple_mixture(ps: Iterable[float], m: int = 100) -> Trajectory:
    """Midpoint-rule average of power martingales over kappa in (0, 1)."""
    return product_martingale(ps, SimpleMixture(m))


def conformal_martingale_run(transducer, strategy: StrategySpec, stream) -> Trajectory:
    """Feed a stream of ``(features, label)`` pairs through transducer and strategy.

    At step n the strategy commits to ``f_n`` using ``p_1..p_{n-1}`` only;
    the transducer then produces ``p_n`` and the capital is multiplied by
    ``f_n(p_n)``.
    """
    strategy = parse_strategy(strategy)
    state = MartingaleState()
    ps, mults, logs = [], [], [0.0]
    for features, label in stream:
        f = strategy.betting_function()
        p = transducer.step(features, label)
        m = float(f(p))
        strategy.update(p)
        state = state.advance(m)
        ps.append(p)
        mults.append(m)
        logs.append(state.log_capital)
    return Trajectory(np.array(ps), np.array(mults), np.array(logs))


def log_growth(p_values: np.ndarray, f: BettingFunction) -> float:
    """Average per-step log capital increment of betting ``f`` on the given p-values."""
    with np.errstate(divide="ignore"):
        return float(np.mean(np.log(f(np.asarray(p_values, dtype=float)))))
