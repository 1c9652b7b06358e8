"""Exact small-horizon oracles for upper probabilities of binary events.

For ``Omega = {0,1}^N`` and an event ``E``:

* the upper IID probability is ``sup_p sum_k c_k p^k (1-p)^(N-k)``;
* the upper exchangeability probability is ``max_k c_k / C(N, k)``;
* the upper conformal probability is bracketed between the latter and the
  cost of a positive combination of reckless martingales, one per member.

Here ``c_k`` counts members of ``E`` with ``k`` ones.  Sequences are indexed
by the integer whose binary expansion (most significant bit first) is the
sequence, so ``"011"`` is index 3 in ``{0,1}^3``.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Iterable, List, Sequence

import mpmath
import numpy as np

from .core import DomainError, as_randomness

MAX_EXHAUSTIVE_N = 24
GRID_POINTS = 10_000
REFINE_TOL = 1e-10
SHARP_CONSTANT = math.sqrt(2 * math.pi) * math.exp(1 / 6) / 2


def _popcounts(N: int) -> np.ndarray:
    idx = np.arange(2 ** N, dtype=np.int64)
    counts = np.zeros(2 ** N, dtype=np.int64)
    for b in range(N):
        counts += (idx >> b) & 1
    return counts


class EventSet:
    """A subset of ``{0,1}^N`` stored as a boolean mask over ``2**N`` indices."""

    def __init__(self, N: int, mask: np.ndarray):
        if not 1 <= N <= MAX_EXHAUSTIVE_N:
            raise DomainError(f"N must lie in 1..{MAX_EXHAUSTIVE_N}, got {N}")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (2 ** N,):
            raise DomainError(f"mask must have length 2**N = {2 ** N}")
        self.N = N
        self.mask = mask
        self.level_counts = np.bincount(_popcounts(N)[mask], minlength=N + 1)

    @classmethod
    def from_members(cls, N: int, members: Iterable) -> "EventSet":
        mask = np.zeros(2 ** N, dtype=bool)
        for m in members:
            bits = m if isinstance(m, str) else "".join(str(int(b)) for b in m)
            if len(bits) != N or set(bits) - {"0", "1"}:
                raise DomainError(f"member {m!r} is not a binary sequence of length {N}")
            mask[int(bits, 2)] = True
        return cls(N, mask)

    @classmethod
    def full(cls, N: int) -> "EventSet":
        return cls(N, np.ones(2 ** N, dtype=bool))

    @classmethod
    def empty(cls, N: int) -> "EventSet":
        return cls(N, np.zeros(2 ** N, dtype=bool))

    @classmethod
    def level(cls, N: int, k: int) -> "EventSet":
        return cls(N, _popcounts(N) == k)

    @classmethod
    def random(cls, N: int, random_state=None, nonempty: bool = True) -> "EventSet":
        """Random event: members kept independently with a log-uniform rate."""
        gen = as_randomness(random_state).generator
        rate = 2.0 ** gen.uniform(-N, 0)
        mask = gen.random(2 ** N) < rate
        if nonempty and not mask.any():
            mask[gen.integers(2 ** N)] = True
        return cls(N, mask)

    @property
    def members(self) -> List[str]:
        return [format(int(i), f"0{self.N}b") for i in np.flatnonzero(self.mask)]

    def __len__(self):
        return int(self.mask.sum())

    def __contains__(self, omega) -> bool:
        bits = omega if isinstance(omega, str) else "".join(str(int(b)) for b in omega)
        return bool(self.mask[int(bits, 2)])

    def to_json(self) -> str:
        return json.dumps({"N": self.N, "members": self.members})

    @classmethod
    def from_json(cls, text: str) -> "EventSet":
        try:
            data = json.loads(text)
            N = int(data["N"])
            members = data["members"]
        except (ValueError, KeyError, TypeError) as exc:
            raise DomainError(f"bad event file: {exc}") from None
        return cls.from_members(N, members)

    def __repr__(self):
        return f"EventSet(N={self.N}, size={len(self)})"


def _binomials(N: int) -> np.ndarray:
    return np.array([math.comb(N, k) for k in range(N + 1)], dtype=float)


def _poly(counts: np.ndarray, N: int, p: np.ndarray) -> np.ndarray:
    """``sum_k counts[..., k] p^k (1-p)^(N-k)`` for rows of counts and matching p."""
    k = np.arange(N + 1)
    basis = np.power(p[..., None], k) * np.power(1.0 - p[..., None], N - k)
    return (counts * basis).sum(axis=-1)


def uiid_from_counts(counts, N: int, grid: int = GRID_POINTS, tol: float = REFINE_TOL) -> np.ndarray:
    """Upper IID probability for each row of level counts (shape ``(m, N+1)``).

    Dense grid on [0, 1] (endpoints included), then golden-section search on
    the two grid cells around the best grid point until the bracket is
    narrower than ``tol``.
    """
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    if counts.shape[1] != N + 1:
        raise DomainError(f"expected {N + 1} level counts per row, got {counts.shape[1]}")
    ps = np.linspace(0.0, 1.0, grid + 1)
    k = np.arange(N + 1)
    basis = np.power(ps[:, None], k) * np.power(1.0 - ps[:, None], N - k)
    chunk = 512
    return np.concatenate(
        [_refine(counts[i : i + chunk], N, ps, basis, tol) for i in range(0, len(counts), chunk)]
    )


def _refine(counts, N, ps, basis, tol):
    grid = len(ps) - 1
    values = counts @ basis.T
    best = values.argmax(axis=1)
    best_val = values[np.arange(len(counts)), best]
    lo = ps[np.maximum(best - 1, 0)]
    hi = ps[np.minimum(best + 1, grid)]
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo.copy(), hi.copy()
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _poly(counts, N, c)
    fd = _poly(counts, N, d)
    while np.max(b - a) > tol:
        left = fc > fd
        # keep [a, d] where f(c) wins, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - inv_phi * (b - a)
        new_d = a + inv_phi * (b - a)
        fd_next = np.where(left, fc, _poly(counts, N, new_d))
        fc_next = np.where(left, _poly(counts, N, new_c), fd)
        c, d, fc, fd = new_c, new_d, fc_next, fd_next
    refined = _poly(counts, N, 0.5 * (a + b))
    return np.maximum.reduce([best_val, refined, fc, fd])


def uiid_prob(E: EventSet) -> float:
    """``sup_p B_p^N(E)``."""
    return float(uiid_from_counts(E.level_counts, E.N)[0])


def uep_from_counts(counts, N: int) -> np.ndarray:
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    return (counts / _binomials(N)).max(axis=1)


def uep_prob(E: EventSet) -> float:
    """Largest uniform-on-a-level probability of ``E``; exact up to one division."""
    return float(uep_from_counts(E.level_counts, E.N)[0])


def uep_prob_exact(E: EventSet) -> Fraction:
    return max(Fraction(int(c), math.comb(E.N, k)) for k, c in enumerate(E.level_counts))


class RecklessMartingale:
    """Betting martingale that stakes everything on the stream being ``omega``.

    Built on identity-measure p-values: at step ``n`` with ``k_n`` ones among
    the first ``n`` target bits it bets ``n / k_n`` on ``[0, k_n/n]`` if the
    target bit is 1 and ``n / (n - k_n)`` on ``[k_n/n, 1]`` if it is 0.
    Its initial capital is ``1 / C(N, k)``.  All arithmetic is exact.
    """

    def __init__(self, omega: Sequence[int]):
        bits = omega if isinstance(omega, str) else "".join(str(int(b)) for b in omega)
        if not bits or set(bits) - {"0", "1"}:
            raise DomainError(f"omega must be a nonempty binary sequence, got {omega!r}")
        self.omega = tuple(int(b) for b in bits)
        self.N = len(self.omega)
        self.k = sum(self.omega)
        self.prefix_ones = np.cumsum(self.omega).tolist()

    @property
    def initial_capital(self) -> Fraction:
        return Fraction(1, math.comb(self.N, self.k))

    def pieces(self, n: int):
        """The step-``n`` bet as ``[(lo, hi, height), ...]`` with exact endpoints."""
        if not 1 <= n <= self.N:
            raise DomainError(f"step must lie in 1..{self.N}, got {n}")
        k_n = self.prefix_ones[n - 1]
        cut = Fraction(k_n, n)
        if self.omega[n - 1] == 1:
            return [(Fraction(0), cut, Fraction(n, k_n)), (cut, Fraction(1), Fraction(0))]
        return [(Fraction(0), cut, Fraction(0)), (cut, Fraction(1), Fraction(n, n - k_n))]

    def bet_integral(self, n: int) -> Fraction:
        return sum(((hi - lo) * h for lo, hi, h in self.pieces(n)), Fraction(0))

    def multiplier(self, n: int, p) -> Fraction:
        k_n = self.prefix_ones[n - 1]
        p = Fraction(p)
        if self.omega[n - 1] == 1 and p <= Fraction(k_n, n):
            return Fraction(n, k_n)
        if self.omega[n - 1] == 0 and p >= Fraction(k_n, n):
            return Fraction(n, n - k_n)
        return Fraction(0)

    def run(self, z: Sequence[int], thetas: Sequence[float]) -> List[Fraction]:
        """Capital ``S_0..S_N`` on observations ``z`` with tie-breakers ``thetas``."""
        if len(z) != self.N or len(thetas) < self.N:
            raise DomainError(f"need {self.N} observations and tie-breakers")
        capital = [self.initial_capital]
        for n in range(1, self.N + 1):
            p = exact_identity_pvalue(z[:n], thetas[n - 1])
            capital.append(capital[-1] * self.multiplier(n, p))
        return capital


def exact_identity_pvalue(prefix: Sequence[int], theta: float) -> Fraction:
    """Conformal p-value of the last element under the identity measure, in exact arithmetic."""
    last = prefix[-1]
    greater = sum(1 for v in prefix if v > last)
    equal = sum(1 for v in prefix if v == last)
    return (greater + Fraction(theta) * equal) / len(prefix)


def reckless_martingale(omega: Sequence[int]) -> RecklessMartingale:
    return RecklessMartingale(omega)


def ucp_bracket(E: EventSet):
    """``(lower, upper)`` bounds on the upper conformal probability of ``E``.

    The lower end is the upper exchangeability probability; the upper end is
    ``min(1, sum over members of 1 / C(N, k))``, the initial capital of the
    sum of reckless martingales for the members.
    """
    lower = uep_prob_exact(E)
    cost = sum((Fraction(int(c), math.comb(E.N, k)) for k, c in enumerate(E.level_counts)), Fraction(0))
    upper = min(Fraction(1), cost)
    return float(lower), float(upper)


def verify_prop1(N: int, trials: int = 10_000, random_state=None) -> dict:
    """Check ``UiidP <= UEP <= 1.5 sqrt(N) UiidP`` over many events.

    Covers every single-level event, every singleton, and ``trials`` random
    nonempty events.  Also checks the sharper constant
    ``sqrt(2 pi) e^(1/6) / 2`` and reports the largest ``UEP / (sqrt(N) UiidP)``.
    """
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    rng = as_randomness(random_state)
    rows = []
    for k in range(N + 1):
        level = np.zeros(N + 1)
        level[k] = math.comb(N, k)
        rows.append(level)
    if N > MAX_EXHAUSTIVE_N:
        raise DomainError(f"N must be at most {MAX_EXHAUSTIVE_N}")
    pop = _popcounts(N)
    singles = np.zeros((2 ** N, N + 1))
    singles[np.arange(2 ** N), pop] = 1
    gen = rng.generator
    randoms = np.zeros((trials, N + 1))
    for t in range(trials):
        rate = 2.0 ** gen.uniform(-N, 0)
        mask = gen.random(2 ** N) < rate
        if not mask.any():
            mask[gen.integers(2 ** N)] = True
        randoms[t] = np.bincount(pop[mask], minlength=N + 1)
    counts = np.vstack([np.array(rows), singles, randoms])
    uiid = uiid_from_counts(counts, N)
    uep = uep_from_counts(counts, N)
    root = math.sqrt(N)
    lower_ok = bool(np.all(uiid <= uep * (1 + 1e-12)))
    upper_ok = bool(np.all(uep <= 1.5 * root * uiid))
    sharp_ok = bool(np.all(uep <= SHARP_CONSTANT * root * uiid))
    ratio = uep / (root * uiid)
    return {
        "N": N,
        "events": int(len(counts)),
        "level_events": N + 1,
        "singletons": 2 ** N,
        "random_events": trials,
        "lower_holds": lower_ok,
        "upper_holds": upper_ok,
        "sharp_constant": SHARP_CONSTANT,
        "sharp_holds": sharp_ok,
        "max_ratio": float(ratio.max()),
    }


def verify_prop2(N: int, trials: int = 1_000, theta_runs: int = 100, random_state=None) -> dict:
    """Constructive check of ``UEP <= UCP <= N UEP`` through reckless martingales."""
    if not 1 <= N <= MAX_EXHAUSTIVE_N:
        raise DomainError(f"N must lie in 1..{MAX_EXHAUSTIVE_N}, got {N}")
    rng = as_randomness(random_state)
    gen = rng.generator
    initial_ok = axiom_ok = final_ok = True
    max_axiom_error = 0.0
    for idx in range(2 ** N):
        omega = [int(b) for b in format(idx, f"0{N}b")]
        m = RecklessMartingale(omega)
        initial_ok &= m.initial_capital == Fraction(1, math.comb(N, m.k))
        for n in range(1, N + 1):
            err = abs(float(m.bet_integral(n)) - 1.0)
            max_axiom_error = max(max_axiom_error, err)
            axiom_ok &= m.bet_integral(n) == 1
        for _ in range(theta_runs):
            thetas = _open_unit(gen, N)
            final_ok &= m.run(omega, thetas)[-1] == 1
    bracket_ok = factor_ok = True
    for _ in range(trials):
        E = EventSet.random(N, rng)
        lo, hi = ucp_bracket(E)
        bracket_ok &= lo <= hi
        if not E.mask[0]:
            factor_ok &= hi <= N * uep_prob(E) * (1 + 1e-12)
    return {
        "N": N,
        "sequences": 2 ** N,
        "initial_capital_holds": bool(initial_ok),
        "betting_axiom_holds": bool(axiom_ok),
        "max_axiom_error": max_axiom_error,
        "final_capital_one": bool(final_ok),
        "random_events": trials,
        "bracket_ordered": bool(bracket_ok),
        "upper_within_N_uep": bool(factor_ok),
    }


def _open_unit(gen: np.random.Generator, size: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    out = gen.random(size)
    while np.any(out == 0.0):
        out[out == 0.0] = gen.random(int(np.sum(out == 0.0)))
    return out


def stirling_remainder(n: int) -> mpmath.mpf:
    """``r_n`` in ``n! = sqrt(2 pi) n^(n + 1/2) e^(-n) e^(r_n)``, to 50 digits."""
    with mpmath.workdps(50):
        return mpmath.log(mpmath.mpf(math.factorial(n))) - (
            mpmath.log(2 * mpmath.pi) / 2 + (n + mpmath.mpf(1) / 2) * mpmath.log(n) - n
        )


def log_balanced_probability(N: int) -> float:
    """``log(C(N, N/2) 2^-N)`` via log-gamma."""
    if N % 2:
        raise DomainError(f"N must be even, got {N}")
    return math.lgamma(N + 1) - 2 * math.lgamma(N // 2 + 1) - N * math.log(2)


def balanced_probability(N: int) -> float:
    """Probability of exactly ``N/2`` ones under fair coin flips; the largest over all product measures."""
    if N % 2:
        raise DomainError(f"N must be even, got {N}")
    return math.comb(N, N // 2) / 2 ** N


def stirling_checks(N_max: int = 170, even_max: int = 1000) -> dict:
    """Check ``1/(12n+1) < r_n < 1/(12n)`` for ``n <= N_max`` and
    ``C(N, N/2) 2^-N < N^(-1/2)`` for even ``N <= even_max``."""
    if N_max > 170:
        raise DomainError("direct factorial bracket is limited to n <= 170")
    failures = []
    for n in range(1, N_max + 1):
        r = stirling_remainder(n)
        if not (mpmath.mpf(1) / (12 * n + 1) < r < mpmath.mpf(1) / (12 * n)):
            failures.append(n)
    bad_even = [N for N in range(2, even_max + 1, 2) if not log_balanced_probability(N) < -0.5 * math.log(N)]
    return {
        "n_max": N_max,
        "stirling_holds": not failures,
        "stirling_failures": failures,
        "even_max": even_max,
        "balanced_bound_holds": not bad_even,
        "balanced_failures": bad_even,
    }
