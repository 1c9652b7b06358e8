import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conformal_randomness.betting import (
    UNIFORM,
    FixedBetting,
    HistogramBetting,
    MartingaleState,
    PiecewiseConstant,
    PowerBetting,
    SimpleMixture,
    conformal_martingale_run,
    log_growth,
    parse_strategy,
    power_betting_function,
    product_martingale,
    simple_mixture,
)
from conformal_randomness.core import DomainError
from conformal_randomness.pvalues import ConformalTransducer


def test_power_function_examples():
    f = power_betting_function(0.5)
    assert f(0.25) == pytest.approx(1.0)
    assert f(1.0) == pytest.approx(0.5)
    # close to kappa = 1 the bet is nearly fair
    g = power_betting_function(1 - 1e-9)
    assert g(0.3) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("kappa", [0.05, 0.2, 0.5, 0.8, 0.99])
def test_power_function_is_a_density(kappa):
    f = power_betting_function(kappa)
    # integrable endpoint singularity: integrate u**(kappa-1) exactly via substitution
    assert quad(lambda u: f(u), 0, 1, limit=500)[0] == pytest.approx(1.0, abs=1e-6)


def test_power_function_domain():
    for k in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(DomainError):
            power_betting_function(k)


def test_product_martingale_examples():
    assert product_martingale([0.3, 0.7, 0.1], [UNIFORM] * 3).final.capital == 1.0
    traj = product_martingale([0.01, 0.04], PowerBetting(0.5))
    assert traj.capital[-1] == pytest.approx(12.5)
    assert traj.multipliers.tolist() == pytest.approx([5.0, 2.5])
    assert product_martingale([1.0], PowerBetting(0.5)).capital[-1] == pytest.approx(0.5)
    assert product_martingale([], PowerBetting(0.5)).capital.tolist() == [1.0]


def test_callable_and_sequence_strategies():
    f = power_betting_function(0.5)
    by_seq = product_martingale([0.01, 0.04], [f, f])
    by_call = product_martingale([0.01, 0.04], lambda past: f)
    assert by_seq.log_capital.tolist() == by_call.log_capital.tolist()
    with pytest.raises(DomainError):
        product_martingale([0.1, 0.2], [f])


def test_martingale_state_log_space_and_absorbing():
    s = MartingaleState()
    for _ in range(100):
        s = s.advance(1e10)
    assert s.capital == math.inf
    assert s.log10_capital == pytest.approx(1000.0)
    z = MartingaleState().advance(0.0).advance(1e300)
    assert z.capital == 0.0 and z.log_capital == -math.inf
    with pytest.raises(DomainError):
        MartingaleState().advance(math.nan)


def test_histogram_uniform_prior():
    h = HistogramBetting(2, 1)
    f = h.betting_function()
    assert f(0.2) == 1.0 and f(0.9) == 1.0


def test_histogram_bins_and_boundaries():
    h = HistogramBetting(10, 10)
    assert h.bin_of(0.0) == 0
    assert h.bin_of(0.1) == 1  # interior boundary goes right
    assert h.bin_of(0.3) == 3
    assert h.bin_of(1.0) == 9  # last bin closed
    with pytest.raises(DomainError):
        h.bin_of(1.5)


def test_histogram_hand_trace():
    # B=2, C=1: after p=0.2 the left bin has density (1+1)/(1+1/2) = 4/3
    traj = product_martingale([0.2, 0.1, 0.9], HistogramBetting(2, 1))
    assert traj.multipliers.tolist() == pytest.approx([1.0, 4 / 3, (1 + 0) / (1 + 1.0)])


def test_histogram_zero_pseudocount():
    h = HistogramBetting(4, 0)
    with pytest.raises(DomainError):
        h.betting_function()


@pytest.mark.parametrize(
    "strategy", [HistogramBetting(10, 10), HistogramBetting(3, 0.5), SimpleMixture(20), PowerBetting(0.3)]
)
def test_vectorised_paths_match_sequential(strategy):
    P = np.random.default_rng(0).random((5, 60))
    P[0, :5] = [0.1, 0.2, 0.5, 1.0, 0.0]
    expected = []
    for row in P:
        strategy.reset()
        expected.append(product_martingale(row, strategy).log_capital)
    strategy.reset()
    assert np.allclose(strategy.log_paths(P), np.array(expected), rtol=1e-12, atol=1e-12)


def test_mixture_matches_average_of_power_martingales():
    ps = np.random.default_rng(1).random(50)
    m = 8
    kappas = (np.arange(1, m + 1) - 0.5) / m
    finals = [product_martingale(ps, PowerBetting(k)).capital[-1] for k in kappas]
    assert simple_mixture(ps, m).capital[-1] == pytest.approx(np.mean(finals), rel=1e-10)


prefixes = st.lists(st.floats(0.001, 1.0), max_size=15)


@settings(max_examples=30, deadline=None)
@given(prefixes, st.sampled_from(["histogram:10,10", "histogram:5,2", "mixture:10", "power:0.4", "uniform"]))
def test_betting_martingale_axiom(prefix, spec):
    """Integrating the next-step capital over u returns the current capital."""
    strategy = parse_strategy(spec)
    for p in prefix:
        strategy.update(p)
    f = strategy.betting_function()
    if isinstance(f, PiecewiseConstant):
        breaks = list(f.edges[1:-1])
        integral = quad(lambda u: f(u), 0, 1, points=breaks, limit=200)[0]
    else:
        # u = t**20 removes the u**(kappa-1) singularity at 0 for kappa >= 0.05
        integral = quad(lambda t: float(f(t**20)) * 20 * t**19, 0, 1, limit=500)[0]
    assert integral == pytest.approx(1.0, abs=1e-6)


def test_piecewise_constant_integral():
    f = PiecewiseConstant([0, 0.5, 1], [1.5, 0.5])
    assert f.integral() == 1.0
    assert f(0.5) == 0.5
    with pytest.raises(DomainError):
        PiecewiseConstant([0, 1], [1, 2])


def test_parse_strategy():
    assert isinstance(parse_strategy("power:0.5"), PowerBetting)
    assert parse_strategy("mixture:7").m == 7
    h = parse_strategy("histogram:20,20")
    assert (h.B, h.C) == (20, 20.0)
    assert isinstance(parse_strategy("uniform"), FixedBetting)
    for bad in ("power:2", "power:x", "histogram:3", "kelly"):
        with pytest.raises(DomainError):
            parse_strategy(bad)


def test_bet_is_chosen_before_pvalue():
    """The strategy sees p_n only after f_n is fixed."""
    seen = []

    class Spy(HistogramBetting):
        def betting_function(self):
            seen.append(self.n)
            return super().betting_function()

    rng = np.random.default_rng(0)
    stream = [(rng.normal(size=2), int(rng.integers(2))) for _ in range(20)]
    t = ConformalTransducer("knn-ratio", random_state=1)
    traj = conformal_martingale_run(t, Spy(), stream)
    assert seen == list(range(20))
    # and the bulk route gives the same trajectory
    from conformal_randomness.pvalues import conformal_pvalues

    X = np.array([x for x, _ in stream])
    y = [lab for _, lab in stream]
    bulk = product_martingale(conformal_pvalues(X, y, "knn-ratio", 1), HistogramBetting())
    assert np.array_equal(bulk.log_capital, traj.log_capital)


def test_log_growth():
    ps = np.random.default_rng(0).random(1000)
    assert log_growth(ps, UNIFORM) == 0.0
    rho = PiecewiseConstant([0, 0.5, 1], [1.6, 0.4])
    assert log_growth(ps, rho) < 0  # betting against uniform data loses


def test_iid_capital_has_unit_mean():
    rng = np.random.default_rng(123)
    # mild bets keep the variance of S_500 small enough for 1000 runs
    finals = np.exp(PowerBetting(0.97).log_paths(rng.random((1000, 500)))[:, -1])
    assert 0.8 <= finals.mean() <= 1.2
    # the histogram capital is heavy-tailed at long horizons; check it at n = 50
    finals = np.exp(HistogramBetting(10, 10).log_paths(rng.random((100_000, 50)))[:, -1])
    se = finals.std() / np.sqrt(finals.size)
    assert abs(finals.mean() - 1) < 4 * se
