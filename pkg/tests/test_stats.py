import math

import numpy as np
import pytest

from utiliconf.distributions import Discrete
from utiliconf.errors import InputDomainError
from utiliconf.execution import RunRecord
from utiliconf.stats import (
    AlgorithmStats,
    KahanSum,
    anytime_epsilon,
    confidence_bounds,
    empirical_stats,
    hoeffding_radius,
    oracle_alpha,
    theoretical_epsilon,
    up_alpha,
)
from utiliconf.utility import LogLaplace, Uniform


def records(times, cap, i=0):
    return [RunRecord(i, j, cap, min(t, cap), t < cap) for j, t in enumerate(times)]


def test_empirical_stats_example(unif):
    u_hat, f_hat = empirical_stats(records([1, 2, 5, 7], 4.0), unif)
    assert u_hat == pytest.approx((59 + 58 + 56 + 56) / 240, abs=1e-15)
    assert f_hat == 0.5


def test_empirical_stats_extremes(unif):
    u_hat, f_hat = empirical_stats(records([50, 80], 10.0), unif)
    assert (u_hat, f_hat) == (unif(10.0), 0.0)
    u_hat, f_hat = empirical_stats(records([1e-12, 1e-12], 10.0), unif)
    assert f_hat == 1.0 and u_hat == pytest.approx(1.0)


def test_empirical_stats_errors(unif):
    with pytest.raises(InputDomainError):
        empirical_stats([], unif)
    with pytest.raises(InputDomainError):
        empirical_stats(records([1], 2.0) + records([1], 4.0), unif)
    with pytest.raises(InputDomainError):
        empirical_stats(records([1], 2.0, 0) + records([1], 2.0, 1), unif)


def test_hoeffding_radius():
    assert hoeffding_radius(200, 0.05) == pytest.approx(math.sqrt(math.log(20) / 400), rel=1e-15)
    assert hoeffding_radius(10, 1.0) == 0.0
    assert hoeffding_radius(400, 0.1) == pytest.approx(hoeffding_radius(100, 0.1) / 2, rel=1e-15)
    for bad in [(0, 0.1), (5, 0.0), (5, 1.5)]:
        with pytest.raises(InputDomainError):
            hoeffding_radius(*bad)


def test_up_alpha():
    assert up_alpha(2, 1, 1.0, 0.1) == pytest.approx(math.sqrt(math.log(220) / 2), rel=1e-15)
    assert up_alpha(2, 1, 1.0, 0.1) == pytest.approx(1.64219, abs=1e-5)
    for m in (1, 10, 1000):
        k = 1.0
        prev = up_alpha(5, m, k, 0.1)
        for _ in range(12):
            k *= 2
            cur = up_alpha(5, m, k, 0.1)
            assert cur > prev
            prev = cur
    with pytest.raises(InputDomainError):
        up_alpha(2, 1, 0.5, 0.1)


def test_oracle_alpha():
    assert oracle_alpha(3, 7, 0.2) == pytest.approx(math.sqrt(math.log(4 * 3 * 49 / 0.2) / 14), rel=1e-15)


def test_confidence_bounds_examples():
    u = Uniform(60)
    st = AlgorithmStats(0, 10, 30.0, u_hat=0.9, f_hat=1.0, alpha=0.1)
    ucb, lcb = confidence_bounds(st, u)
    assert ucb == pytest.approx(0.95, abs=1e-15)
    assert lcb == pytest.approx(0.8, abs=1e-15)
    st = AlgorithmStats(0, 10, 30.0, u_hat=0.9, f_hat=0.6, alpha=0.1)
    assert confidence_bounds(st, u)[1] == pytest.approx(0.9 - 0.1 - 0.5 * 0.4, abs=1e-15)
    st = AlgorithmStats(0, 10, 60.0, u_hat=0.4, f_hat=0.2, alpha=0.1)
    assert confidence_bounds(st, u) == pytest.approx((0.5, 0.3), abs=1e-15)
    st = AlgorithmStats(0, 10, 30.0, u_hat=0.99, f_hat=1.0, alpha=0.5)
    assert confidence_bounds(st, u)[0] > 1.0  # never clamped


def test_anytime_epsilon_examples():
    s = [AlgorithmStats(0, 1, 1, 0, 0, ucb=0.9, lcb=0.75), AlgorithmStats(1, 1, 1, 0, 0, ucb=0.8, lcb=0.1),
         AlgorithmStats(2, 1, 1, 0, 0, ucb=0.7, lcb=0.1)]
    assert anytime_epsilon(s, 0) == pytest.approx(0.05, abs=1e-15)
    s[1] = AlgorithmStats(1, 1, 1, 0, 0, ucb=0.6, lcb=0.1)
    assert anytime_epsilon(s, 0) == 0.0
    assert anytime_epsilon(s[:1], 0) == 0.0


def test_theoretical_epsilon():
    exact = 3 * math.sqrt(math.log(11 * 10 * 1e16 / 0.05) / 2e4)
    assert theoretical_epsilon(10, 10**4, 0.05) == pytest.approx(exact, rel=1e-15)
    eps = [theoretical_epsilon(5, m, 0.1) for m in range(2, 5000)]
    assert all(b < a for a, b in zip(eps, eps[1:]))
    assert theoretical_epsilon(20, 100, 0.1) > theoretical_epsilon(5, 100, 0.1)


def test_kahan_sum():
    k = KahanSum()
    for _ in range(10**5):
        k.add(0.1)
    assert k.value == pytest.approx(math.fsum([0.1] * 10**5), abs=1e-12)


def test_good_events_and_width():
    """Radii at delta/(4n): all n intervals hold together in >= 1 - delta of trials."""
    u = LogLaplace(60, 1)
    dists = [Discrete([(5, 0.5), (40, 0.3), (400, 0.2)]), Discrete([(20, 0.7), (90, 0.3)]),
             Discrete([(2, 0.1), (70, 0.9)])]
    n, delta, m, kappa = len(dists), 0.1, 100, 50.0
    truth = [d.expected_utility(u) for d in dists]
    capped = [d.expected_utility(u, kappa) for d in dists]
    cdfs = [float(d.cdf(np.nextafter(kappa, 0))) for d in dists]
    a = math.sqrt(math.log(4 * n / delta) / (2 * m))
    uk = u(kappa)
    rng = np.random.default_rng(77)
    all_hold = 0
    trials = 2000
    for _ in range(trials):
        ok = True
        for d, U, Uk, F in zip(dists, truth, capped, cdfs):
            t = d.sample(rng, m)
            obs = np.minimum(t, kappa)
            u_hat = float(np.mean(u(obs)))
            f_hat = float(np.mean(t < kappa))
            ucb = u_hat + (1 - uk) * a
            lcb = u_hat - a - uk * (1 - f_hat)
            good = abs(u_hat - Uk) <= (1 - uk) * a and abs(f_hat - F) <= a
            if good:
                assert lcb <= U <= ucb
                assert ucb - lcb <= 2 * a + uk * (1 - F) + 1e-12
            ok = ok and good
        all_hold += ok
    assert all_hold / trials >= 1 - delta
