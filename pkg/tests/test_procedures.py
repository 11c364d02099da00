import math

import numpy as np
import pytest

from utiliconf.distributions import Discrete, LogNormal, Mixture, Pareto
from utiliconf.errors import InfeasibleInputsError, InputDomainError
from utiliconf.execution import MatrixSource, RunSource, SyntheticSource
from utiliconf.procedures import naive_sample_count, run_naive, run_oracle, run_up, write_events
from utiliconf.stats import oracle_alpha, theoretical_epsilon
from utiliconf.utility import LogLaplace, Uniform


class Untouchable(RunSource):
    names = ["a", "b"]

    def runtime(self, i, j):
        raise AssertionError("no run may happen")

    runtimes = row = runtime


def test_naive_sample_count():
    assert naive_sample_count(10, 0.1, 0.2, 0.1) == math.ceil(2 * math.log(200) / 0.1**2) == 1060
    with pytest.raises(InfeasibleInputsError):
        naive_sample_count(3, 0.1, 0.5, 0.5)


def test_naive_rejects_before_running(unif):
    with pytest.raises(InfeasibleInputsError):
        run_naive(Untouchable(), unif, 0.2, 0.1, 30.0)


def test_naive_counts_and_ledger(ll):
    dists = [LogNormal(math.log(10), 1.0), Pareto(20, 0.9), Discrete([(3, 0.5), (900, 0.5)])]
    src = SyntheticSource(dists, seed=3)
    kappa = 600.0
    res = run_naive(src, ll, 0.2, 0.1, kappa)
    m = naive_sample_count(3, 0.1, 0.2, ll(kappa))
    assert res.samples == [m] * 3
    expected = math.fsum(min(t, kappa) for i in range(3) for t in src.row(i, m).tolist())
    assert res.total_time == expected
    means = [np.mean(ll(np.minimum(src.row(i, m), kappa))) for i in range(3)]
    assert res.winner == int(np.argmax(means))


def test_naive_single_algorithm(ll):
    res = run_naive(SyntheticSource([Pareto(1, 1)]), ll, 0.3, 0.1, 1000.0)
    assert res.winner == 0 and res.samples[0] == naive_sample_count(1, 0.1, 0.3, ll(1000.0))


def test_naive_needs_enough_instances(ll):
    src = MatrixSource(np.ones((2, 50)))
    with pytest.raises(InfeasibleInputsError):
        run_naive(src, ll, 0.2, 0.1, 1000.0)


def test_naive_agrees_with_exact_argmax_beyond_support(unif):
    dists = [Discrete([(5, 0.5), (40, 0.5)]), Discrete([(10, 0.7), (70, 0.3)]), Discrete([(20, 1.0)])]
    best = int(np.argmax([d.expected_utility(unif) for d in dists]))
    hits = sum(run_naive(SyntheticSource(dists, seed=s), unif, 0.05, 0.1, 100.0).winner == best for s in range(60))
    assert hits / 60 >= 0.9


def test_oracle_point_masses(unif):
    src = SyntheticSource([Discrete([(1.0, 1.0)]), Discrete([(50.0, 1.0)])])
    res = run_oracle(src, unif, 0.1)
    gap = 49 / 60
    first = next(m for m in range(1, 10**6) if 2 * oracle_alpha(2, m, 0.1) < gap)
    assert res.eliminations == [(first, 1)]
    assert res.winner == 0 and res.termination == "single-survivor"
    assert res.total_time == first * 1.0 + first * 50.0
    free = run_oracle(src, unif, 0.1, free_oracle=True)
    assert free.total_time == 0.0 and free.eliminations == res.eliminations


def test_oracle_single_and_identical(unif):
    res = run_oracle(SyntheticSource([Pareto(1, 2)]), unif, 0.1)
    assert res.rounds == 1 and res.winner == 0
    d = LogNormal(2.0, 0.5)
    res = run_oracle(SyntheticSource([d, d, d], seed=1), unif, 0.1, budget=2000.0)
    assert res.termination == "budget" and res.eliminations == []
    assert res.winner in res.candidates
    assert res.epsilon_hat[-1] >= 0


def test_up_single_algorithm(ll):
    res = run_up(SyntheticSource([Pareto(1, 2)]), ll, 0.1)
    assert res.rounds == 1 and res.winner == 0 and res.termination == "single-survivor"


def test_up_fast_arm_keeps_cap_one(ll):
    src = SyntheticSource([Discrete([(0.5, 1.0)]), Discrete([(0.25, 1.0)])])
    res = run_up(src, ll, 0.1, max_m=3000)
    assert res.caps == [1.0, 1.0]


def test_up_matrix_stops_at_stream_end(ll):
    rng = np.random.default_rng(0)
    src = MatrixSource(rng.lognormal(2, 1, size=(3, 40)))
    res = run_up(src, ll, 0.1)
    assert res.rounds <= 40
    if res.termination != "single-survivor":
        assert res.termination == "max-m" and res.rounds == 40


def test_up_budget_stop(ll):
    src = SyntheticSource([LogNormal(2, 1), LogNormal(2.05, 1)], seed=2)
    res = run_up(src, ll, 0.1, budget=5000.0)
    assert res.termination == "budget"
    assert res.total_time >= 5000.0


TWO_ARMS = [Discrete([(3.0, 0.5), (9.0, 0.5)]), Discrete([(10.0, 0.5), (50.0, 0.5)])]


def test_two_arm_example_utilities(unif):
    assert [d.expected_utility(unif) for d in TWO_ARMS] == pytest.approx([0.9, 0.5], abs=1e-15)


def test_up_two_arms_monte_carlo(unif):
    """Arm 2 goes by the round where 2a1 + 2a2 + tail1 + tail2 <= 0.4; arm 1 wins in >= 1 - delta."""
    trials, wins, on_time = 200, 0, 0
    for s in range(trials):
        log = []
        res = run_up(SyntheticSource(TWO_ARMS, seed=1000 + s), unif, 0.1, event_log=log)
        wins += res.winner == 0
        rounds = {}
        for ev in log:
            rounds.setdefault(ev["m"], {})[ev["i"]] = ev
        bound = None
        for m in sorted(rounds):
            evs = rounds[m]
            if len(evs) < 2:
                break
            width = sum(2 * evs[i]["alpha"] + TWO_ARMS[i].tail_term(unif, evs[i]["kappa_i"]) for i in (0, 1))
            if width <= 0.4:
                bound = m
                break
        gone = dict((i, m) for m, i in res.eliminations)
        on_time += 1 in gone and (bound is None or gone[1] <= bound)
    assert wins / trials >= 0.9
    assert on_time / trials >= 0.9


def _check_log(res, log, u, n):
    by_round = {}
    for ev in log:
        by_round.setdefault(ev["m"], []).append(ev)
    for m, evs in by_round.items():
        best = max(e["lcb"] for e in evs)
        star = min(e["i"] for e in evs if e["lcb"] == best)
        for e in evs:
            assert e["lcb"] <= e["ucb"]
            assert e["eliminated"] == (e["ucb"] < best)
            if e["i"] == star:
                assert not e["eliminated"]
            if e["doubled"]:
                assert 2 * e["alpha"] <= u(e["kappa_i"]) * (1 - e["F_hat"])
            assert round(e["F_hat"] * m) == pytest.approx(e["F_hat"] * m, abs=1e-9)


def test_up_invariants_on_family(family, ll):
    names, dists = family
    log = []
    res = run_up(SyntheticSource(dists, names, seed=5), ll, 0.1, max_m=20_000, event_log=log, trace=True)
    assert res.winner in res.candidates
    for k in res.caps:
        assert math.log2(k) == int(math.log2(k))
    gone = {i for _, i in res.eliminations}
    survivors = max(res.samples[i] for i in res.candidates)
    for i in gone:
        assert res.samples[i] <= survivors
    _check_log(res, log, ll, len(dists))
    assert all(e >= 0 for e in res.epsilon_hat)
    tr = res.epsilon_trace
    assert all(b < a for a, b in zip(tr[1:], tr[2:]))
    assert res.epsilon == theoretical_epsilon(5, res.rounds, 0.1)
    assert res.time_trace[-1] == pytest.approx(res.total_time, rel=1e-12)
    assert all(b >= a for a, b in zip(res.time_trace, res.time_trace[1:]))


def test_up_change_only_log_is_a_subset(family, ll):
    names, dists = family
    full, sparse = [], []
    run_up(SyntheticSource(dists, seed=9), ll, 0.1, max_m=3000, event_log=full)
    run_up(SyntheticSource(dists, seed=9), ll, 0.1, max_m=3000, event_log=sparse, log_all_rounds=False)
    assert sparse == [e for e in full if e["eliminated"] or e["doubled"]]


def test_up_ledger_matches_cache_accounting(ll):
    """Total time equals every first run plus every re-run at a doubled cap."""
    dists = [Mixture([(0.5, LogNormal(0, 1)), (0.5, Pareto(5, 1.0))]), LogNormal(1, 1)]
    src = SyntheticSource(dists, seed=4)
    log = []
    res = run_up(src, ll, 0.1, max_m=2000, event_log=log)
    expected = []
    for i in range(2):
        caps_by_round = {e["m"]: e["kappa_i"] for e in log if e["i"] == i}
        t = src.row(i, res.samples[i])
        for j, tj in enumerate(t.tolist()):
            # instance j is first run at round j+1 and re-run after every doubling until it completes
            caps = sorted({caps_by_round[m] for m in caps_by_round if m >= j + 1})
            for c in caps:
                expected.append(min(tj, c))
                if tj < c:
                    break
    assert res.total_time == pytest.approx(math.fsum(expected), rel=1e-12)


def test_up_deterministic(family, ll):
    names, dists = family
    a = run_up(SyntheticSource(dists, seed=21), ll, 0.1, max_m=4000)
    b = run_up(SyntheticSource(dists, seed=21), ll, 0.1, max_m=4000)
    assert a.to_dict(traces=True) == b.to_dict(traces=True)


def test_write_events(tmp_path, ll):
    log = []
    run_up(SyntheticSource([LogNormal(0, 1), LogNormal(1, 1)]), ll, 0.1, max_m=5, event_log=log)
    path = tmp_path / "ev.jsonl"
    write_events(log, path)
    lines = path.read_text().splitlines()
    assert len(lines) == len(log)
    import json
    keys = {"m", "i", "kappa_i", "U_hat", "F_hat", "alpha", "ucb", "lcb", "eliminated", "doubled"}
    assert all(set(json.loads(line)) == keys for line in lines)


def test_bad_arguments(ll):
    src = SyntheticSource([LogNormal(0, 1)])
    with pytest.raises(InputDomainError):
        run_up(src, ll, 1.5)
    with pytest.raises(InputDomainError):
        run_up(src, ll, 0.1, max_m=0)
    with pytest.raises(InputDomainError):
        run_naive(src, ll, 0.5, 0.1, 0.0)
