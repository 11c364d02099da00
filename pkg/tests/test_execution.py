import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from utiliconf import execution
from utiliconf.distributions import Discrete, LogNormal, Mixture, Pareto
from utiliconf.errors import ExhaustedStreamError, FormatError, InputDomainError
from utiliconf.execution import (
    CostLedger,
    MatrixSource,
    RunCache,
    SyntheticSource,
    capped_run,
    load_runtime_matrix,
    sync_runs,
)


def matrix(*rows):
    return MatrixSource(np.array(rows, dtype=float), seed=0)


def test_capped_run_examples():
    src = matrix([5.0, 50.0, 10.0])
    j_of = {float(t): j for j, t in enumerate(src.row(0, 3))}
    led = CostLedger(1)
    r = capped_run(src, 0, j_of[5.0], 10.0, led)
    assert (r.observed, r.completed) == (5.0, True)
    assert led.total == 5.0
    r = capped_run(src, 0, j_of[50.0], 10.0, led)
    assert (r.observed, r.completed) == (10.0, False)
    assert led.total == 15.0
    r = capped_run(src, 0, j_of[10.0], 10.0, led)
    assert (r.observed, r.completed) == (10.0, False)
    with pytest.raises(InputDomainError):
        capped_run(src, 0, 0, 0.0, led)


def test_matrix_exhausts():
    src = matrix([1.0, 2.0])
    with pytest.raises(ExhaustedStreamError):
        src.runtime(0, 2)
    with pytest.raises(ExhaustedStreamError):
        capped_run(src, 0, 5, 1.0, CostLedger(1))


def test_sync_reuses_completed_and_recharges_capped():
    src = matrix([3.0, 100.0, 6.0, 7.0])
    order = src.row(0, 4).tolist()
    cache = RunCache(src, 0)
    led = CostLedger(1, journal=True)
    sync_runs(src, 0, 4, 4.0, cache, led)
    assert led.total == math.fsum(min(t, 4.0) for t in order)
    before = led.total
    recs = sync_runs(src, 0, 4, 8.0, cache, led)
    # 3 is reused for free; 100 re-runs to 8; 6 and 7 complete this time
    assert led.total - before == 8.0 + 6.0 + 7.0
    j100 = order.index(100.0)
    charged_100 = [r.observed for r in led.journal if r.instance == j100]
    assert charged_100 == [4.0, 8.0]
    assert all(r.cap == 8.0 for r in recs)
    assert [r.observed for r in recs] == [min(t, 8.0) for t in order]


def test_sync_one_new_instance():
    src = matrix([1.0, 2.0, 3.0, 4.0, 5.0])
    cache, led = RunCache(src, 0), CostLedger(1)
    sync_runs(src, 0, 3, 10.0, cache, led)
    before = led.total
    sync_runs(src, 0, 4, 10.0, cache, led)
    assert led.total - before == src.row(0, 4)[3]


def test_sync_rejects_shrinking():
    src = matrix([1.0, 2.0, 3.0])
    cache, led = RunCache(src, 0), CostLedger(1)
    sync_runs(src, 0, 2, 4.0, cache, led)
    with pytest.raises(InputDomainError):
        sync_runs(src, 0, 2, 2.0, cache, led)
    with pytest.raises(InputDomainError):
        sync_runs(src, 0, 1, 4.0, cache, led)


@given(seed=st.integers(0, 10_000), steps=st.lists(st.tuples(st.integers(0, 3), st.booleans()), min_size=1, max_size=25))
def test_ledger_conservation_and_cache_soundness(seed, steps):
    src = SyntheticSource([Mixture([(0.6, LogNormal(0.0, 1.0)), (0.4, Pareto(8.0, 0.7))])], seed=seed)
    cache, led = RunCache(src, 0), CostLedger(1, journal=True)
    m, cap = 0, 1.0
    for grow_m, double in steps:
        m += grow_m
        if double:
            cap *= 2.0
        prev = {j: (cache.observed[j], cache.completed[j]) for j in range(cache.count)}
        recs = sync_runs(src, 0, max(m, cache.count), cap, cache, led)
        for r in recs:
            true_t = src.runtime(0, r.instance)
            assert r.observed == min(true_t, cap)
            assert r.completed == (true_t < cap)
            if r.instance in prev:
                assert r.observed >= prev[r.instance][0]
                if prev[r.instance][1]:
                    assert r.observed == prev[r.instance][0]
    # every completed instance was charged its full runtime exactly once
    done = {r.instance for r in led.journal if r.completed}
    for j in done:
        assert sum(1 for r in led.journal if r.instance == j and r.completed) == 1
    assert led.total == math.fsum(r.observed for r in led.journal)


def test_ledger_totals_are_exact():
    led = CostLedger(2)
    vals = [0.1] * 10 + [1e16, 1.0, -1e16]
    for v in vals:
        led.charge(0, v)
    led.charge_many(1, np.array([0.1, 0.2, 0.3]))
    assert led.algorithm_total(0) == math.fsum(vals)
    assert led.total == math.fsum(vals + [0.1, 0.2, 0.3])
    assert led.per_algorithm == [math.fsum(vals), math.fsum([0.1, 0.2, 0.3])]


def test_synthetic_reproducible_and_block_independent(monkeypatch):
    dists = [Pareto(1.0, 1.2), Mixture([(0.5, LogNormal(0, 1)), (0.5, Discrete([(7.0, 1.0)]))])]
    a = SyntheticSource(dists, seed=11, trial=2)
    ref = [a.row(i, 9000).copy() for i in range(2)]
    b = SyntheticSource(dists, seed=11, trial=2)
    assert [b.runtime(1, j) for j in range(50)] == ref[1][:50].tolist()
    monkeypatch.setattr(execution, "_BLOCK", 100)
    c = SyntheticSource(dists, seed=11, trial=2)
    for i in range(2):
        np.testing.assert_array_equal(c.row(i, 9000), ref[i])
    other = SyntheticSource(dists, seed=11, trial=3)
    assert not np.array_equal(other.row(0, 100), ref[0][:100])


def test_synthetic_streams_independent_across_algorithms():
    d = LogNormal(0, 1)
    src = SyntheticSource([d, d], seed=0)
    x, y = src.row(0, 20_000), src.row(1, 20_000)
    assert not np.array_equal(x, y)
    assert abs(np.corrcoef(np.log(x), np.log(y))[0, 1]) < 0.03


def test_load_runtime_matrix(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("instance,a,b\ni1,1.5,2\ni2,3,0.25\ni3,10,4\n")
    src = load_runtime_matrix(p, seed=4)
    assert src.n_algorithms == 2 and src.n_instances == 3
    assert src.names == ["a", "b"]
    assert sorted(src.row(0, 3).tolist()) == [1.5, 3.0, 10.0]
    again = load_runtime_matrix(p, seed=4)
    np.testing.assert_array_equal(again.order, src.order)
    assert sorted(src.order.tolist()) == [0, 1, 2]
    # columns stay aligned under the permutation
    j = int(np.flatnonzero(src.row(0, 3) == 3.0)[0])
    assert src.runtime(1, j) == 0.25


@pytest.mark.parametrize("body, where", [
    ("instance,a,b\ni1,1,0\n", "row 2, column 'b'"),
    ("instance,a,b\ni1,1\n", "row 2"),
    ("instance,a,b\ni1,1,\n", "row 2, column 'b'"),
    ("instance,a,b\ni1,x,1\n", "row 2, column 'a'"),
    ("inst,a\ni1,1\n", "header"),
])
def test_load_runtime_matrix_errors(tmp_path, body, where):
    p = tmp_path / "m.csv"
    p.write_text(body)
    with pytest.raises(FormatError, match=where):
        load_runtime_matrix(p)
