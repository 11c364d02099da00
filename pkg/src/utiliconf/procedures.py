"""Configuration procedures: Runtime Oracle, Naive and Utilitarian Procrastination.

All three pick among the algorithms of a :class:`~utiliconf.execution.RunSource`
and charge every observed second to a fresh
:class:`~utiliconf.execution.CostLedger`. Ties in any argmax go to the
lowest algorithm index, so a run is a deterministic function of its source.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InfeasibleInputsError, InputDomainError
from .execution import CostLedger, RunCache, RunSource
from .stats import oracle_alpha, theoretical_epsilon
from .utility import UtilityFunction

__all__ = [
    "ProcedureResult",
    "naive_sample_count",
    "run_oracle",
    "run_naive",
    "run_up",
    "write_events",
    "DEFAULT_MAX_M",
]

DEFAULT_MAX_M = 10**6

SINGLE_SURVIVOR = "single-survivor"
BUDGET = "budget"
MAX_M = "max-m"


@dataclass
class ProcedureResult:
    """Outcome of one procedure run.

    ``eliminations`` lists ``(m, algorithm)`` in the order arms were
    dropped. ``epsilon_hat`` holds the certified accuracy after each round,
    ``time_trace`` the ledger total after each round (when requested) and
    ``checkpoints`` the per-algorithm caps at the requested rounds.
    """

    procedure: str
    winner: int
    names: list[str]
    candidates: list[int]
    eliminations: list[tuple[int, int]]
    epsilon_hat: list[float]
    epsilon: float
    caps: list[float]
    samples: list[int]
    total_time: float
    per_algorithm_time: list[float]
    termination: str
    rounds: int
    checkpoints: dict[int, list[float]] = field(default_factory=dict)
    time_trace: list[float] | None = None
    epsilon_trace: list[float] | None = None

    @property
    def winner_name(self) -> str:
        return self.names[self.winner]

    def to_dict(self, traces: bool = False) -> dict:
        out = {
            "procedure": self.procedure,
            "winner": self.winner,
            "winner_name": self.winner_name,
            "names": list(self.names),
            "candidates": list(self.candidates),
            "eliminations": [list(e) for e in self.eliminations],
            "epsilon_hat": self.epsilon_hat[-1] if self.epsilon_hat else None,
            "epsilon": self.epsilon,
            "caps": list(self.caps),
            "samples": list(self.samples),
            "total_time": self.total_time,
            "per_algorithm_time": list(self.per_algorithm_time),
            "termination": self.termination,
            "rounds": self.rounds,
            "checkpoints": {str(k): v for k, v in sorted(self.checkpoints.items())},
        }
        if traces:
            out["epsilon_hat_trace"] = list(self.epsilon_hat)
            out["time_trace"] = self.time_trace
            out["epsilon_trace"] = self.epsilon_trace
        return out


def write_events(events: Iterable[dict], path) -> None:
    """Write an event log as JSON lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")


def _stop_limit(src: RunSource, max_m: int) -> int:
    if max_m < 1:
        raise InputDomainError(f"max_m must be >= 1, got {max_m!r}")
    if src.n_instances is not None:
        return min(max_m, src.n_instances)
    return max_m


def _argmax(values: dict[int, float]) -> int:
    best, best_v = -1, -math.inf
    for i in sorted(values):
        if values[i] > best_v:
            best, best_v = i, values[i]
    return best


def run_oracle(
    src: RunSource,
    u: UtilityFunction,
    delta: float,
    max_m: int = DEFAULT_MAX_M,
    budget: float | None = None,
    free_oracle: bool = False,
    event_log: list | None = None,
    trace: bool = False,
) -> ProcedureResult:
    """Successive elimination on uncapped runtimes.

    Every round draws one more full runtime per surviving algorithm and
    drops any algorithm whose mean utility trails the leader's by more than
    ``2 alpha_m``. Uncapped runs are charged in full unless ``free_oracle``.
    """
    if not 0.0 < delta < 1.0:
        raise InputDomainError(f"delta must lie in (0, 1), got {delta!r}")
    n = src.n_algorithms
    limit = _stop_limit(src, max_m)
    ledger = CostLedger(n)
    sums = [0.0] * n
    comp = [0.0] * n
    samples = [0] * n
    active = list(range(n))
    eliminations: list[tuple[int, int]] = []
    eps_hat: list[float] = []
    times: list[float] | None = [] if trace else None
    eps_trace: list[float] | None = [] if trace else None
    at = u.at
    winner = 0
    termination = MAX_M
    m = 0
    alpha = math.inf
    while m < limit:
        m += 1
        for i in active:
            t = src.runtime(i, m - 1)
            ledger.charge(i, 0.0 if free_oracle else t, m - 1, math.inf)
            y = at(t) - comp[i]
            s = sums[i] + y
            comp[i] = (s - sums[i]) - y
            sums[i] = s
            samples[i] = m
        means = {i: sums[i] / m for i in active}
        winner = _argmax(means)
        alpha = oracle_alpha(n, m, delta)
        lead = means[winner]
        eps_hat.append(max(0.0, max((means[i] - lead for i in active if i != winner), default=-math.inf) + 2 * alpha))
        dropped = [i for i in active if i != winner and means[i] < lead - 2 * alpha]
        if event_log is not None:
            for i in active:
                event_log.append({
                    "m": m, "i": i, "kappa_i": None, "U_hat": means[i], "F_hat": 1.0,
                    "alpha": alpha, "ucb": means[i] + alpha, "lcb": means[i] - alpha,
                    "eliminated": i in dropped, "doubled": False,
                })
        for i in dropped:
            eliminations.append((m, i))
        active = [i for i in active if i not in dropped]
        if trace:
            times.append(ledger.running_total)
            eps_trace.append(2 * alpha)
        if len(active) == 1:
            termination = SINGLE_SURVIVOR
            break
        if budget is not None and ledger.running_total >= budget:
            termination = BUDGET
            break
    return ProcedureResult(
        procedure="oracle",
        winner=winner,
        names=list(src.names),
        candidates=active,
        eliminations=eliminations,
        epsilon_hat=eps_hat,
        epsilon=2 * alpha,
        caps=[math.inf] * n,
        samples=samples,
        total_time=ledger.total,
        per_algorithm_time=ledger.per_algorithm,
        termination=termination,
        rounds=m,
        time_trace=times,
        epsilon_trace=eps_trace,
    )


def naive_sample_count(n: int, delta: float, epsilon: float, u_kappa: float) -> int:
    """Runs per algorithm Naive needs: ``ceil(2 ln(2n/delta) / (epsilon - u(kappa))^2)``."""
    if not u_kappa < epsilon:
        raise InfeasibleInputsError(f"captime utility {u_kappa!r} must be below epsilon {epsilon!r}")
    if n < 1 or not 0.0 < delta < 1.0:
        raise InputDomainError(f"invalid arguments n={n!r} delta={delta!r}")
    return math.ceil(2.0 * math.log(2.0 * n / delta) / (epsilon - u_kappa) ** 2)


def run_naive(
    src: RunSource,
    u: UtilityFunction,
    epsilon: float,
    delta: float,
    kappa: float,
    event_log: list | None = None,
) -> ProcedureResult:
    """Fixed-captime baseline: ``m`` runs of every algorithm at ``kappa``, best mean wins."""
    if not kappa > 0:
        raise InputDomainError(f"captime must be positive, got {kappa!r}")
    n = src.n_algorithms
    u_kappa = u.at(kappa)
    m = naive_sample_count(n, delta, epsilon, u_kappa)
    if src.n_instances is not None and m > src.n_instances:
        raise InfeasibleInputsError(f"Naive needs {m} instances but the source has {src.n_instances}")
    ledger = CostLedger(n)
    means = {}
    for i in range(n):
        t = src.row(i, m)
        obs = np.minimum(t, kappa)
        ledger.charge_many(i, obs, cap=kappa)
        means[i] = math.fsum(u._eval(obs)) / m
        if event_log is not None:
            f_hat = float(np.count_nonzero(t < kappa)) / m
            event_log.append({
                "m": m, "i": i, "kappa_i": kappa, "U_hat": means[i], "F_hat": f_hat,
                "alpha": None, "ucb": None, "lcb": None, "eliminated": False, "doubled": False,
            })
    winner = _argmax(means)
    return ProcedureResult(
        procedure="naive",
        winner=winner,
        names=list(src.names),
        candidates=list(range(n)),
        eliminations=[],
        epsilon_hat=[],
        epsilon=epsilon,
        caps=[float(kappa)] * n,
        samples=[m] * n,
        total_time=ledger.total,
        per_algorithm_time=ledger.per_algorithm,
        termination=MAX_M,
        rounds=m,
    )


def run_up(
    src: RunSource,
    u: UtilityFunction,
    delta: float,
    max_m: int = DEFAULT_MAX_M,
    budget: float | None = None,
    event_log: list | None = None,
    log_all_rounds: bool = True,
    checkpoints: Iterable[int] = (),
    trace: bool = False,
) -> ProcedureResult:
    """Utilitarian Procrastination.

    Every round runs one more instance per candidate at that candidate's
    own captime (starting at 1 s), builds UCB/LCB from the capped runs,
    drops candidates whose UCB falls below the best LCB, and doubles a
    candidate's captime once sampling error ``2 alpha`` no longer exceeds
    the estimated capping error ``u(kappa)(1 - F_hat)``.

    The procedure is anytime: ``max_m`` and ``budget`` (simulated seconds)
    are checked between rounds, and the result carries the winner so far,
    its certified accuracy ``epsilon_hat`` and the guaranteed accuracy
    ``epsilon`` for the rounds completed. With ``event_log`` given, one dict
    per candidate per round is appended (or only rounds where something was
    eliminated or doubled when ``log_all_rounds`` is false).
    """
    if not 0.0 < delta < 1.0:
        raise InputDomainError(f"delta must lie in (0, 1), got {delta!r}")
    n = src.n_algorithms
    limit = _stop_limit(src, max_m)
    marks = set(int(c) for c in checkpoints)
    ledger = CostLedger(n)
    caches = [RunCache(src, i) for i in range(n)]
    kappa = [1.0] * n
    u_kappa = [u.at(1.0)] * n
    sums = [0.0] * n
    comp = [0.0] * n
    done = [0] * n
    ucb = [0.0] * n
    lcb = [0.0] * n
    alpha = [0.0] * n
    f_hat = [0.0] * n
    active = list(range(n))
    eliminations: list[tuple[int, int]] = []
    eps_hat: list[float] = []
    marks_out: dict[int, list[float]] = {}
    times: list[float] | None = [] if trace else None
    eps_trace: list[float] | None = [] if trace else None
    scalar = u._scalar
    log2 = math.log2
    log = math.log
    sqrt = math.sqrt
    c_alpha = 11.0 * n / delta
    winner = 0
    termination = MAX_M
    m = 0
    while m < limit:
        m += 1
        two_m = 2.0 * m
        for i in active:
            cache = caches[i]
            if cache.cap != kappa[i]:
                if cache.raise_cap(kappa[i], ledger):
                    obs = cache.observed
                    sums[i] = math.fsum(u._eval(obs))
                    comp[i] = 0.0
                    done[i] = int(np.count_nonzero(cache.completed))
            obs_j, ok = cache.run_next(ledger)
            y = scalar(obs_j) - comp[i]
            s = sums[i] + y
            comp[i] = (s - sums[i]) - y
            sums[i] = s
            if ok:
                done[i] += 1
            d = log2(kappa[i]) + 1.0
            a = sqrt(log(c_alpha * m * m * d * d) / two_m)
            uh = sums[i] / m
            fh = done[i] / m
            uk = u_kappa[i]
            alpha[i] = a
            f_hat[i] = fh
            ucb[i] = uh + (1.0 - uk) * a
            lcb[i] = uh - a - uk * (1.0 - fh)
        winner = active[0]
        best = lcb[winner]
        for i in active:
            if lcb[i] > best:
                winner, best = i, lcb[i]
        eps_hat.append(max(0.0, max((ucb[i] - best for i in active if i != winner), default=0.0)))
        survivors = []
        for i in active:
            gone = ucb[i] < best
            grow = (not gone) and 2.0 * alpha[i] <= u_kappa[i] * (1.0 - f_hat[i])
            if event_log is not None and (log_all_rounds or gone or grow):
                event_log.append({
                    "m": m, "i": i, "kappa_i": kappa[i], "U_hat": sums[i] / m, "F_hat": f_hat[i],
                    "alpha": alpha[i], "ucb": ucb[i], "lcb": lcb[i], "eliminated": gone, "doubled": grow,
                })
            if gone:
                eliminations.append((m, i))
                continue
            if grow:
                kappa[i] *= 2.0
                u_kappa[i] = u.at(kappa[i])
            survivors.append(i)
        active = survivors
        if m in marks:
            marks_out[m] = list(kappa)
        if trace:
            times.append(ledger.running_total)
            eps_trace.append(theoretical_epsilon(n, m, delta))
        if len(active) == 1:
            termination = SINGLE_SURVIVOR
            break
        if budget is not None and ledger.running_total >= budget:
            termination = BUDGET
            break
    return ProcedureResult(
        procedure="up",
        winner=winner,
        names=list(src.names),
        candidates=active,
        eliminations=eliminations,
        epsilon_hat=eps_hat,
        epsilon=theoretical_epsilon(n, max(m, 1), delta),
        caps=list(kappa),
        samples=[c.count for c in caches],
        total_time=ledger.total,
        per_algorithm_time=ledger.per_algorithm,
        termination=termination,
        rounds=m,
        checkpoints=marks_out,
        time_trace=times,
        epsilon_trace=eps_trace,
    )
