"""Experiment driver: captime and epsilon sweeps, Monte Carlo guarantee checks.

Every experiment is described by an :class:`ExperimentSpec`. Trial ``k``
draws its runs from streams seeded with ``spec.seed + k``, so all procedures
compared within a trial see the same instances. Trials can be fanned out
over worker processes; rows are sorted before they are returned, so the
output does not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.stats import binomtest

from .distributions import (
    LogNormal,
    Mixture,
    Pareto,
    RuntimeDistribution,
    dump_synthetic_spec,
    load_synthetic_spec,
)
from .errors import InfeasibleInputsError, InputDomainError
from .execution import RunSource, SyntheticSource, load_runtime_matrix
from .procedures import DEFAULT_MAX_M, naive_sample_count, run_naive, run_oracle, run_up
from .stats import theoretical_epsilon
from .utility import LogLaplace, UtilityFunction, parse_utility

__all__ = [
    "ExperimentSpec",
    "Report",
    "benchmark_family",
    "benchmark_path",
    "write_benchmark",
    "theoretical_rounds",
    "wilson_interval",
    "sweep_captime",
    "sweep_epsilon",
    "sweep_delta",
    "montecarlo_correctness",
]

PROCEDURES = ("up", "naive", "oracle")

# Benchmark family: one fast algorithm that hangs on about half the instances,
# four slower but reliable ones. Gaps are exact under LogLaplace(60, 1).
BENCHMARK_GAPS = (0.0, 0.05, 0.1, 0.2, 0.4)
BENCHMARK_TOP = 0.5
_BODY_SIGMA = 0.5
_FAST_MEDIAN = 3.0
_SLOW_TAIL = 0.05
_HANG = (100.0, 0.5)


def _fast(weight: float) -> Mixture:
    return Mixture([(1.0 - weight, LogNormal(math.log(_FAST_MEDIAN), _BODY_SIGMA)), (weight, Pareto(*_HANG))])


def _slow(mu: float) -> Mixture:
    return Mixture([(1.0 - _SLOW_TAIL, LogNormal(mu, _BODY_SIGMA)), (_SLOW_TAIL, Pareto(*_HANG))])


def benchmark_family() -> tuple[list[str], list[RuntimeDistribution]]:
    """Build the default 5-algorithm synthetic benchmark.

    Every runtime law is a lognormal body mixed with a Pareto(100, 0.5)
    tail. ``alg0`` is fast (median 3 s) but lands in the tail with the
    weight that puts its expected LogLaplace(60, 1) utility at 0.5; the
    others put 5% in the tail and place their body medians so that their
    utilities trail ``alg0`` by 0.05, 0.1, 0.2 and 0.4.
    """
    u = LogLaplace(60.0, 1.0)
    w = brentq(lambda x: _fast(x).expected_utility(u) - BENCHMARK_TOP, 0.01, 0.99, xtol=1e-15)
    dists: list[RuntimeDistribution] = [_fast(w)]
    for gap in BENCHMARK_GAPS[1:]:
        target = BENCHMARK_TOP - gap
        mu = brentq(lambda x: _slow(x).expected_utility(u) - target, 0.0, 10.0, xtol=1e-15)
        dists.append(_slow(mu))
    return [f"alg{i}" for i in range(len(dists))], dists


def benchmark_path():
    return resources.files("utiliconf").joinpath("data", "benchmark.json")


def write_benchmark(path) -> None:
    names, dists = benchmark_family()
    dump_synthetic_spec(path, names, dists, utility="loglaplace:60,1")


def _grid(values, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not out:
        raise InputDomainError(f"{name} grid is empty")
    if any(not b > a for a, b in zip(out, out[1:])):
        raise InputDomainError(f"{name} grid must be strictly ascending: {out}")
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce an experiment.

    Exactly one of ``dataset`` (runtime matrix CSV) and ``synthetic``
    (distribution JSON) may be set; with neither, the shipped benchmark
    family is used. ``utility`` is a spec string for
    :func:`~utiliconf.utility.parse_utility`; when omitted, the synthetic
    file's own utility is used, falling back to ``loglaplace:60,1``.
    """

    procedures: tuple[str, ...] = ("up",)
    dataset: str | None = None
    synthetic: str | None = None
    utility: str | None = None
    delta: float = 0.1
    epsilons: tuple[float, ...] = (0.1,)
    captimes: tuple[float, ...] = (600.0,)
    seed: int = 0
    trials: int = 1
    max_m: int = DEFAULT_MAX_M
    budget: float | None = None
    free_oracle: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "procedures", tuple(self.procedures))
        object.__setattr__(self, "epsilons", _grid(self.epsilons, "epsilon"))
        object.__setattr__(self, "captimes", _grid(self.captimes, "captime"))
        bad = [p for p in self.procedures if p not in PROCEDURES]
        if bad or not self.procedures:
            raise InputDomainError(f"unknown procedures {bad}; choose from {PROCEDURES}")
        if self.dataset is not None and self.synthetic is not None:
            raise InputDomainError("give a dataset or a synthetic spec, not both")
        if not 0.0 < self.delta < 1.0:
            raise InputDomainError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.trials < 1:
            raise InputDomainError(f"trial count must be >= 1, got {self.trials!r}")
        if self.max_m < 1:
            raise InputDomainError(f"max_m must be >= 1, got {self.max_m!r}")
        if self.workers < 1:
            raise InputDomainError(f"workers must be >= 1, got {self.workers!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("workers")
        out["procedures"] = list(self.procedures)
        out["epsilons"] = list(self.epsilons)
        out["captimes"] = list(self.captimes)
        out["utility"] = self.utility_function().to_spec()
        return out

    def utility_function(self) -> UtilityFunction:
        if self.utility is not None:
            return parse_utility(self.utility)
        if self.dataset is None:
            spec = _load_synthetic(self.synthetic)[2]
            if spec is not None:
                return parse_utility(spec)
        return LogLaplace(60.0, 1.0)

    def distributions(self) -> list[RuntimeDistribution]:
        if self.dataset is not None:
            raise InputDomainError("exact utilities need a synthetic source, not a runtime matrix")
        return list(_load_synthetic(self.synthetic)[1])

    def source(self, trial: int) -> RunSource:
        if self.dataset is not None:
            return _load_matrix(self.dataset).with_trial(self.seed + trial, 0)
        names, dists, _ = _load_synthetic(self.synthetic)
        return SyntheticSource(list(dists), names=list(names), seed=self.seed + trial)


@lru_cache(maxsize=8)
def _load_synthetic(path: str | None):
    if path is None:
        names, dists = benchmark_family()
        return tuple(names), tuple(dists), "loglaplace:60,1"
    names, dists, utility = load_synthetic_spec(path)
    return tuple(names), tuple(dists), utility


@lru_cache(maxsize=8)
def _load_matrix(path: str):
    return load_runtime_matrix(path)


@dataclass
class Report:
    """Rows of one experiment plus the spec that produced them."""

    kind: str
    rows: list[dict]
    spec: dict = field(default_factory=dict)


def _fan_out(fn: Callable, spec: ExperimentSpec, trials: Sequence[int]) -> list:
    if spec.workers == 1 or len(trials) < 2:
        return [fn(spec, k) for k in trials]
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(fn, [spec] * len(trials), trials))


def theoretical_rounds(n: int, epsilon: float, delta: float) -> int:
    """Smallest ``m`` with ``theoretical_epsilon(n, m, delta) <= epsilon``."""
    if not epsilon > 0:
        raise InputDomainError(f"epsilon must be positive, got {epsilon!r}")
    hi = 1
    while theoretical_epsilon(n, hi, delta) > epsilon:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if theoretical_epsilon(n, mid, delta) > epsilon:
            lo = mid
        else:
            hi = mid
    return hi


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _naive_pairs(spec: ExperimentSpec, n: int, u: UtilityFunction):
    """(kappa, epsilon, m or None) for the whole grid."""
    out = []
    for kappa in spec.captimes:
        for eps in spec.epsilons:
            try:
                m = naive_sample_count(n, spec.delta, eps, u.at(kappa))
            except InfeasibleInputsError:
                m = None
            out.append((kappa, eps, m))
    return out


def _captime_trial(spec: ExperimentSpec, trial: int) -> list[dict]:
    src = spec.source(trial)
    u = spec.utility_function()
    rows = []
    for kappa, eps, m in _naive_pairs(spec, src.n_algorithms, u):
        row = {"kappa": kappa, "epsilon": eps, "seed": spec.seed + trial, "feasible": m is not None,
               "m": m, "total_time": None, "winner": None}
        if m is not None and (src.n_instances is None or m <= src.n_instances):
            res = run_naive(src, u, eps, spec.delta, kappa)
            row.update(total_time=res.total_time, winner=res.winner)
        elif m is not None:
            row["feasible"] = False
        rows.append(row)
    return rows


def sweep_captime(spec: ExperimentSpec) -> Report:
    """Total Naive configuration time for every (captime, epsilon) pair.

    Pairs with ``u(kappa) >= epsilon`` (or needing more instances than a
    runtime matrix has) are kept as rows with ``feasible`` false and no time.
    """
    u = spec.utility_function()
    n = spec.source(0).n_algorithms
    if all(m is None for _, _, m in _naive_pairs(spec, n, u)):
        raise InfeasibleInputsError("no captime in the grid has utility below any epsilon")
    rows = [r for part in _fan_out(_captime_trial, spec, range(spec.trials)) for r in part]
    rows.sort(key=lambda r: (r["kappa"], r["epsilon"], r["seed"]))
    return Report("captime", rows, spec.to_dict())


def _first_at_or_below(trace: Sequence[float], level: float) -> int | None:
    for k, v in enumerate(trace):
        if v <= level:
            return k
    return None


def _anytime_rows(res, kind: str, eps_grid, seed: int, trace: Sequence[float], needed: dict | None) -> list[dict]:
    rows = []
    for eps in eps_grid:
        if needed is not None:
            k = needed[eps] - 1 if needed[eps] <= res.rounds else None
        else:
            k = _first_at_or_below(trace, eps)
        if k is not None:
            time, rounds, reached = res.time_trace[k], k + 1, True
        elif res.termination == "single-survivor":
            time, rounds, reached = res.total_time, res.rounds, True
        else:
            time, rounds, reached = None, res.rounds, False
        rows.append({"procedure": kind, "kappa": None, "epsilon": eps, "seed": seed,
                     "total_time": time, "rounds": rounds, "reached": reached})
    return rows


def _epsilon_trial(spec: ExperimentSpec, trial: int) -> list[dict]:
    src = spec.source(trial)
    u = spec.utility_function()
    n = src.n_algorithms
    seed = spec.seed + trial
    rows: list[dict] = []
    for proc in spec.procedures:
        if proc == "naive":
            for kappa, eps, m in _naive_pairs(spec, n, u):
                row = {"procedure": "naive", "kappa": kappa, "epsilon": eps, "seed": seed,
                       "total_time": None, "rounds": m, "reached": False}
                if m is not None and (src.n_instances is None or m <= src.n_instances):
                    row.update(total_time=run_naive(src, u, eps, spec.delta, kappa).total_time, reached=True)
                rows.append(row)
        elif proc == "up":
            needed = {eps: theoretical_rounds(n, eps, spec.delta) for eps in spec.epsilons}
            limit = min(spec.max_m, max(needed.values()))
            res = run_up(src, u, spec.delta, max_m=limit, budget=spec.budget, trace=True)
            rows += _anytime_rows(res, "up", spec.epsilons, seed, res.epsilon_trace, needed)
            rows += _anytime_rows(res, "up_empirical", spec.epsilons, seed, res.epsilon_hat, None)
        else:
            res = run_oracle(src, u, spec.delta, max_m=spec.max_m, budget=spec.budget,
                             free_oracle=spec.free_oracle, trace=True)
            rows += _anytime_rows(res, "oracle", spec.epsilons, seed, res.epsilon_trace, None)
    return rows


def _row_key(r):
    kappa = -1.0 if r["kappa"] is None else r["kappa"]
    return (r["procedure"], kappa, r["epsilon"], r["seed"])


def sweep_epsilon(spec: ExperimentSpec) -> Report:
    """Total configuration time needed to reach each epsilon, per procedure.

    Naive runs once per (captime, epsilon). UP is run once per trial and read
    at the first round whose guaranteed accuracy ``theoretical_epsilon``
    reaches epsilon (or at termination if it found a single survivor
    sooner); ``up_empirical`` rows read the same run at the first round
    whose certified accuracy does. The oracle is read at the first round
    where ``2 alpha_m`` reaches epsilon. Rows that never got there have
    ``reached`` false and no time.
    """
    rows = [r for part in _fan_out(_epsilon_trial, spec, range(spec.trials)) for r in part]
    rows.sort(key=_row_key)
    return Report("epsilon", rows, spec.to_dict())


def sweep_delta(spec: ExperimentSpec, deltas: Sequence[float]) -> Report:
    """:func:`sweep_epsilon` repeated for each confidence parameter."""
    rows = []
    for d in _grid(deltas, "delta"):
        sub = ExperimentSpec(**{**asdict(spec), "delta": d})
        rows += [{**r, "delta": d} for r in sweep_epsilon(sub).rows]
    rows.sort(key=lambda r: (r["delta"],) + _row_key(r))
    return Report("delta", rows, spec.to_dict())


def _montecarlo_trial(spec: ExperimentSpec, trial: int) -> list[dict]:
    src = spec.source(trial)
    u = spec.utility_function()
    gaps = _exact_gaps(spec)
    out = []
    for proc in spec.procedures:
        if proc == "naive":
            for kappa in spec.captimes:
                for eps in spec.epsilons:
                    res = run_naive(src, u, eps, spec.delta, kappa)
                    out.append(("naive", kappa, eps, gaps[res.winner] <= eps))
        else:
            if proc == "up":
                res = run_up(src, u, spec.delta, max_m=spec.max_m, budget=spec.budget)
            else:
                res = run_oracle(src, u, spec.delta, max_m=spec.max_m, budget=spec.budget,
                                 free_oracle=spec.free_oracle)
            for eps in spec.epsilons:
                out.append((proc, None, eps, gaps[res.winner] <= eps))
    return out


@lru_cache(maxsize=8)
def _gaps_cache(spec_key) -> tuple[float, ...]:
    synthetic, utility = spec_key
    spec = ExperimentSpec(synthetic=synthetic, utility=utility)
    u = spec.utility_function()
    utils = [d.expected_utility(u) for d in spec.distributions()]
    best = max(utils)
    return tuple(best - x for x in utils)


def _exact_gaps(spec: ExperimentSpec) -> tuple[float, ...]:
    return _gaps_cache((spec.synthetic, spec.utility))


def montecarlo_correctness(spec: ExperimentSpec) -> Report:
    """Fraction of trials whose returned algorithm is epsilon-optimal.

    Optimality is judged with exact expected utilities, so the source must be
    synthetic. Each row gives the success count, rate and a 95% Wilson
    interval for one (procedure, captime, epsilon) cell; UP and the oracle
    have no captime and are judged once per epsilon on a single run.
    """
    if spec.dataset is not None:
        raise InputDomainError("Monte Carlo correctness needs a synthetic source")
    if "naive" in spec.procedures:
        u = spec.utility_function()
        n = len(spec.distributions())
        bad = [(k, e) for k, e, m in _naive_pairs(spec, n, u) if m is None]
        if bad:
            raise InfeasibleInputsError(f"Naive is infeasible for (captime, epsilon) pairs {bad}")
    tally: dict[tuple, int] = {}
    for part in _fan_out(_montecarlo_trial, spec, range(spec.trials)):
        for proc, kappa, eps, ok in part:
            key = (proc, kappa, eps)
            tally[key] = tally.get(key, 0) + int(ok)
    rows = []
    for (proc, kappa, eps), wins in tally.items():
        lo, hi = wilson_interval(wins, spec.trials)
        rows.append({"procedure": proc, "kappa": kappa, "epsilon": eps, "trials": spec.trials,
                     "successes": wins, "rate": wins / spec.trials, "wilson_low": lo, "wilson_high": hi})
    rows.sort(key=_row_key_mc)
    return Report("montecarlo", rows, spec.to_dict())


def _row_key_mc(r):
    return (r["procedure"], -1.0 if r["kappa"] is None else r["kappa"], r["epsilon"])


def mean_by(rows: Sequence[dict], keys: Sequence[str], value: str = "total_time") -> dict[tuple, float]:
    """Average ``value`` over rows sharing ``keys``; rows without a value are skipped."""
    acc: dict[tuple, list[float]] = {}
    for r in rows:
        if r.get(value) is not None:
            acc.setdefault(tuple(r[k] for k in keys), []).append(r[value])
    return {k: float(np.mean(v)) for k, v in sorted(acc.items(), key=lambda kv: repr(kv[0]))}
