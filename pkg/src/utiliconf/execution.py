"""Capped runs, the per-algorithm run cache, and simulated cost accounting.

Nothing here executes a real solver. A :class:`RunSource` knows the true
runtime ``t_ij`` of algorithm ``i`` on instance ``j`` and reveals only
``min(t_ij, cap)``; every revealed second is charged to a
:class:`CostLedger`, which is what "total configuration time" measures.
"""
from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import RuntimeDistribution
from .errors import ExhaustedStreamError, FormatError, InputDomainError

__all__ = [
    "RunRecord",
    "CostLedger",
    "RunSource",
    "MatrixSource",
    "SyntheticSource",
    "RunCache",
    "capped_run",
    "sync_runs",
    "load_runtime_matrix",
    "stream_seed",
]

_BLOCK = 4096


def stream_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """Independent, reproducible seed sequence for ``(seed, *key)``."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


@dataclass(frozen=True)
class RunRecord:
    algorithm: int
    instance: int
    cap: float
    observed: float
    completed: bool


class CostLedger:
    """Simulated seconds charged per algorithm.

    Charges are kept individually so totals are exact (``math.fsum``) and
    independent of summation order. ``running_total`` is the cheap
    approximate sum used for budget checks.
    """

    def __init__(self, n_algorithms: int, journal: bool = False):
        self.n_algorithms = n_algorithms
        self._charges: list[list] = [[] for _ in range(n_algorithms)]
        self.running_total = 0.0
        self.journal: list[RunRecord] | None = [] if journal else None

    def charge(self, i: int, seconds: float, instance: int = -1, cap: float = math.nan) -> None:
        self._charges[i].append(seconds)
        self.running_total += seconds
        if self.journal is not None:
            self.journal.append(RunRecord(i, instance, cap, seconds, seconds < cap))

    def charge_many(self, i: int, seconds: np.ndarray, instances=None, cap: float = math.nan) -> None:
        if len(seconds) == 0:
            return
        self._charges[i].append(np.asarray(seconds, dtype=float).copy())
        self.running_total += float(np.sum(seconds))
        if self.journal is not None:
            idx = range(len(seconds)) if instances is None else instances
            for j, s in zip(idx, np.asarray(seconds).tolist()):
                self.journal.append(RunRecord(i, int(j), cap, s, s < cap))

    def _flat(self, i):
        for c in self._charges[i]:
            if isinstance(c, np.ndarray):
                yield from c.tolist()
            else:
                yield c

    def algorithm_total(self, i: int) -> float:
        return math.fsum(self._flat(i))

    @property
    def per_algorithm(self) -> list[float]:
        return [self.algorithm_total(i) for i in range(self.n_algorithms)]

    @property
    def total(self) -> float:
        return math.fsum(x for i in range(self.n_algorithms) for x in self._flat(i))


class RunSource(ABC):
    """Oracle for true runtimes of ``n_algorithms`` algorithms on an instance stream."""

    names: list[str]

    @property
    def n_algorithms(self) -> int:
        return len(self.names)

    #: number of instances, ``None`` for an endless stream
    n_instances: int | None = None

    @abstractmethod
    def runtimes(self, i: int, instances) -> np.ndarray:
        """True runtimes of algorithm ``i`` on the given instance indices."""

    @abstractmethod
    def runtime(self, i: int, j: int) -> float:
        """True runtime of algorithm ``i`` on instance ``j``."""


class MatrixSource(RunSource):
    """Runtimes looked up in an ``algorithms x instances`` table.

    Instances are visited in a seeded permutation, fixed per ``(seed, trial)``.
    """

    def __init__(self, matrix, names=None, instance_ids=None, seed: int = 0, trial: int = 0):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[1] == 0:
            raise FormatError("runtime matrix must be 2-D with at least one instance")
        if not np.all(np.isfinite(mat)) or np.any(mat <= 0):
            raise FormatError("runtimes must be finite and strictly positive")
        self.matrix = mat
        self.names = list(names) if names is not None else [f"algo_{i}" for i in range(mat.shape[0])]
        if len(self.names) != mat.shape[0]:
            raise FormatError("one name per algorithm row is required")
        self.instance_ids = list(instance_ids) if instance_ids is not None else list(range(mat.shape[1]))
        self.n_instances = mat.shape[1]
        self.seed = seed
        self.trial = trial
        rng = np.random.Generator(np.random.PCG64(stream_seed(seed, 0, trial)))
        self.order = rng.permutation(self.n_instances)
        self._rows = mat[:, self.order].copy()

    def with_trial(self, seed: int, trial: int) -> "MatrixSource":
        return MatrixSource(self.matrix, self.names, self.instance_ids, seed=seed, trial=trial)

    def _check(self, j):
        if j >= self.n_instances:
            raise ExhaustedStreamError(f"instance {j} requested but the matrix has {self.n_instances}")

    def runtime(self, i, j):
        self._check(j)
        return float(self._rows[i, j])

    def runtimes(self, i, instances):
        idx = np.asarray(instances, dtype=np.intp)
        if idx.size:
            self._check(int(idx.max()))
        return self._rows[i, idx]

    def row(self, i: int, m: int) -> np.ndarray:
        """First ``m`` runtimes of algorithm ``i`` in stream order."""
        self._check(m - 1)
        return self._rows[i, :m]


class SyntheticSource(RunSource):
    """Runtimes drawn from analytic distributions.

    Algorithm ``i`` owns one random stream per ``(seed, trial, i)``; its
    ``j``-th draw is the runtime on instance ``j``, so re-running an
    instance always reproduces the same runtime.
    """

    def __init__(self, dists: list[RuntimeDistribution], names=None, seed: int = 0, trial: int = 0):
        self.dists = list(dists)
        self.names = list(names) if names is not None else [f"algo_{i}" for i in range(len(self.dists))]
        self.seed = seed
        self.trial = trial
        self._rngs = [np.random.Generator(np.random.PCG64(stream_seed(seed, 1, trial, i))) for i in range(len(self.dists))]
        self._bufs = [np.empty(0) for _ in self.dists]

    def with_trial(self, seed: int, trial: int) -> "SyntheticSource":
        return SyntheticSource(self.dists, self.names, seed=seed, trial=trial)

    def _extend(self, i, length):
        buf = self._bufs[i]
        need = length - len(buf)
        if need <= 0:
            return buf
        blocks = -(-need // _BLOCK)
        fresh = [np.atleast_1d(self.dists[i].sample(self._rngs[i], _BLOCK)) for _ in range(blocks)]
        buf = np.concatenate([buf, *fresh])
        self._bufs[i] = buf
        return buf

    def runtime(self, i, j):
        buf = self._bufs[i]
        if j >= len(buf):
            buf = self._extend(i, j + 1)
        return float(buf[j])

    def runtimes(self, i, instances):
        idx = np.asarray(instances, dtype=np.intp)
        if idx.size:
            self._extend(i, int(idx.max()) + 1)
        return self._bufs[i][idx]

    def row(self, i: int, m: int) -> np.ndarray:
        return self._extend(i, m)[:m]


def capped_run(src: RunSource, i: int, j: int, cap: float, ledger: CostLedger) -> RunRecord:
    """Run algorithm ``i`` on instance ``j`` with captime ``cap``."""
    if not cap > 0:
        raise InputDomainError(f"captime must be positive, got {cap!r}")
    t = src.runtime(i, j)
    done = t < cap
    observed = t if done else cap
    ledger.charge(i, observed, j, cap)
    return RunRecord(i, j, cap, observed, done)


class RunCache:
    """Everything observed for one algorithm on instances ``0..count-1``.

    After every :meth:`sync` all records share the cap ``cap``. Completed
    runs are kept as is; capped runs are re-executed from scratch, and
    fully recharged, whenever the cap grows.
    """

    def __init__(self, src: RunSource, i: int):
        self.src = src
        self.i = i
        self.count = 0
        self.cap = 0.0
        self._obs = np.empty(256)
        self._done = np.zeros(256, dtype=bool)

    @property
    def observed(self) -> np.ndarray:
        return self._obs[: self.count]

    @property
    def completed(self) -> np.ndarray:
        return self._done[: self.count]

    def records(self, m: int | None = None) -> list[RunRecord]:
        m = self.count if m is None else m
        return [
            RunRecord(self.i, j, self.cap, float(self._obs[j]), bool(self._done[j])) for j in range(m)
        ]

    def _grow(self, size):
        if size > len(self._obs):
            new = max(size, 2 * len(self._obs))
            obs = np.empty(new)
            obs[: self.count] = self._obs[: self.count]
            done = np.zeros(new, dtype=bool)
            done[: self.count] = self._done[: self.count]
            self._obs, self._done = obs, done

    def raise_cap(self, cap: float, ledger: CostLedger) -> bool:
        """Re-run capped records at the larger ``cap``; True if anything was re-run."""
        if cap < self.cap:
            raise InputDomainError(f"captime may not shrink ({self.cap} -> {cap})")
        old = self.cap
        self.cap = cap
        if cap == old or self.count == 0:
            return False
        redo = np.flatnonzero(~self._done[: self.count])
        if redo.size == 0:
            return False
        t = self.src.runtimes(self.i, redo)
        done = t < cap
        obs = np.where(done, t, cap)
        self._obs[redo] = obs
        self._done[redo] = done
        ledger.charge_many(self.i, obs, redo, cap)
        return True

    def extend(self, m: int, ledger: CostLedger) -> None:
        """Run the instances ``count..m-1`` once at the current cap."""
        if m <= self.count:
            return
        self._grow(m)
        cap = self.cap
        for j in range(self.count, m):
            rec = capped_run(self.src, self.i, j, cap, ledger)
            self._obs[j] = rec.observed
            self._done[j] = rec.completed
        self.count = m

    def run_next(self, ledger: CostLedger) -> tuple[float, bool]:
        """Run the next unseen instance at the current cap."""
        j = self.count
        if j >= len(self._obs):
            self._grow(j + 1)
        t = self.src.runtime(self.i, j)
        cap = self.cap
        done = t < cap
        obs = t if done else cap
        self._obs[j] = obs
        self._done[j] = done
        self.count = j + 1
        ledger.charge(self.i, obs, j, cap)
        return obs, done

    def sync(self, m: int, cap: float, ledger: CostLedger) -> bool:
        """Bring instances ``0..m-1`` to captime ``cap``; True if old records were re-run."""
        if m < self.count:
            raise InputDomainError(f"cannot shrink a run cache from {self.count} to {m} instances")
        if not cap > 0:
            raise InputDomainError(f"captime must be positive, got {cap!r}")
        rerun = self.raise_cap(cap, ledger)
        self.extend(m, ledger)
        return rerun


def sync_runs(src: RunSource, i: int, m: int, cap: float, cache: RunCache, ledger: CostLedger) -> list[RunRecord]:
    """Records of algorithm ``i`` on instances ``0..m-1``, all at captime ``cap``."""
    if cache.src is not src or cache.i != i:
        raise InputDomainError("cache belongs to a different source or algorithm")
    cache.sync(m, cap, ledger)
    return cache.records(m)


def load_runtime_matrix(path, seed: int = 0, trial: int = 0) -> MatrixSource:
    """Read ``instance,<algo_1>,...,<algo_n>`` CSV into a :class:`MatrixSource`."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 ({exc})") from None
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2 or header[0] != "instance":
        raise FormatError(f"{path}: header must be 'instance,<algo_1>,...'")
    names = header[1:]
    ids, cols = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
        values = []
        for col, cell in zip(header[1:], row[1:]):
            cell = cell.strip()
            if not cell:
                raise FormatError(f"{path}: row {lineno}, column {col!r}: missing value")
            try:
                v = float(cell)
            except ValueError:
                raise FormatError(f"{path}: row {lineno}, column {col!r}: not a number: {cell!r}") from None
            if not (math.isfinite(v) and v > 0):
                raise FormatError(f"{path}: row {lineno}, column {col!r}: runtime must be positive, got {cell!r}")
            values.append(v)
        ids.append(row[0].strip())
        cols.append(values)
    if not cols:
        raise FormatError(f"{path}: no instance rows")
    return MatrixSource(np.array(cols).T, names, ids, seed=seed, trial=trial)
