"""Runtime utility functions.

A utility function maps a runtime in seconds to a value in ``[0, 1]``. Every
variant here is continuous, non-increasing and starts at ``u(0) = 1``.
"""
from __future__ import annotations

import bisect
import csv
import math
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from .errors import FormatError, InputDomainError

__all__ = [
    "UtilityFunction",
    "LogLaplace",
    "Uniform",
    "PiecewiseTable",
    "parse_utility",
]


def _check_times(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InputDomainError(f"runtime must be finite and non-negative, got {t!r}")
    return arr


class UtilityFunction(ABC):
    """Bounded, non-increasing map from runtime to utility.

    Instances are immutable. Call the object to evaluate it; ``inverse``
    gives the generalized inverse ``inf{t : u(t) <= x}``.
    """

    #: times where the derivative may be discontinuous
    breakpoints: tuple[float, ...] = ()

    def __call__(self, t):
        arr = _check_times(t)
        out = self._eval(arr)
        return float(out) if arr.ndim == 0 else out

    def inverse(self, x: float) -> float:
        """Smallest runtime at which utility has dropped to ``x`` or below.

        Returns ``math.inf`` when the function never reaches ``x``.
        """
        x = float(x)
        if not (0.0 <= x <= 1.0):
            raise InputDomainError(f"utility level must lie in [0, 1], got {x!r}")
        if x >= 1.0:
            return 0.0
        return self._inverse(x)

    def at(self, t: float) -> float:
        """Unchecked scalar evaluation, accepting ``t = inf``."""
        if t == math.inf:
            return self.limit
        return self._scalar(float(t))

    def _scalar(self, t: float) -> float:
        return float(self._eval(np.asarray(t, dtype=float)))

    @property
    def limit(self) -> float:
        """Utility of a run that never finishes."""
        return 0.0

    @abstractmethod
    def _eval(self, t: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _inverse(self, x: float) -> float: ...

    @abstractmethod
    def slope(self, t):
        """Negated derivative ``-u'(t)``, vectorized; non-negative."""

    @abstractmethod
    def to_spec(self) -> str:
        """Round-trippable spec string, see :func:`parse_utility`."""


class LogLaplace(UtilityFunction):
    """Log-Laplace utility with scale ``t0`` and shape ``sigma``.

    ``u(t) = 1 - (t/t0)**(1/sigma) / 2`` up to ``t0`` and
    ``(t0/t)**(1/sigma) / 2`` beyond it, i.e. the survival function of a
    log-Laplace distribution with median ``t0``. With ``sigma = 1`` this is
    the familiar ``1 - t/(2 t0)`` / ``t0/(2t)`` pair.
    """

    def __init__(self, t0: float = 60.0, sigma: float = 1.0):
        if not (t0 > 0 and math.isfinite(t0)):
            raise InputDomainError(f"t0 must be positive and finite, got {t0!r}")
        if not (sigma > 0 and math.isfinite(sigma)):
            raise InputDomainError(f"sigma must be positive and finite, got {sigma!r}")
        self.t0 = float(t0)
        self.sigma = float(sigma)
        self.breakpoints = (self.t0,)

    def __repr__(self):
        return f"LogLaplace(t0={self.t0!r}, sigma={self.sigma!r})"

    def __eq__(self, other):
        return isinstance(other, LogLaplace) and (self.t0, self.sigma) == (other.t0, other.sigma)

    def __hash__(self):
        return hash(("loglaplace", self.t0, self.sigma))

    def _eval(self, t):
        t0 = self.t0
        with np.errstate(divide="ignore", over="ignore"):
            if self.sigma == 1.0:
                left = 1.0 - 0.5 * (t / t0)
                right = 0.5 * (t0 / t)
            else:
                k = 1.0 / self.sigma
                left = 1.0 - 0.5 * (t / t0) ** k
                right = 0.5 * (t0 / t) ** k
        return np.where(t <= t0, left, right)

    def _scalar(self, t):
        if self.sigma == 1.0:
            return 1.0 - 0.5 * (t / self.t0) if t <= self.t0 else 0.5 * (self.t0 / t)
        k = 1.0 / self.sigma
        return 1.0 - 0.5 * (t / self.t0) ** k if t <= self.t0 else 0.5 * (self.t0 / t) ** k

    def _inverse(self, x):
        if x <= 0.0:
            return math.inf
        if x >= 0.5:
            return self.t0 * (2.0 * (1.0 - x)) ** self.sigma
        return self.t0 * (2.0 * x) ** (-self.sigma)

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        t0, k = self.t0, 1.0 / self.sigma
        with np.errstate(divide="ignore", invalid="ignore"):
            left = 0.5 * k / t0 * (t / t0) ** (k - 1.0)
            right = 0.5 * k / t * (t0 / t) ** k
        return np.where(t <= t0, left, right)

    def to_spec(self):
        return f"loglaplace:{self.t0!r},{self.sigma!r}"


class Uniform(UtilityFunction):
    """Linear decay to zero at horizon ``t0``, zero afterwards."""

    def __init__(self, t0: float = 60.0):
        if not (t0 > 0 and math.isfinite(t0)):
            raise InputDomainError(f"t0 must be positive and finite, got {t0!r}")
        self.t0 = float(t0)
        self.breakpoints = (self.t0,)

    def __repr__(self):
        return f"Uniform(t0={self.t0!r})"

    def __eq__(self, other):
        return isinstance(other, Uniform) and self.t0 == other.t0

    def __hash__(self):
        return hash(("uniform", self.t0))

    def _eval(self, t):
        return np.where(t < self.t0, 1.0 - t / self.t0, 0.0)

    def _scalar(self, t):
        return 1.0 - t / self.t0 if t < self.t0 else 0.0

    def _inverse(self, x):
        return self.t0 * (1.0 - x)

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t0, 1.0 / self.t0, 0.0)

    def to_spec(self):
        return f"uniform:{self.t0!r}"


class PiecewiseTable(UtilityFunction):
    """Linear interpolation through ``(time, utility)`` breakpoints.

    The table must start at ``(0, 1)``, be strictly ascending in time,
    non-increasing in utility and end at utility 0; the function is 0 past
    the last breakpoint.
    """

    def __init__(self, points, source: str | None = None):
        pts = [(float(a), float(b)) for a, b in points]
        if len(pts) < 2:
            raise FormatError("a utility table needs at least two breakpoints")
        times = np.array([p[0] for p in pts])
        utils = np.array([p[1] for p in pts])
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(utils)):
            raise FormatError("utility table entries must be finite")
        if times[0] != 0.0 or utils[0] != 1.0:
            raise FormatError("utility table must start at (0, 1)")
        if np.any(np.diff(times) <= 0):
            raise FormatError("utility table times must be strictly ascending")
        if np.any(np.diff(utils) > 0):
            raise FormatError("utility table values must be non-increasing")
        if utils[-1] != 0.0 or np.any(utils < 0):
            raise FormatError("utility table must end at utility 0")
        self.times = times
        self.utils = utils
        self.source = source
        self.breakpoints = tuple(times[1:].tolist())
        self._tlist = times.tolist()
        self._ulist = utils.tolist()

    @classmethod
    def from_csv(cls, path) -> "PiecewiseTable":
        """Read a two-column ``t,u`` CSV with a header row."""
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["t", "u"]:
            raise FormatError(f"{path}: expected header 't,u'")
        points = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
        return cls(points, source=str(path))

    def __repr__(self):
        return f"PiecewiseTable({len(self.times)} points)"

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseTable)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.utils, other.utils)
        )

    def __hash__(self):
        return hash(("table", self.times.tobytes(), self.utils.tobytes()))

    def _eval(self, t):
        return np.interp(t, self.times, self.utils, right=0.0)

    def _scalar(self, t):
        k = bisect.bisect_right(self._tlist, t)
        if k >= len(self._tlist):
            return 0.0
        t0, t1 = self._tlist[k - 1], self._tlist[k]
        u0, u1 = self._ulist[k - 1], self._ulist[k]
        return u0 + (u1 - u0) * (t - t0) / (t1 - t0)

    def _inverse(self, x):
        k = int(np.argmax(self.utils <= x))
        if k == 0:
            return 0.0
        u0, u1 = self.utils[k - 1], self.utils[k]
        t0, t1 = self.times[k - 1], self.times[k]
        return float(t0 + (u0 - x) / (u0 - u1) * (t1 - t0))

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        seg = -np.diff(self.utils) / np.diff(self.times)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(seg))
        return np.where(inside, seg[np.clip(idx, 0, len(seg) - 1)], 0.0)

    def to_spec(self):
        if self.source is None:
            raise ValueError("table utility has no backing file")
        return f"table:{self.source}"


def parse_utility(spec: str) -> UtilityFunction:
    """Build a utility from ``loglaplace:<t0>,<sigma>``, ``uniform:<t0>`` or ``table:<csv>``."""
    kind, sep, args = spec.partition(":")
    kind = kind.strip().lower()
    if not sep:
        raise FormatError(f"utility spec {spec!r} lacks a ':'")
    try:
        if kind == "loglaplace":
            parts = [float(a) for a in args.split(",")]
            if len(parts) == 1:
                parts.append(1.0)
            if len(parts) != 2:
                raise FormatError(f"loglaplace takes t0,sigma, got {args!r}")
            return LogLaplace(*parts)
        if kind == "uniform":
            return Uniform(float(args))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"bad utility spec {spec!r}: {exc}") from None
    if kind == "table":
        return PiecewiseTable.from_csv(args)
    raise FormatError(f"unknown utility kind {kind!r}")
