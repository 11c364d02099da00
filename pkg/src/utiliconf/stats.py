"""Empirical estimators and Hoeffding-style confidence bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InputDomainError
from .execution import RunRecord
from .utility import UtilityFunction

__all__ = [
    "AlgorithmStats",
    "empirical_stats",
    "hoeffding_radius",
    "oracle_alpha",
    "up_alpha",
    "confidence_bounds",
    "anytime_epsilon",
    "theoretical_epsilon",
    "KahanSum",
]


class KahanSum:
    """Compensated running sum."""

    __slots__ = ("value", "_c")

    def __init__(self, value: float = 0.0):
        self.value = value
        self._c = 0.0

    def add(self, x: float) -> None:
        y = x - self._c
        t = self.value + y
        self._c = (t - self.value) - y
        self.value = t


@dataclass
class AlgorithmStats:
    """State of one algorithm after ``m`` runs at cap ``kappa``."""

    algorithm: int
    m: int
    kappa: float
    u_hat: float
    f_hat: float
    alpha: float = math.nan
    ucb: float = math.nan
    lcb: float = math.nan

    @property
    def completed(self) -> int:
        """Number of completed runs, ``f_hat * m``."""
        return round(self.f_hat * self.m)


def empirical_stats(records: Sequence[RunRecord], u: UtilityFunction) -> tuple[float, float]:
    """Capped mean utility and completion fraction of runs sharing one cap."""
    if not records:
        raise InputDomainError("need at least one run record")
    cap = records[0].cap
    algo = records[0].algorithm
    for r in records:
        if r.cap != cap or r.algorithm != algo:
            raise InputDomainError("records must share one algorithm and one captime")
    m = len(records)
    u_hat = math.fsum(u.at(min(r.observed, cap)) for r in records) / m
    f_hat = sum(1 for r in records if r.observed < cap) / m
    return u_hat, f_hat


def hoeffding_radius(m: int, delta: float) -> float:
    """``sqrt(ln(1/delta) / 2m)``: two-sided Hoeffding radius for ``[0, 1]`` samples."""
    if m < 1:
        raise InputDomainError(f"need m >= 1, got {m!r}")
    if not 0.0 < delta <= 1.0:
        raise InputDomainError(f"delta must lie in (0, 1], got {delta!r}")
    return math.sqrt(math.log(1.0 / delta) / (2.0 * m))


def oracle_alpha(n: int, m: int, delta: float) -> float:
    """Successive-elimination radius ``sqrt(ln(4 n m^2 / delta) / 2m)``."""
    if n < 1 or m < 1 or not 0.0 < delta < 1.0:
        raise InputDomainError(f"invalid arguments n={n!r} m={m!r} delta={delta!r}")
    return math.sqrt(math.log(4.0 * n * m * m / delta) / (2.0 * m))


def up_alpha(n: int, m: int, kappa: float, delta: float) -> float:
    """UP radius ``sqrt(ln(11 n m^2 (log2 kappa + 1)^2 / delta) / 2m)``.

    ``log2 kappa`` counts how often a cap starting at 1 has been doubled.
    """
    if n < 1 or m < 1 or not kappa >= 1.0 or not 0.0 < delta < 1.0:
        raise InputDomainError(f"invalid arguments n={n!r} m={m!r} kappa={kappa!r} delta={delta!r}")
    d = math.log2(kappa) + 1.0
    return math.sqrt(math.log(11.0 * n * m * m * d * d / delta) / (2.0 * m))


def confidence_bounds(stats: AlgorithmStats, u: UtilityFunction) -> tuple[float, float]:
    """``(UCB, LCB)`` for ``stats`` using its radius ``stats.alpha``.

    UCB widens by ``(1 - u(kappa)) alpha``; LCB subtracts ``alpha`` and the
    estimated capping penalty ``u(kappa)(1 - F_hat)``. Neither is clamped.
    """
    uk = u.at(stats.kappa)
    ucb = stats.u_hat + (1.0 - uk) * stats.alpha
    lcb = stats.u_hat - stats.alpha - uk * (1.0 - stats.f_hat)
    return ucb, lcb


def anytime_epsilon(stats: Iterable[AlgorithmStats], i_star: int) -> float:
    """Certified suboptimality of ``i_star``: ``max(0, max_{i != i_star} UCB_i - LCB_{i_star})``."""
    stats = list(stats)
    lcb_star = next(s.lcb for s in stats if s.algorithm == i_star)
    gap = max((s.ucb - lcb_star for s in stats if s.algorithm != i_star), default=0.0)
    return max(0.0, gap)


def theoretical_epsilon(n: int, m: int, delta: float) -> float:
    """Accuracy UP guarantees after ``m`` rounds: ``3 sqrt(ln(11 n m^4 / delta) / 2m)``."""
    if n < 1 or m < 1 or not 0.0 < delta < 1.0:
        raise InputDomainError(f"invalid arguments n={n!r} m={m!r} delta={delta!r}")
    return 3.0 * math.sqrt(math.log(11.0 * n * float(m) ** 4 / delta) / (2.0 * m))
