"""Captime verification: can a skeptic be convinced from truncated CDFs?

A prover discloses each algorithm's runtime CDF up to a captime
``kappa_i``. From that alone the skeptic can only bracket the expected
utility between ``LB_i`` (runs finishing by the cap) and ``UB_i`` (as if
every unfinished run ended exactly at the cap). This module computes those
brackets, the skeptic's check, captimes that always pass it, and the
counterexample distributions showing when no check can pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .distributions import Discrete, RuntimeDistribution, TruncatedExtension
from .errors import InputDomainError, NoCounterexampleError
from .utility import UtilityFunction

__all__ = [
    "TruncatedView",
    "Verdict",
    "VerificationResult",
    "truncated_bounds",
    "skeptic_check",
    "sufficient_captimes",
    "adversarial_extension",
    "necessity_extension",
    "run_verification",
    "CONTINUOUS_PAD",
]

#: slack added to comparisons that involve quadrature
CONTINUOUS_PAD = 1e-7


def _is_exact(d: RuntimeDistribution) -> bool:
    if isinstance(d, Discrete):
        return True
    if isinstance(d, TruncatedExtension):
        return _is_exact(d.base)
    return False


@dataclass(frozen=True)
class TruncatedView:
    """What the skeptic knows about one algorithm."""

    algorithm: int
    kappa: float
    lb: float
    ub: float
    survival: float
    exact: bool = True

    @property
    def tail(self) -> float:
        return self.ub - self.lb


@dataclass(frozen=True)
class Verdict:
    """Skeptic's decision; ``winner`` is the argmax-LB candidate either way."""

    certified: bool
    winner: int
    violators: tuple[int, ...] = ()


def truncated_bounds(d: RuntimeDistribution, u: UtilityFunction, kappa: float, algorithm: int = 0) -> TruncatedView:
    """``LB = int_[0,kappa] u dF`` and ``UB = LB + u(kappa)(1 - F(kappa))``."""
    if not kappa >= 0:
        raise InputDomainError(f"captime must be non-negative, got {kappa!r}")
    if kappa == math.inf:
        total = d.expected_utility(u)
        return TruncatedView(algorithm, kappa, total, total, 0.0, _is_exact(d))
    survival = float(d.sf(kappa))
    lb = d.lower_integral(u, kappa) if kappa > 0 else 0.0
    ub = lb + u.at(kappa) * survival
    return TruncatedView(algorithm, float(kappa), lb, ub, survival, _is_exact(d))


def skeptic_check(views: Sequence[TruncatedView], epsilon: float, pad: float | None = None) -> Verdict:
    """Pass iff ``LB_{i*} >= UB_i - epsilon`` for every ``i``, with ``i* = argmax LB``.

    ``pad`` loosens the comparison; by default it is :data:`CONTINUOUS_PAD`
    when any bound came from quadrature and 0 otherwise.
    """
    if not views:
        raise InputDomainError("need at least one view")
    if pad is None:
        pad = 0.0 if all(v.exact for v in views) else CONTINUOUS_PAD
    star = views[0]
    for v in views[1:]:
        if v.lb > star.lb:
            star = v
    bad = tuple(v.algorithm for v in views if v.algorithm != star.algorithm and star.lb < v.ub - epsilon - pad)
    return Verdict(not bad, star.algorithm, bad)


def _captime_for(d: RuntimeDistribution, u: UtilityFunction, level: float) -> float:
    k = d.tail_infimum(u, level)
    # guard against the last ulp of u(kappa) * S(kappa) landing above level
    for _ in range(64):
        if k == math.inf or d.tail_term(u, k) <= level:
            return k
        k = math.nextafter(k, math.inf)
    return k


def sufficient_captimes(dists: Sequence[RuntimeDistribution], u: UtilityFunction, epsilon: float) -> list[float]:
    """Smallest ``kappa_i`` with ``u(kappa_i)(1 - F_i(kappa_i)) <= Delta_i + epsilon/2``.

    ``Delta_i`` is the exact gap to the best expected utility. Captimes
    chosen this way always convince the skeptic.
    """
    if not epsilon > 0:
        raise InputDomainError(f"epsilon must be positive, got {epsilon!r}")
    utils = [d.expected_utility(u) for d in dists]
    best = max(utils)
    return [_captime_for(d, u, (best - ui) + epsilon / 2.0) for d, ui in zip(dists, utils)]


def _extension_atom(u, kappa, survival, target):
    """Utility level ``target`` for the hidden mass, realized as an atom time."""
    if target <= 0.0:
        t = max(2.0 * kappa, u.inverse(0.0))
        if t == math.inf:
            t = max(2.0 * kappa, u.inverse(1e-300))
        return t
    return u.inverse(min(target, 1.0))


def adversarial_extension(
    d_i: RuntimeDistribution,
    view_i: TruncatedView,
    d_star: RuntimeDistribution,
    view_star: TruncatedView,
    u: UtilityFunction,
    epsilon: float,
    half_gap_eta: bool = False,
) -> tuple[TruncatedExtension, TruncatedExtension]:
    """Complete two truncated CDFs so that the recommended ``i*`` loses to ``i``.

    Requires ``LB_{i*} < UB_i - epsilon``. The hidden mass of ``i`` is put
    at ``A`` with ``u(A)(1 - F_i) >= tail_i - eta`` and that of ``i*`` at
    ``B`` with ``u(B)(1 - F_{i*}) <= eta``. The default
    ``eta = (UB_i - LB_{i*} - epsilon) / 4`` leaves ``U_i - U_{i*} > epsilon``;
    ``half_gap_eta`` uses ``eta = alpha / 4`` with
    ``alpha = 2 (UB_i - LB_{i*})``, which only guarantees ``U_i >= U_{i*}``.
    The resulting utilities are re-checked before returning.
    """
    gap = view_i.ub - view_star.lb
    if not gap > epsilon:
        raise NoCounterexampleError(
            f"LB_i*={view_star.lb!r} >= UB_i - epsilon={view_i.ub - epsilon!r}: the check passes"
        )
    if half_gap_eta:
        eta = 2.0 * gap / 4.0
    else:
        eta = (gap - epsilon) / 4.0

    k_i, s_i = view_i.kappa, view_i.survival
    if view_i.tail <= eta:
        a = 2.0 * k_i if k_i > 0 else 1.0
    else:
        a = _extension_atom(u, k_i, s_i, u.at(k_i) - eta / s_i)
    k_s, s_s = view_star.kappa, view_star.survival
    if view_star.tail <= eta:
        b = 2.0 * k_s if k_s > 0 else 1.0
    else:
        b = _extension_atom(u, k_s, s_s, eta / s_s)
    ext_i = TruncatedExtension(d_i, k_i, max(a, k_i))
    ext_s = TruncatedExtension(d_star, k_s, max(b, k_s))

    u_i = ext_i.expected_utility(u)
    u_s = ext_s.expected_utility(u)
    pad = 1e-12 if (view_i.exact and view_star.exact) else CONTINUOUS_PAD
    ok = (u_i >= u_s - pad) if half_gap_eta else (u_i - u_s > epsilon - pad)
    if not ok:
        raise ArithmeticError(f"witness failed re-check: U_i={u_i!r}, U_i*={u_s!r}, epsilon={epsilon!r}")
    return ext_i, ext_s


def necessity_extension(
    d: RuntimeDistribution, u: UtilityFunction, kappa: float, gap: float, epsilon: float
) -> TruncatedExtension:
    """Hide the mass of ``d`` past ``kappa`` so a cap this small cannot convince anyone.

    Needs ``u(kappa)(1 - F(kappa)) > gap + epsilon``; the atom sits at
    ``u^-1((u(kappa) - (gap + epsilon)/(1 - F(kappa))) / 2)``.
    """
    s = float(d.sf(kappa))
    uk = u.at(kappa)
    if not uk * s > gap + epsilon:
        raise NoCounterexampleError("tail term already within gap + epsilon")
    a = _extension_atom(u, kappa, s, 0.5 * (uk - (gap + epsilon) / s))
    return TruncatedExtension(d, kappa, max(a, kappa))


@dataclass
class VerificationResult:
    utilities: list[float]
    optimal: int
    gaps: list[float]
    kappas: list[float]
    views: list[TruncatedView]
    verdict: Verdict

    @property
    def certified(self) -> bool:
        return self.verdict.certified

    @property
    def winner(self) -> int | None:
        return self.verdict.winner if self.verdict.certified else None


def run_verification(
    dists: Sequence[RuntimeDistribution],
    u: UtilityFunction,
    epsilon: float,
    kappas: Sequence[float] | None = None,
) -> VerificationResult:
    """Prover picks captimes (sufficient ones unless ``kappas`` is given), skeptic checks."""
    if not dists:
        raise InputDomainError("need at least one distribution")
    utils = [d.expected_utility(u) for d in dists]
    best = max(utils)
    opt = utils.index(best)
    gaps = [best - x for x in utils]
    if kappas is None:
        kappas = sufficient_captimes(dists, u, epsilon)
    views = [truncated_bounds(d, u, k, i) for i, (d, k) in enumerate(zip(dists, kappas))]
    return VerificationResult(utils, opt, gaps, list(kappas), views, skeptic_check(views, epsilon))
