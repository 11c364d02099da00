"""Runtime distributions with exact CDFs and expected utilities.

Each distribution answers ``cdf``/``sf``/``quantile`` queries, draws
samples by inverse transform, and evaluates the capped expected utility
``E[u(min(T, kappa))]``. Discrete distributions are summed exactly; the
continuous families integrate ``1 - int_0^kappa -u'(t) P(T > t) dt`` with
adaptive quadrature, which sidesteps densities and handles heavy tails.
"""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .errors import FormatError, InputDomainError, QuadratureError
from .utility import UtilityFunction

__all__ = [
    "RuntimeDistribution",
    "Discrete",
    "LogNormal",
    "Pareto",
    "Mixture",
    "TruncatedExtension",
    "distribution_from_dict",
    "load_synthetic_spec",
    "dump_synthetic_spec",
]

QUAD_EPSREL = 1e-11
QUAD_EPSABS = 1e-14


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class RuntimeDistribution(ABC):
    """Distribution of one algorithm's runtime, in seconds."""

    @abstractmethod
    def cdf(self, t):
        """``P(T <= t)``, vectorized."""

    def sf(self, t):
        """``P(T > t)``, vectorized."""
        return 1.0 - np.asarray(self.cdf(t))

    @abstractmethod
    def quantile(self, p):
        """``inf{t : F(t) >= p}``, vectorized."""

    def sample(self, rng: np.random.Generator, size=None):
        """Draw runtimes by inverse transform from ``rng``."""
        return self.quantile(rng.random(size))

    @abstractmethod
    def expected_utility(self, u: UtilityFunction, kappa: float = math.inf) -> float:
        """Capped expected utility ``E[u(min(T, kappa))]``; uncapped when ``kappa`` is inf."""

    def tail_term(self, u: UtilityFunction, kappa: float) -> float:
        """Capping error ``u(kappa) * (1 - F(kappa))``."""
        if kappa == math.inf:
            return 0.0
        if not kappa >= 0:
            raise InputDomainError(f"captime must be non-negative, got {kappa!r}")
        return u.at(kappa) * float(self.sf(kappa))

    def lower_integral(self, u: UtilityFunction, kappa: float) -> float:
        """``int_[0, kappa] u dF``: utility from runs finishing by ``kappa``."""
        return self.expected_utility(u, kappa) - self.tail_term(u, kappa)

    def tail_infimum(self, u: UtilityFunction, level: float, strict: bool = False, tol: float = 1e-9) -> float:
        """Smallest captime whose tail term is ``<= level`` (``< level`` if strict).

        The tail term is non-increasing and right-continuous, so bisection
        converges to the infimum; the returned value always satisfies the
        inequality and lies within ``tol`` (relative above 1 s) of it.
        """
        def ok(k):
            tail = self.tail_term(u, k)
            return tail < level if strict else tail <= level

        if ok(0.0):
            return 0.0
        hi = 1.0
        while not ok(hi):
            hi *= 2.0
            if hi > 1e300:
                return math.inf
        lo = 0.0 if hi == 1.0 else hi / 2.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def quadrature_points(self) -> tuple[float, ...]:
        """Times worth splitting an integral at."""
        return ()

    @abstractmethod
    def to_dict(self) -> dict: ...

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def _integrate_survival(dist: RuntimeDistribution, u: UtilityFunction, kappa: float) -> float:
    """``E[u(min(T, kappa))]`` as ``1 - int_0^kappa -u'(t) P(T > t) dt``."""
    cuts = {0.0}
    for b in (*u.breakpoints, *dist.quadrature_points()):
        if 0.0 < b < kappa:
            cuts.add(float(b))
    edges = sorted(cuts)
    edges.append(kappa)

    def integrand(t):
        return float(u.slope(t)) * float(dist.sf(t))

    def log_integrand(s):
        t = math.exp(s)
        return integrand(t) * t

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        if math.isinf(b):
            args = (integrand, a, b)
        elif a > 0.0 and b / a > 16.0:
            args = (log_integrand, math.log(a), math.log(b))
        else:
            args = (integrand, a, b)
        res = integrate.quad(*args, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=500, full_output=1)
        if len(res) > 3:
            raise QuadratureError(
                f"quadrature of {dist!r} under {u!r} on [{a}, {b}] did not converge: "
                f"value={res[0]!r} abserr={res[1]!r}: {res[3]}"
            )
        total += res[0]
    return 1.0 - total


class Discrete(RuntimeDistribution):
    """Finitely many atoms ``(time, probability)``."""

    def __init__(self, atoms):
        atoms = [(float(t), float(p)) for t, p in atoms]
        if not atoms:
            raise InputDomainError("a discrete distribution needs at least one atom")
        times = np.array([a[0] for a in atoms])
        probs = np.array([a[1] for a in atoms])
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            raise InputDomainError("atom times must be finite and strictly positive")
        if np.any(np.diff(times) <= 0):
            raise InputDomainError("atom times must be strictly ascending")
        if np.any(probs < 0) or abs(math.fsum(probs) - 1.0) > 1e-12:
            raise InputDomainError(f"atom probabilities must be non-negative and sum to 1, got {math.fsum(probs)!r}")
        self.times = times
        self.probs = probs
        self._cum = np.cumsum(probs)
        # P(T > t_k) summed from the right keeps small tails accurate
        self._surv = np.concatenate([np.cumsum(probs[::-1])[::-1][1:], [0.0]])

    def __repr__(self):
        return f"Discrete({list(zip(self.times.tolist(), self.probs.tolist()))})"

    @property
    def atoms(self):
        return list(zip(self.times.tolist(), self.probs.tolist()))

    def cdf(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t_arr, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return _scalar_or_array(np.minimum(out, 1.0), t)

    def sf(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t_arr, side="right")
        out = np.where(idx > 0, self._surv[np.maximum(idx - 1, 0)], 1.0)
        return _scalar_or_array(out, t)

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise InputDomainError("probability must lie in [0, 1]")
        idx = np.searchsorted(self._cum, p_arr, side="left")
        out = self.times[np.minimum(idx, len(self.times) - 1)]
        return _scalar_or_array(out, p)

    def expected_utility(self, u, kappa=math.inf):
        if not kappa > 0:
            raise InputDomainError(f"captime must be positive, got {kappa!r}")
        capped = np.minimum(self.times, kappa)
        return math.fsum(self.probs * u._eval(capped))

    def lower_integral(self, u, kappa):
        mask = self.times <= kappa
        return math.fsum(self.probs[mask] * u._eval(self.times[mask]))

    def tail_infimum(self, u, level, strict=False, tol=1e-9):
        if strict:
            return super().tail_infimum(u, level, strict=True, tol=tol)
        # on [t_k, t_{k+1}) the survival is constant, so invert u piecewise
        starts = np.concatenate([[0.0], self.times])
        survs = np.concatenate([[1.0], self._surv])
        ends = np.concatenate([self.times, [math.inf]])
        for a, s, b in zip(starts, survs, ends):
            if s <= 0.0 or level >= s:
                cand = a
            else:
                cand = max(a, u.inverse(min(1.0, level / s)))
            if cand < b:
                return float(cand)
        return math.inf

    def quadrature_points(self):
        return tuple(self.times.tolist())

    def to_dict(self):
        return {"type": "discrete", "atoms": [[t, p] for t, p in self.atoms]}


class LogNormal(RuntimeDistribution):
    """``exp(N(mu, sigma^2))`` runtimes."""

    def __init__(self, mu: float, sigma: float):
        if not math.isfinite(mu) or not (sigma > 0 and math.isfinite(sigma)):
            raise InputDomainError(f"invalid lognormal parameters mu={mu!r} sigma={sigma!r}")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"LogNormal(mu={self.mu!r}, sigma={self.sigma!r})"

    def _z(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(t) - self.mu) / self.sigma

    def cdf(self, t):
        return _scalar_or_array(special.ndtr(self._z(t)), t)

    def sf(self, t):
        return _scalar_or_array(special.ndtr(-self._z(t)), t)

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr >= 1)):
            raise InputDomainError("probability must lie in [0, 1) for unbounded support")
        return _scalar_or_array(np.exp(self.mu + self.sigma * special.ndtri(p_arr)), p)

    def expected_utility(self, u, kappa=math.inf):
        if not kappa > 0:
            raise InputDomainError(f"captime must be positive, got {kappa!r}")
        return _integrate_survival(self, u, kappa)

    def quadrature_points(self):
        return tuple(math.exp(self.mu + k * self.sigma) for k in (-3, -1, 0, 1, 3))

    def to_dict(self):
        return {"type": "lognormal", "mu": self.mu, "sigma": self.sigma}


class Pareto(RuntimeDistribution):
    """Pareto runtimes: ``P(T > t) = (x_min / t) ** alpha`` for ``t >= x_min``."""

    def __init__(self, x_min: float, alpha: float):
        if not (x_min > 0 and math.isfinite(x_min)) or not (alpha > 0 and math.isfinite(alpha)):
            raise InputDomainError(f"invalid Pareto parameters x_min={x_min!r} alpha={alpha!r}")
        self.x_min = float(x_min)
        self.alpha = float(alpha)

    def __repr__(self):
        return f"Pareto(x_min={self.x_min!r}, alpha={self.alpha!r})"

    def sf(self, t):
        t_arr = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t_arr < self.x_min, 1.0, (self.x_min / np.maximum(t_arr, self.x_min)) ** self.alpha)
        return _scalar_or_array(out, t)

    def cdf(self, t):
        return _scalar_or_array(1.0 - np.asarray(self.sf(t)), t)

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr >= 1)):
            raise InputDomainError("probability must lie in [0, 1) for unbounded support")
        return _scalar_or_array(self.x_min * (1.0 - p_arr) ** (-1.0 / self.alpha), p)

    def expected_utility(self, u, kappa=math.inf):
        if not kappa > 0:
            raise InputDomainError(f"captime must be positive, got {kappa!r}")
        return _integrate_survival(self, u, kappa)

    def quadrature_points(self):
        return (self.x_min,)

    def to_dict(self):
        return {"type": "pareto", "x_min": self.x_min, "alpha": self.alpha}


class Mixture(RuntimeDistribution):
    """Finite mixture of runtime distributions."""

    def __init__(self, components):
        comps = [(float(w), d) for w, d in components]
        if not comps:
            raise InputDomainError("a mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise InputDomainError("mixture weights must be non-negative and sum to 1")
        self.weights = weights
        self.dists = [d for _, d in comps]
        self._cumw = np.cumsum(weights)

    def __repr__(self):
        return f"Mixture({list(zip(self.weights.tolist(), self.dists))})"

    @property
    def components(self):
        return list(zip(self.weights.tolist(), self.dists))

    def cdf(self, t):
        out = sum(w * np.asarray(d.cdf(t)) for w, d in self.components)
        return _scalar_or_array(np.clip(out, 0.0, 1.0), t)

    def sf(self, t):
        out = sum(w * np.asarray(d.sf(t)) for w, d in self.components)
        return _scalar_or_array(np.clip(out, 0.0, 1.0), t)

    def quantile(self, p):
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any((p_arr < 0) | (p_arr >= 1)):
            raise InputDomainError("probability must lie in [0, 1) for a mixture")
        qs = np.array([np.atleast_1d(d.quantile(p_arr)) for d in self.dists])
        lo, hi = qs.min(axis=0), qs.max(axis=0)
        # bracket holds: the mixture CDF lies between its components' CDFs
        for _ in range(200):
            if np.all(hi - lo <= 1e-15 * hi):
                break
            mid = 0.5 * (lo + hi)
            up = np.asarray(self.cdf(mid)) >= p_arr
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        return _scalar_or_array(hi if np.ndim(p) else hi[0], p)

    def sample(self, rng, size=None):
        # one uniform per draw: its position picks the component, the
        # rescaled remainder feeds that component's quantile
        v = np.atleast_1d(rng.random(size))
        k = np.minimum(np.searchsorted(self._cumw, v, side="right"), len(self.dists) - 1)
        lower = np.concatenate([[0.0], self._cumw[:-1]])
        inner = np.clip((v - lower[k]) / self.weights[k], 0.0, np.nextafter(1.0, 0.0))
        out = np.empty_like(v)
        for idx, d in enumerate(self.dists):
            sel = k == idx
            if np.any(sel):
                out[sel] = d.quantile(inner[sel])
        return float(out[0]) if size is None else out

    def expected_utility(self, u, kappa=math.inf):
        return math.fsum(w * d.expected_utility(u, kappa) for w, d in self.components if w > 0)

    def quadrature_points(self):
        return tuple(sorted({p for d in self.dists for p in d.quadrature_points()}))

    def to_dict(self):
        return {"type": "mixture", "components": [{"weight": w, "dist": d.to_dict()} for w, d in self.components]}


class TruncatedExtension(RuntimeDistribution):
    """``base`` on ``[0, cut]`` with every later run moved to one atom at ``atom``.

    This is the shape of the counterexample distributions: whatever was
    disclosed below the cut is kept, the hidden remainder is placed where it
    hurts most.
    """

    def __init__(self, base: RuntimeDistribution, cut: float, atom: float):
        if not (cut >= 0 and math.isfinite(cut)):
            raise InputDomainError(f"cut must be finite and non-negative, got {cut!r}")
        if not (atom >= cut and math.isfinite(atom) and atom > 0):
            raise InputDomainError(f"atom must be finite and >= cut, got {atom!r}")
        self.base = base
        self.cut = float(cut)
        self.atom = float(atom)
        self._f_cut = float(base.cdf(self.cut))

    def __repr__(self):
        return f"TruncatedExtension({self.base!r}, cut={self.cut!r}, atom={self.atom!r})"

    def cdf(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.where(t_arr <= self.cut, self.base.cdf(np.minimum(t_arr, self.cut)), self._f_cut)
        out = np.where(t_arr >= self.atom, 1.0, out)
        return _scalar_or_array(out, t)

    def sf(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.where(t_arr <= self.cut, self.base.sf(np.minimum(t_arr, self.cut)), 1.0 - self._f_cut)
        out = np.where(t_arr >= self.atom, 0.0, out)
        return _scalar_or_array(out, t)

    def quantile(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)):
            raise InputDomainError("probability must lie in [0, 1]")
        below = p_arr <= self._f_cut
        safe = np.where(below, np.minimum(p_arr, np.nextafter(1.0, 0.0)), 0.0)
        out = np.where(below, self.base.quantile(safe), self.atom)
        return _scalar_or_array(out, p)

    def expected_utility(self, u, kappa=math.inf):
        if not kappa > 0:
            raise InputDomainError(f"captime must be positive, got {kappa!r}")
        if kappa <= self.cut:
            return self.base.expected_utility(u, kappa)
        disclosed = self.base.lower_integral(u, self.cut) if self.cut > 0 else 0.0
        return disclosed + (1.0 - self._f_cut) * u.at(min(self.atom, kappa))

    def quadrature_points(self):
        return (*self.base.quadrature_points(), self.cut, self.atom)

    def to_dict(self):
        return {"type": "truncated_extension", "base": self.base.to_dict(), "cut": self.cut, "atom": self.atom}


def distribution_from_dict(obj: dict) -> RuntimeDistribution:
    """Inverse of ``RuntimeDistribution.to_dict``."""
    try:
        kind = obj["type"]
        if kind == "discrete":
            return Discrete([tuple(a) for a in obj["atoms"]])
        if kind == "lognormal":
            return LogNormal(obj["mu"], obj["sigma"])
        if kind == "pareto":
            return Pareto(obj["x_min"], obj["alpha"])
        if kind == "mixture":
            return Mixture([(c["weight"], distribution_from_dict(c["dist"])) for c in obj["components"]])
        if kind == "truncated_extension":
            return TruncatedExtension(distribution_from_dict(obj["base"]), obj["cut"], obj["atom"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed distribution entry {obj!r}: {exc!r}") from None
    raise FormatError(f"unknown distribution type {obj.get('type')!r}")


def load_synthetic_spec(path) -> tuple[list[str], list[RuntimeDistribution], str | None]:
    """Read a synthetic spec JSON: ``{"algorithms": [{"name", "type", ...}], "utility"?}``.

    Returns names, distributions and the optional utility spec string.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("algorithms"), list) or not doc["algorithms"]:
        raise FormatError(f"{path}: expected an object with a non-empty 'algorithms' list")
    names, dists = [], []
    for k, entry in enumerate(doc["algorithms"]):
        if not isinstance(entry, dict):
            raise FormatError(f"{path}: algorithms[{k}] is not an object")
        names.append(str(entry.get("name", f"algo_{k}")))
        body = {key: val for key, val in entry.items() if key != "name"}
        dists.append(distribution_from_dict(body))
    return names, dists, doc.get("utility")


def dump_synthetic_spec(path, names, dists, utility: str | None = None) -> None:
    doc = {"algorithms": [{"name": n, **d.to_dict()} for n, d in zip(names, dists)]}
    if utility is not None:
        doc["utility"] = utility
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
