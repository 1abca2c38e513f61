"""Risk sandwiches, excess-risk bounds and entropy-integral calculators.

Every calculator returns a :class:`BoundReport` whose ``terms`` add up to its
``value``. Values are never clamped at the trivial risk cap ``M``; a report
is flagged ``vacuous`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import special

BOUND_KINDS = ("finite_class", "euclidean_ball_lipschitz", "gaussian_rkhs", "explicit_table")


@dataclass(frozen=True, eq=False)
class EntropyProfile:
    """Covering-number model of a hypothesis class in the uniform metric."""

    kind: str
    params: Mapping[str, float | tuple] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unsupported entropy profile kind {self.kind!r}")
        if self.kind == "explicit_table":
            radii = np.asarray(self.params["radii"], dtype=float)
            counts = np.asarray(self.params["counts"], dtype=float)
            if radii.shape != counts.shape or radii.ndim != 1:
                raise ValueError("radii and counts must be 1-D arrays of equal length")
            if np.any(np.diff(radii) <= 0) or (radii.size and radii[0] <= 0):
                raise ValueError("radii must be positive and strictly increasing")
            if np.any(np.diff(counts) > 0) or np.any(counts < 1):
                raise ValueError("covering numbers must be >= 1 and nonincreasing in u")

    @classmethod
    def finite(cls, size: int, upper_bound: float) -> EntropyProfile:
        return cls("finite_class", {"size": int(size), "upper_bound": float(upper_bound)})

    @classmethod
    def network(cls, d: int, r0: float, B: float, s_sup: float, s_prime_sup: float) -> EntropyProfile:
        return cls(
            "euclidean_ball_lipschitz",
            {"d": d, "r0": r0, "B": B, "s_sup": s_sup, "s_prime_sup": s_prime_sup},
        )

    @classmethod
    def rkhs(cls, d: int, r0: float, sigma: float, r: float, B: float) -> EntropyProfile:
        return cls("gaussian_rkhs", {"d": d, "r0": r0, "sigma": sigma, "r": r, "B": B})

    @classmethod
    def table(cls, radii: Iterable[float], counts: Iterable[float]) -> EntropyProfile:
        """``N(u) = counts[k]`` on ``[radii[k-1], radii[k])`` (``radii[-1] = 0``), 1 beyond."""
        return cls("explicit_table", {"radii": tuple(radii), "counts": tuple(counts)})

    @property
    def comp_value(self) -> float:
        return comp_entropy_integral(self)


@dataclass
class BoundReport:
    bound_name: str
    inputs: dict
    terms: dict
    value: float
    vacuous: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "inputs": dict(self.inputs),
            "terms": dict(self.terms),
            "value": self.value,
            "vacuous": self.vacuous,
            **({"extra": dict(self.extra)} if self.extra else {}),
        }


def _report(name: str, inputs: dict, terms: dict, M: float | None = None, **extra) -> BoundReport:
    value = math.fsum(terms.values())
    vacuous = M is not None and value > M
    return BoundReport(name, inputs, terms, value, vacuous, extra)


def upper_incomplete_gamma(s: float, x: float) -> float:
    """``Gamma(s, x) = int_x^inf u^(s-1) e^(-u) du``."""
    if s <= 0:
        raise ValueError("s must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(special.gammaincc(s, x) * special.gamma(s))


def rkhs_c1(d: int, r0: float, sigma: float) -> float:
    """The Gaussian-RKHS entropy constant ``C_1`` (depends on ``d``, ``r0``, ``sigma`` only)."""
    gam = upper_incomplete_gamma((d + 3) / 2.0, math.log(2.0))
    return (
        48.0
        * math.sqrt(d)
        * (2.0 * gam + math.log(2.0) ** ((d + 1) / 2.0))
        * (32.0 + 2560.0 * d * r0**2 / sigma**2) ** ((d + 1) / 2.0)
    )


def comp_entropy_integral(profile: EntropyProfile) -> float:
    """Upper bound on ``int_0^inf sqrt(log N(F, ||.||_inf, u)) du`` for the profile."""
    p = profile.params
    if profile.kind == "finite_class":
        size = p["size"]
        return 0.0 if size <= 1 else p["upper_bound"] * math.sqrt(math.log(size))
    if profile.kind == "euclidean_ball_lipschitz":
        D = 2.0 * p["r0"] * (p["B"] + p["s_sup"]) * p["s_prime_sup"]
        return 3.0 * D * math.sqrt(p["d"]) / 2.0
    if profile.kind == "gaussian_rkhs":
        return rkhs_c1(p["d"], p["r0"], p["sigma"]) / 48.0 * (p["r"] ** 2 + p["B"] * p["r"])
    if profile.kind == "explicit_table":
        radii = (0.0,) + tuple(p["radii"])
        # the integrand is a step function, so the integral is an exact sum
        return math.fsum(math.sqrt(math.log(count)) * (hi - lo)
                         for (lo, hi), count in zip(zip(radii[:-1], radii[1:]), p["counts"]))
    raise ValueError(f"unsupported entropy profile kind {profile.kind!r}")


def sandwich_lipschitz(L: float, rho: float, p: float = 1.0) -> float:
    """Slack ``2 L rho`` between a risk in the ball and the local worst-case risk."""
    if L < 0 or rho < 0:
        raise ValueError("L and rho must be nonnegative")
    return 2.0 * L * rho


def sandwich_regression(B: float, M: float, L: float, rho: float, sigma_sup: float) -> float:
    """Slack ``4 rho (B + M)(1 + L sigma_sup)`` for quadratic regression losses (p = 2)."""
    if min(B, M, L, rho, sigma_sup) < 0:
        raise ValueError("all inputs must be nonnegative")
    return 4.0 * rho * (B + M) * (1.0 + L * sigma_sup)


def sigma_sup(P, rho: float, candidates, space) -> float:
    """``sup E_Q ||X||_2`` over ``Q`` in the order-2 ball around ``P`` on the candidate set."""
    from .hypotheses import Hypothesis
    from .spaces import AmbiguityBall
    from .transport import primal_worst_case_risk

    norm = Hypothesis(lambda pts: np.linalg.norm(pts.features, axis=1), space.feature_bound, 1.0)
    return primal_worst_case_risk(norm, P, AmbiguityBall(2.0, rho), candidates, space).value


def confidence_t(delta: float) -> float:
    """``t`` with ``2 exp(-2 t^2) = delta``."""
    if not 0 < delta < 2:
        raise ValueError("delta must lie in (0, 2)")
    return math.sqrt(math.log(2.0 / delta) / 2.0)


def theorem1_bound(
    phi_mean: Callable[[float], float],
    lambda_grid: Iterable[float],
    rho: float,
    p: float,
    M: float,
    comp: float,
    n: int,
    t: float,
) -> BoundReport:
    """Data-dependent upper bound on the population worst-case risk.

    ``phi_mean(lam)`` is the empirical mean of the robust surrogate; the min over
    ``lam >= 0`` is taken over ``lambda_grid``.
    """
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("empty lambda grid")
    if n < 1 or t <= 0:
        raise ValueError("need n >= 1 and t > 0")
    root_n = math.sqrt(n)
    best = None
    for lam in grid:
        if lam < 0:
            raise ValueError("lambda values must be nonnegative")
        dual = (lam + 1.0) * rho**p + phi_mean(lam)
        log_term = M * math.sqrt(math.log(lam + 1.0)) / root_n
        if best is None or dual + log_term < best[1] + best[2]:
            best = (lam, dual, log_term)
    lam, dual, log_term = best
    terms = {
        "dual_part": dual,
        "lambda_log": log_term,
        "entropy": 24.0 * comp / root_n,
        "deviation": M * t / root_n,
    }
    inputs = {"rho": rho, "p": p, "M": M, "comp": comp, "n": n, "t": t, "lambda_grid": grid}
    return _report("theorem1", inputs, terms, M, lambda_star=lam, failure_probability=2 * math.exp(-2 * t * t))


def _ratio_power(diam: float, rho: float, p: float) -> float:
    if rho == 0:
        return math.inf
    return (diam / rho) ** p


def theorem2_bound(comp: float, L: float, diam: float, rho: float, p: float, M: float, n: int,
                   delta: float) -> BoundReport:
    """Excess local worst-case risk bound for uniformly L-Lipschitz classes."""
    root_n = math.sqrt(n)
    lip = 48.0 * L * diam**p / root_n if p == 1 else (
        math.inf if rho == 0 else 48.0 * L * diam**p / (root_n * rho ** (p - 1))
    )
    terms = {
        "entropy": 48.0 * comp / root_n,
        "lipschitz": lip,
        "deviation": 3.0 * M * math.sqrt(math.log(2.0 / delta) / (2.0 * n)),
    }
    inputs = {"comp": comp, "L": L, "diam": diam, "rho": rho, "p": p, "M": M, "n": n, "delta": delta}
    return _report("theorem2", inputs, terms, M)


def theorem3_bound(comp: float, C0: float, diam: float, rho: float, p: float, M: float, n: int,
                   delta: float) -> BoundReport:
    """Excess local worst-case risk bound when the class has one smooth anchor hypothesis."""
    root_n = math.sqrt(n)
    terms = {
        "entropy": 48.0 * comp / root_n,
        "anchor": 24.0 * C0 * (2.0 * diam) ** p / root_n * (1.0 + _ratio_power(diam, rho, p)),
        "deviation": 3.0 * M * math.sqrt(math.log(2.0 / delta) / (2.0 * n)),
    }
    inputs = {"comp": comp, "C0": C0, "diam": diam, "rho": rho, "p": p, "M": M, "n": n, "delta": delta}
    return _report("theorem3", inputs, terms, M)


def rademacher_phi_bound(comp: float, C0: float, diam: float, rho: float, p: float, n: int) -> BoundReport:
    """Upper bound on the Rademacher average of the surrogate class ``{phi_{lam, f}}``."""
    root_n = math.sqrt(n)
    terms = {
        "entropy": 24.0 * comp / root_n,
        "lambda_interval": 12.0 * C0 * (2.0 * diam) ** p / root_n * (1.0 + _ratio_power(diam, rho, p)),
    }
    inputs = {"comp": comp, "C0": C0, "diam": diam, "rho": rho, "p": p, "n": n}
    return _report("rademacher_phi", inputs, terms)


def lambda_interval_length(C0: float, diam: float, rho: float, p: float) -> float:
    """Length of the dual-parameter interval implied by a smooth anchor."""
    return C0 * 2.0 ** (p - 1) * (1.0 + _ratio_power(diam, rho, p))


def adaptation_bound(comp: float, L: float, diam: float, radius: float, p: float, M: float, n: int,
                     delta: float) -> BoundReport:
    """Target-domain excess risk bound for minimax ERM at the data-driven radius."""
    root_n = math.sqrt(n)
    lip = 48.0 * L * diam**p / root_n if p == 1 else 48.0 * L * diam**p / (root_n * radius ** (p - 1))
    terms = {
        "ambiguity": 2.0 * L * radius,
        "entropy": 48.0 * comp / root_n,
        "lipschitz": lip,
        "deviation": 3.0 * M * math.sqrt(math.log(4.0 / delta)) / math.sqrt(2.0 * n),
    }
    inputs = {"comp": comp, "L": L, "diam": diam, "radius": radius, "p": p, "M": M, "n": n, "delta": delta}
    return _report("adaptation", inputs, terms, M)


@dataclass
class CorollaryConstants:
    kind: str
    L: float
    M: float
    C1: float
    report: BoundReport

    def to_dict(self) -> dict:
        return {"kind": self.kind, "L": self.L, "M": self.M, "C1": self.C1, "bound": self.report.to_dict()}


def corollary_constants(kind: str, n: int, delta: float, **params) -> CorollaryConstants:
    """Constants and the full ``p = 1`` excess-risk bound for the two example classes.

    ``network`` needs ``d, r0, B, s_sup, s_prime_sup``; ``rkhs`` needs
    ``d, r0, B, sigma, r``.
    """
    root_n = math.sqrt(n)
    log_term = math.sqrt(math.log(2.0 / delta))
    if kind == "network":
        d, r0, B = params["d"], params["r0"], params["B"]
        s, ds = params["s_sup"], params["s_prime_sup"]
        L = 2.0 * math.sqrt(2.0) * (B + s) * (1.0 + ds)
        M = (s + B) ** 2
        C1 = (B + s) * (144.0 * r0 * math.sqrt(d) * ds + 192.0 * (1.0 + ds) * math.sqrt(2.0 * (r0**2 + B**2)))
        terms = {"complexity": C1 / root_n, "deviation": 3.0 * M * log_term / math.sqrt(2.0 * n)}
    elif kind == "rkhs":
        d, r0, B = params["d"], params["r0"], params["B"]
        sigma, r = params["sigma"], params["r"]
        L = 2.0 * math.sqrt(2.0) * (r + B) * (1.0 + r * math.sqrt(2.0) / sigma)
        M = 2.0 * (r**2 + B**2)
        C1 = rkhs_c1(d, r0, sigma)
        terms = {
            "complexity": C1 * (r**2 + B * r) / root_n,
            "lipschitz": 192.0 * math.sqrt(2.0) * (r + B) * (1.0 + r * math.sqrt(2.0) / sigma)
            * math.sqrt(r0**2 + B**2) / root_n,
            "deviation": 6.0 * (r**2 + B**2) * log_term / math.sqrt(2.0 * n),
        }
    else:
        raise ValueError(f"unknown corollary kind {kind!r}")
    inputs = dict(params, n=n, delta=delta)
    return CorollaryConstants(kind, L, M, C1, _report(f"corollary_{kind}", inputs, terms, M))
