"""Two-hypothesis example on ``Z = [0, 2]`` with data from Unif[0, 1].

The class is ``f0 = 1`` and ``f1 = alpha * 1{z >= 1}``. Ordinary ERM always
prefers ``f1``; local minimax ERM prefers ``f0`` as soon as the ball can move
enough mass onto ``z = 1``. The closed forms below hold inside a parameter
regime; outside it values are still returned, together with flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import EntropyProfile
from .dual import batched_worst_case, local_worst_case_risk
from .hypotheses import Hypothesis, HypothesisClass
from .spaces import AmbiguityBall, EmpiricalDistribution, InstanceSpace, PointSet, uniform_grid
from .transport import primal_worst_case_risk

SPACE = InstanceSpace.unit_interval(0.0, 2.0)
JUMP = PointSet(np.array([[1.0]]))


@dataclass(frozen=True)
class IllustrativeInstance:
    alpha: float
    p: float
    n: int
    rho: float
    delta: float = 0.05

    def __post_init__(self):
        if self.p < 1 or self.n < 1 or self.rho < 0 or not 0 < self.delta < 1:
            raise ValueError("need p >= 1, n >= 1, rho >= 0 and delta in (0, 1)")

    @property
    def lower_threshold(self) -> float:
        """Radius below which ``f1`` is also the population minimax hypothesis."""
        p = self.p
        return (p + 1.0) ** (-1.0 / p) * self.alpha ** (-(p + 1.0) / p)

    @property
    def upper_threshold(self) -> float:
        return self.alpha ** (-1.0 / self.p)

    @property
    def single_atom_regime(self) -> bool:
        """One sample atom (mass 1/n) can carry the mass ``1/alpha`` that makes ``f1`` lose."""
        return self.n <= self.alpha

    @property
    def flags(self) -> tuple[str, ...]:
        out = []
        if not self.alpha > 1:
            out.append("alpha_not_above_one")
        if not self.lower_threshold <= self.rho <= self.upper_threshold:
            out.append("rho_outside_regime")
        if not self.single_atom_regime:
            out.append("n_exceeds_alpha")
        return tuple(out)


@dataclass(frozen=True)
class Flagged:
    value: float
    flags: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


def hypothesis_class(alpha: float) -> HypothesisClass:
    """``(f0, f1)`` in this order, so ties go to ``f0``."""
    f0 = Hypothesis(lambda pts: np.ones(len(pts)), 1.0, 0.0, family_tag="casebook", name="f0")
    f1 = Hypothesis(
        lambda pts: np.where(pts.features[:, 0] >= 1.0, float(alpha), 0.0),
        float(alpha),
        family_tag="casebook",
        name="f1",
    )
    M = max(1.0, float(alpha))
    return HypothesisClass((f0, f1), M, None, None, EntropyProfile.finite(2, M), "casebook")


def analytic_population_worst_case(inst: IllustrativeInstance) -> Flagged:
    """Worst-case risk of ``f1`` around Unif[0, 1]."""
    p = inst.p
    moved = ((p + 1.0) * inst.rho**p) ** (1.0 / (p + 1.0))
    flags = inst.flags + (("beta_negative",) if moved > 1.0 else ())
    return Flagged(inst.alpha * (p + 1.0) ** (1.0 / (p + 1.0)) * inst.rho ** (p / (p + 1.0)), flags)


def analytic_empirical_worst_case(inst: IllustrativeInstance, sample: EmpiricalDistribution) -> Flagged:
    """Worst-case risk of ``f1`` around the sample, moving mass from the largest point to 1."""
    top = float(sample.features[:, 0].max())
    if top >= 1.0:
        raise ValueError("sample points must lie in [0, 1)")
    n = len(sample)
    flags = inst.flags
    if inst.rho > (1.0 - top) * n ** (-1.0 / inst.p):
        flags = flags + ("empirical_regime_violated",)
    return Flagged(inst.alpha * inst.rho**inst.p / (1.0 - top) ** inst.p, flags)


def empirical_oracle(inst: IllustrativeInstance, sample: EmpiricalDistribution) -> float:
    """Exact primal worst case of ``f1`` with candidates ``sample + {1}``."""
    f1 = hypothesis_class(inst.alpha)[1]
    cands = sample.support.concat(JUMP)
    return primal_worst_case_risk(f1, sample, AmbiguityBall(inst.p, inst.rho), cands, SPACE).value


def population_grid_oracle(inst: IllustrativeInstance, grid_size: int = 2000) -> float:
    """Dual worst case of ``f1`` around an evenly spaced grid standing in for Unif[0, 1]."""
    f1 = hypothesis_class(inst.alpha)[1]
    grid = uniform_grid(grid_size)
    return local_worst_case_risk(f1, grid, AmbiguityBall(inst.p, inst.rho), JUMP, SPACE).value


def selection_probability(inst: IllustrativeInstance) -> Flagged:
    """Probability that minimax ERM returns ``f1``: ``(1 - rho alpha^(1/p))^n``."""
    base = 1.0 - inst.rho * inst.alpha ** (1.0 / inst.p)
    flags = inst.flags + (("base_negative",) if base < 0 else ())
    return Flagged(max(base, 0.0) ** inst.n, flags)


def excess_risk_profile(inst: IllustrativeInstance) -> float:
    """The ``delta``-quantile excess risk of minimax ERM at radius ``rho``."""
    p, a = inst.p, inst.alpha
    top = (1.0 - inst.delta ** (1.0 / inst.n)) * a ** (-1.0 / p)
    if inst.lower_threshold <= inst.rho <= top:
        return a * (p + 1.0) ** (1.0 / (p + 1.0)) * inst.rho ** (p / (p + 1.0)) - 1.0
    return 0.0


def worst_alpha(rho: float, delta: float, n: int, p: float) -> Flagged:
    """``alpha = (1 - delta^(1/n))^p rho^(-p)``, the class that maximizes the excess at ``rho``."""
    alpha = (1.0 - delta ** (1.0 / n)) ** p * rho ** (-p)
    return Flagged(alpha, () if alpha > 1 else ("alpha_not_above_one",))


@dataclass
class SelectionSimulation:
    trials: int
    selected_f1: int
    worst_case_values: np.ndarray = field(repr=False)

    @property
    def frequency(self) -> float:
        return self.selected_f1 / self.trials

    def standard_error(self, prob: float) -> float:
        return math.sqrt(max(prob * (1.0 - prob), 0.0) / self.trials)


def trial_sample(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n)


def simulate_selection(inst: IllustrativeInstance, trials: int, seed: int) -> SelectionSimulation:
    """Run minimax ERM on ``trials`` samples (trial ``t`` is seeded with ``seed + t``).

    Each sample's worst case for ``f1`` is the dual value on candidates
    ``sample + {1}``; ``f0`` has worst case exactly 1, and ties go to ``f0``.
    """
    n = inst.n
    Z = np.stack([trial_sample(n, seed + t) for t in range(trials)])
    cands = np.concatenate([Z, np.ones((trials, 1))], axis=1)
    values = np.where(cands >= 1.0, float(inst.alpha), 0.0)
    costs = np.abs(Z[:, :, None] - cands[:, None, :]) ** inst.p
    weights = np.full((trials, n), 1.0 / n)
    _, worst = batched_worst_case(values, costs, weights, inst.rho**inst.p)
    return SelectionSimulation(trials, int(np.sum(worst < 1.0)), worst)


def simulated_excess_quantile(inst: IllustrativeInstance, sim: SelectionSimulation) -> float:
    """Empirical ``inf{eps >= 0 : freq(excess > eps) < delta}`` from simulated selections."""
    pop_f1 = analytic_population_worst_case(inst).value
    best = min(pop_f1, 1.0)
    excess = np.where(sim.worst_case_values < 1.0, pop_f1 - best, 1.0 - best)
    levels = np.unique(np.concatenate([[0.0], excess]))
    for eps in levels:
        if np.mean(excess > eps) < inst.delta:
            return float(eps)
    return float(levels[-1])


def sweep(alpha: float, p: float, n: int, rhos, trials: int, seed: int, grid_size: int = 2000) -> list[dict]:
    """Rows of (rho, analytic risk, oracle risk, selection probability, simulated frequency)."""
    rows = []
    for rho in rhos:
        inst = IllustrativeInstance(alpha, p, n, float(rho))
        sim = simulate_selection(inst, trials, seed) if trials > 0 else None
        rows.append(
            {
                "rho": inst.rho,
                "analytic_risk": analytic_population_worst_case(inst).value,
                "oracle_risk": population_grid_oracle(inst, grid_size),
                "selection_probability": selection_probability(inst).value,
                "simulated_frequency": None if sim is None else sim.frequency,
                "flags": ";".join(inst.flags),
            }
        )
    return rows
