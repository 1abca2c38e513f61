"""Randomized oracle checks shared by the ``verify`` command and the test-suite."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bounds import comp_entropy_integral, lambda_interval_length, rademacher_phi_bound
from .dual import lambda_bracket, local_worst_case_risk, surrogate_table
from .erm import minimax_erm, ordinary_erm
from .hypotheses import (
    Hypothesis,
    HypothesisClass,
    anchored_bump,
    lipschitz_envelope,
    linear_predictor,
    make_quadratic_class,
    sample_space_points,
)
from .spaces import AmbiguityBall, EmpiricalDistribution, InstanceSpace, PointSet
from .transport import candidate_table, primal_worst_case_risk

RADII = (0.0, 0.01, 0.1, 0.5)


@dataclass(frozen=True, eq=False)
class Instance:
    f: Hypothesis
    P: EmpiricalDistribution
    ball: AmbiguityBall
    candidates: PointSet
    space: InstanceSpace


def random_space(rng: np.random.Generator) -> InstanceSpace:
    d = int(rng.integers(1, 3))
    kind = rng.choice(["euclidean_product", "lp_product"])
    order = float(rng.choice([1.0, 2.0])) if kind == "lp_product" else 2.0
    return InstanceSpace(d, 1.0, 1.0, str(kind), order)


def random_distribution(space: InstanceSpace, n: int, rng: np.random.Generator) -> EmpiricalDistribution:
    return EmpiricalDistribution(sample_space_points(space, n, rng), rng.dirichlet(np.ones(n)))


def random_lipschitz(space: InstanceSpace, rng: np.random.Generator) -> Hypothesis:
    k = int(rng.integers(1, 4))
    return lipschitz_envelope(sample_space_points(space, k, rng), rng.uniform(0.0, 1.0, k),
                              float(rng.uniform(0.2, 3.0)), space)


def random_anchored(space: InstanceSpace, p: float, rng: np.random.Generator) -> Hypothesis:
    z0 = sample_space_points(space, 1, rng)[0]
    return anchored_bump(float(rng.uniform(0.5, 2.0)), z0, p, space, float(rng.uniform(0, 6.3)))


def random_hypothesis(space: InstanceSpace, p: float, rng: np.random.Generator) -> Hypothesis:
    pick = rng.integers(3)
    if pick == 0:
        return random_lipschitz(space, rng)
    if pick == 1:
        return random_anchored(space, p, rng)
    w = rng.normal(size=space.dimension)
    w *= rng.uniform(0, 1) / max(np.linalg.norm(w), 1e-12)
    return make_quadratic_class([linear_predictor(w, 0.0, space.feature_bound)], space)[0]


def random_instance(rng: np.random.Generator, max_atoms: int = 12, max_candidates: int = 30,
                    kind: str = "any") -> Instance:
    space = random_space(rng)
    p = float(rng.choice([1.0, 2.0]))
    rho = float(rng.choice(RADII))
    P = random_distribution(space, int(rng.integers(1, max_atoms + 1)), rng)
    cands = sample_space_points(space, int(rng.integers(1, max_candidates + 1)), rng)
    if kind == "lipschitz":
        f = random_lipschitz(space, rng)
    elif kind == "anchored":
        f = random_anchored(space, p, rng)
    else:
        f = random_hypothesis(space, p, rng)
    return Instance(f, P, AmbiguityBall(p, rho), cands, space)


def duality_gap(inst: Instance) -> float:
    primal = primal_worst_case_risk(inst.f, inst.P, inst.ball, inst.candidates, inst.space).value
    dual = local_worst_case_risk(inst.f, inst.P, inst.ball, inst.candidates, inst.space).value
    return abs(primal - dual)


def duality_gaps(count: int, seed: int) -> np.ndarray:
    return np.array([duality_gap(random_instance(np.random.default_rng([seed, k]))) for k in range(count)])


def bracket_excess(count: int, seed: int) -> np.ndarray:
    """``lambda* - lambda_max`` on Lipschitz or anchored instances with positive radius."""
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        inst = random_instance(rng, kind="lipschitz" if k % 2 == 0 else "anchored")
        ball = AmbiguityBall(inst.ball.p, float(rng.choice(RADII[1:])))
        sol = local_worst_case_risk(inst.f, inst.P, ball, inst.candidates, inst.space)
        hi, _ = lambda_bracket(inst.f, ball, inst.space)
        out.append(sol.lambda_star - hi)
    return np.array(out)


def perturb(P: EmpiricalDistribution, cands: PointSet, costs: np.ndarray, budget: float,
            rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Random feasible plan from ``P`` onto the candidate columns; returns its column masses and cost."""
    n, k = costs.shape
    targets = rng.integers(k, size=n)
    frac = rng.uniform(0, 1, size=n)
    cost = float(np.sum(P.weights * frac * costs[np.arange(n), targets]))
    scale = 1.0 if cost <= budget else budget / cost
    frac = frac * scale * rng.uniform(0, 1)
    plan = np.zeros((n, k))
    own = np.argmax(costs == 0.0, axis=1)
    plan[np.arange(n), own] += P.weights * (1.0 - frac)
    plan[np.arange(n), targets] += P.weights * frac
    return plan.sum(axis=0), float(np.sum(plan * costs))


@dataclass
class SandwichSlack:
    lower: float
    upper: float


def sandwich_slacks(count: int, perturbations: int, seed: int) -> list[SandwichSlack]:
    """Smallest ``dual - R(Q')`` and ``R(Q') + 2 L rho - dual`` over in-ball perturbations."""
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        inst = random_instance(rng, kind="lipschitz")
        ball = AmbiguityBall(inst.ball.p, float(rng.choice(RADII[1:])))
        dual = local_worst_case_risk(inst.f, inst.P, ball, inst.candidates, inst.space).value
        cands, costs = candidate_table(inst.P, inst.candidates, inst.space, ball.p)
        fv = inst.f.values(cands)
        lo, up = math.inf, math.inf
        for _ in range(perturbations):
            q, cost = perturb(inst.P, cands, costs, ball.budget, rng)
            assert cost <= ball.budget * (1 + 1e-12)
            risk = float(q @ fv)
            lo = min(lo, dual - risk)
            up = min(up, risk + 2.0 * inst.f.lipschitz_constant * ball.radius - dual)
        out.append(SandwichSlack(lo, up))
    return out


def rho_zero_mismatches(count: int, seed: int) -> int:
    """Number of random instances where minimax ERM at radius 0 differs from ordinary ERM."""
    bad = 0
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        space = random_space(rng)
        p = float(rng.choice([1.0, 2.0]))
        members = [random_hypothesis(space, p, rng) for _ in range(int(rng.integers(1, 6)))]
        if rng.uniform() < 0.3:
            members.append(members[0])
        F = HypothesisClass(tuple(members), max(m.upper_bound for m in members))
        P = random_distribution(space, int(rng.integers(1, 13)), rng)
        cands = sample_space_points(space, int(rng.integers(1, 31)), rng)
        a = ordinary_erm(F, P)
        b = minimax_erm(F, P, AmbiguityBall(p, 0.0), cands, space)
        if a.selected_index != b.selected_index or a.objective != b.objective:
            bad += 1
    return bad


def _envelope_breakpoints(values: np.ndarray, costs_row: np.ndarray, hi: float) -> list[float]:
    """Breakpoints in ``(0, hi)`` of ``lam -> max_j values_j - lam * costs_row_j``."""
    out = []
    lam = 0.0
    while lam < hi:
        scores = values - lam * costs_row
        top = scores.max()
        active = np.flatnonzero(scores >= top - 1e-15 * max(1.0, abs(top)))
        slope = costs_row[active].min()
        steeper = costs_row < slope
        if not steeper.any():
            break
        cur = top
        with np.errstate(divide="ignore"):
            cross = (cur - (values[steeper] - lam * costs_row[steeper])) / (slope - costs_row[steeper])
        nxt = lam + cross.min()
        if nxt <= lam or nxt >= hi:
            break
        out.append(float(nxt))
        lam = nxt
    return out


def exact_rademacher(class_values: list[np.ndarray], costs: np.ndarray, hi: float) -> float:
    """``E_sigma sup_{f, lam in [0, hi]} (1/n) sum_i sigma_i phi_{lam, f}(Z_i)`` over all sign vectors.

    The sup over ``lam`` is attained at an endpoint or a breakpoint of some
    surrogate, so evaluating on that finite set is exact.
    """
    n = costs.shape[0]
    rows = []
    for fv in class_values:
        lams = {0.0, float(hi)}
        for i in range(n):
            lams.update(_envelope_breakpoints(fv, costs[i], hi))
        grid = np.array(sorted(lams))
        rows.append(np.stack([surrogate_table(fv, costs, lam)[0] for lam in grid]))
    table = np.concatenate(rows)  # (options, n)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return float(np.mean(np.max(signs @ table.T, axis=1)) / n)


@dataclass
class RademacherCheck:
    exact: float
    bound: float


def rademacher_checks(count: int, seed: int, max_n: int = 8) -> list[RademacherCheck]:
    """Exact Rademacher averages of small surrogate classes against the entropy bound."""
    out = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        space = InstanceSpace(int(rng.integers(1, 3)), 1.0, 1.0)
        p = float(rng.choice([1.0, 2.0]))
        rho = float(rng.choice(RADII[1:]))
        grid = [linear_predictor(np.zeros(space.dimension))]
        for _ in range(int(rng.integers(1, 3))):
            w = rng.normal(size=space.dimension)
            grid.append(linear_predictor(w * rng.uniform(0, 1) / np.linalg.norm(w)))
        F = make_quadratic_class(grid, space)
        n = int(rng.integers(2, max_n + 1))
        P = EmpiricalDistribution.uniform(sample_space_points(space, n, rng))
        cands = sample_space_points(space, int(rng.integers(1, 10)), rng)
        cands, costs = candidate_table(P, cands, space, p)
        anchor = F[F.anchor_index].smooth_anchor
        C0 = anchor.constant_for(p, space.diameter)
        hi = lambda_interval_length(C0, space.diameter, rho, p)
        exact = exact_rademacher([f.values(cands) for f in F], costs, hi)
        bound = rademacher_phi_bound(comp_entropy_integral(F.entropy_profile), C0, space.diameter, rho, p, n).value
        out.append(RademacherCheck(exact, bound))
    return out


def pushforward_gaps(count: int, seed: int) -> np.ndarray:
    from .adaptation import CubicMonotone, Shift, verify_pushforward_identity

    gaps = []
    for k in range(count):
        rng = np.random.default_rng([seed, k])
        d = int(rng.integers(1, 4))
        if k % 2 == 0:
            T = Shift(tuple(rng.uniform(-1, 1, d)))
        else:
            T = CubicMonotone(tuple(rng.uniform(0.2, 2, d)), tuple(rng.uniform(0, 1, d)), tuple(rng.uniform(-1, 1, d)))
        n = int(rng.integers(1, 9))
        gaps.append(verify_pushforward_identity(T, n, float(rng.choice([1.0, 2.0])), int(rng.integers(2**31)), d))
    return np.array(gaps)

