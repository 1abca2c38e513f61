"""Ordinary ERM, local minimax ERM and the fixed-lambda relaxation over finite classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import DualSolution, solve_table, surrogate_table
from .hypotheses import Hypothesis, HypothesisClass
from .spaces import AmbiguityBall, EmpiricalDistribution, InstanceSpace
from .transport import candidate_table


@dataclass(frozen=True, eq=False)
class ErmResult:
    selected: Hypothesis
    selected_index: int
    objective: float
    per_hypothesis_values: list[tuple[str, float]]
    dual: DualSolution | None = None
    ball: AmbiguityBall | None = None
    procedure: str = "minimax"
    lambda_star: float | None = None

    def to_dict(self) -> dict:
        out = {
            "procedure": self.procedure,
            "winner": self.per_hypothesis_values[self.selected_index][0],
            "winner_index": self.selected_index,
            "objective": self.objective,
            "ball": None if self.ball is None else {"p": self.ball.p, "rho": self.ball.radius},
            "per_hypothesis": [{"id": h, "value": v} for h, v in self.per_hypothesis_values],
        }
        if self.dual is not None:
            out["dual"] = self.dual.to_dict()
        if self.lambda_star is not None:
            out["lambda_star"] = self.lambda_star
        return out


def _argmin(values) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def _require_members(F: HypothesisClass) -> None:
    if len(F) == 0:
        raise ValueError("empty hypothesis class")


def ordinary_erm(F: HypothesisClass, P_n: EmpiricalDistribution) -> ErmResult:
    """Empirical risk minimizer; ties go to the lowest member index."""
    _require_members(F)
    risks = [P_n.expectation(f.values(P_n.support)) for f in F]
    k = _argmin(risks)
    return ErmResult(F[k], k, risks[k], list(zip(F.ids(), risks)), procedure="ordinary")


def minimax_erm(F: HypothesisClass, P_n: EmpiricalDistribution, ball: AmbiguityBall, candidates,
                space: InstanceSpace, bracket: str = "threshold") -> ErmResult:
    """Minimizer of the dual local worst-case empirical risk over the class."""
    _require_members(F)
    cands, costs = candidate_table(P_n, candidates, space, ball.p)
    duals = []
    for f in F:
        expected = P_n.expectation(f.values(P_n.support)) if ball.radius == 0 else None
        duals.append(solve_table(f.values(cands), costs, P_n.weights, ball, cands, bracket, f, space, expected))
    values = [d.value for d in duals]
    k = _argmin(values)
    return ErmResult(F[k], k, values[k], list(zip(F.ids(), values)), duals[k], ball, "minimax")


def fixed_lambda_erm(F: HypothesisClass, P_n: EmpiricalDistribution, lambda_grid, ball: AmbiguityBall,
                     candidates, space: InstanceSpace) -> ErmResult:
    """Joint minimization over ``(f, lam)`` in ``F x lambda_grid`` of the dual objective."""
    _require_members(F)
    grid = np.asarray(list(lambda_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(grid < 0):
        raise ValueError("lambda grid must be nonnegative")
    cands, costs = candidate_table(P_n, candidates, space, ball.p)
    values, lams = [], []
    for f in F:
        fv = f.values(cands)
        objs = [float(lam * ball.budget + P_n.weights @ surrogate_table(fv, costs, lam)[0]) for lam in grid]
        j = _argmin(objs)
        values.append(objs[j])
        lams.append(float(grid[j]))
    k = _argmin(values)
    phi, idx = surrogate_table(F[k].values(cands), costs, lams[k])
    dual = DualSolution(lams[k], values[k], phi, (float(grid.min()), float(grid.max())), cands.take(idx), idx,
                        ball.radius, ball.p, "fixed_grid")
    return ErmResult(F[k], k, values[k], list(zip(F.ids(), values)), dual, ball, "fixed_lambda", lams[k])
