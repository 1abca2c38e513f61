"""Dual route to the local worst-case risk.

For a finite candidate set the robust surrogate is
``phi(lam, z) = max_j f(c_j) - lam * d(z, c_j) ** p`` and the worst-case risk
over the ball of radius ``rho`` is ``min_{lam >= 0} lam * rho ** p + E_Q phi``.
The objective is a convex piecewise-linear function of ``lam``; it is minimized
by golden-section search followed by a few exact evaluations near the kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spaces import AmbiguityBall, EmpiricalDistribution, InstanceSpace, Point, PointSet
from .transport import candidate_table

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LAMBDA_TOL = 1e-9
MAX_GOLDEN_STEPS = 300


@dataclass(frozen=True, eq=False)
class DualSolution:
    lambda_star: float
    value: float
    surrogate_values: np.ndarray
    bracket: tuple[float, float]
    inner_argmax: PointSet
    argmax_index: np.ndarray
    rho: float
    p: float
    bracket_source: str = "threshold"

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "value": self.value,
            "rho": self.rho,
            "p": self.p,
            "bracket": list(self.bracket),
            "bracket_source": self.bracket_source,
            "surrogate_values": self.surrogate_values.tolist(),
            "argmax_index": self.argmax_index.tolist(),
        }


def surrogate_table(values: np.ndarray, costs: np.ndarray, lam) -> tuple[np.ndarray, np.ndarray]:
    """Surrogate values and argmax indices for every row of ``costs``.

    ``values`` has shape ``(..., k)`` and ``costs`` shape ``(..., n, k)``; ``lam``
    is a scalar or broadcasts against the leading batch axes. Ties go to the
    lowest candidate index.
    """
    lam = np.asarray(lam, dtype=float)
    scores = values[..., None, :] - lam[..., None, None] * costs
    idx = np.argmax(scores, axis=-1)
    return np.take_along_axis(scores, idx[..., None], axis=-1)[..., 0], idx


def threshold_lambda(values: np.ndarray, costs: np.ndarray) -> float | np.ndarray:
    """Smallest ``lam`` beyond which every surrogate equals the loss at the atom itself."""
    own = np.max(np.where(costs == 0.0, values[..., None, :], -np.inf), axis=-1)
    gain = values[..., None, :] - own[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(costs > 0.0, gain / np.where(costs > 0.0, costs, 1.0), -np.inf)
    flat = ratio.reshape(ratio.shape[:-2] + (-1,))
    out = np.maximum(np.max(flat, axis=-1), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _objective(values, costs, weights, budget, lam, floor=None):
    """Objective value and its slope (with the chosen argmax) at ``lam``."""
    phi, idx = surrogate_table(values, costs, lam)
    used = np.take_along_axis(costs, idx[..., None], axis=-1)[..., 0]
    if floor is not None:
        stay = floor >= phi
        phi = np.where(stay, floor, phi)
        used = np.where(stay, 0.0, used)
    lam = np.asarray(lam, dtype=float)
    return lam * budget + np.sum(weights * phi, axis=-1), budget - np.sum(weights * used, axis=-1)


def minimize_dual(values: np.ndarray, costs: np.ndarray, weights: np.ndarray, budget, hi, floor=None):
    """Minimize ``lam * budget + sum_i w_i phi_i(lam)`` over ``[0, hi]`` for a batch of tables.

    Shapes: ``values (T, k)``, ``costs (T, n, k)``, ``weights (T, n)``, ``budget`` and
    ``hi`` broadcast to ``(T,)``. Returns ``(lam_star, value)`` arrays. Among
    equal objective values the smallest ``lam`` is kept. ``floor (T, n)``, when
    given, is a zero-cost option per atom (its own loss) kept outside ``costs``.
    """
    T = values.shape[0]
    budget = np.broadcast_to(np.asarray(budget, dtype=float), (T,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (T,)).copy()
    tol = np.maximum(LAMBDA_TOL, 4.0 * np.finfo(float).eps * hi)

    def g(lam):
        return _objective(values, costs, weights, budget, lam, floor)[0]

    a = np.zeros(T)
    b = hi.copy()
    width = np.max((b - a) / tol)
    steps = 0 if width <= 1 else min(MAX_GOLDEN_STEPS, int(math.ceil(math.log(width) / -math.log(GOLDEN))) + 1)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(steps):
        left = gc <= gd
        # keep [a, d] when the left probe is no worse, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - GOLDEN * (b - a), d)
        new_d = np.where(left, c, a + GOLDEN * (b - a))
        probe = np.where(left, new_c, new_d)
        gp = g(probe)
        gc, gd = np.where(left, gp, gd), np.where(left, gc, gp)
        c, d = new_c, new_d
        if np.all(b - a <= tol):
            break

    # exact finish: endpoints, the bracket, and the crossing of the two active lines
    ga, sa = _objective(values, costs, weights, budget, a, floor)
    gb, sb = _objective(values, costs, weights, budget, b, floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (gb - ga + sa * a - sb * b) / (sa - sb)
    cross = np.where(np.isfinite(cross), np.clip(cross, a, b), a)
    probes = np.stack([np.zeros(T), a, cross, 0.5 * (a + b), b, hi])
    scores = np.stack([g(lam) for lam in probes])
    best = np.full(T, np.inf)
    best_lam = np.zeros(T)
    for lam, val in zip(probes, scores):
        better = (val < best) | ((val == best) & (lam < best_lam))
        best = np.where(better, val, best)
        best_lam = np.where(better, lam, best_lam)
    return best_lam, best


def lambda_bracket(f, ball: AmbiguityBall, space: InstanceSpace, values=None, costs=None) -> tuple[float, str]:
    """Upper end of the dual search interval and the rule that produced it.

    Uses ``L * rho ** -(p - 1)`` for Lipschitz losses and
    ``C0 * 2 ** (p - 1) * (1 + (diam / rho) ** p)`` for anchored losses, taking
    the smaller when both apply. Without metadata the threshold of the
    candidate table (``values``, ``costs``) is returned.
    """
    rho, p = ball.radius, ball.p
    if rho == 0:
        raise ValueError("the dual bracket is undefined at radius 0; use the radius-0 shortcut")
    options = []
    if f.lipschitz_constant is not None:
        options.append((f.lipschitz_constant * rho ** (-(p - 1.0)), "lipschitz"))
    if f.smooth_anchor is not None:
        c0 = f.smooth_anchor.constant_for(p, space.diameter)
        if c0 is not None:
            options.append((c0 * 2.0 ** (p - 1.0) * (1.0 + (space.diameter / rho) ** p), "anchor"))
    if options:
        return min(options)
    if values is None or costs is None:
        raise ValueError("hypothesis has no Lipschitz or anchor metadata; pass the candidate table")
    return threshold_lambda(np.asarray(values), np.asarray(costs)), "threshold"


def solve_table(values: np.ndarray, costs: np.ndarray, weights: np.ndarray, ball: AmbiguityBall,
                cands: PointSet, bracket: str = "threshold", f=None, space=None,
                expected: float | None = None) -> DualSolution:
    """Dual solution for one precomputed candidate table."""
    lam_hat = threshold_lambda(values, costs)
    if ball.radius == 0:
        phi, idx = surrogate_table(values, costs, lam_hat)
        value = expected if expected is not None else float(weights @ phi)
        return DualSolution(lam_hat, value, phi, (0.0, lam_hat), cands.take(idx), idx, 0.0, ball.p, "radius_zero")
    if bracket == "threshold":
        hi, source = lam_hat, "threshold"
    elif bracket == "metadata":
        hi, source = lambda_bracket(f, ball, space, values, costs)
    else:
        raise ValueError(f"unknown bracket rule {bracket!r}")
    lam, _ = minimize_dual(values[None], costs[None], weights[None], ball.budget, hi)
    lam = float(lam[0])
    phi, idx = surrogate_table(values, costs, lam)
    value = lam * ball.budget + float(weights @ phi)
    return DualSolution(lam, value, phi, (0.0, float(hi)), cands.take(idx), idx, ball.radius, ball.p, source)


def local_worst_case_risk(f, Q: EmpiricalDistribution, ball: AmbiguityBall, candidates,
                          space: InstanceSpace, bracket: str = "threshold") -> DualSolution:
    """Worst-case risk of ``f`` over the ball around ``Q`` restricted to ``candidates``.

    ``bracket="threshold"`` searches up to the data-dependent threshold beyond
    which the surrogate is the loss itself (always valid); ``"metadata"`` uses the
    metadata bound from :func:`lambda_bracket`.
    """
    cands, costs = candidate_table(Q, candidates, space, ball.p)
    values = f.values(cands)
    expected = Q.expectation(f.values(Q.support)) if ball.radius == 0 else None
    return solve_table(values, costs, Q.weights, ball, cands, bracket, f, space, expected)


def phi(f, lam: float, z: Point, candidates, p: float, space: InstanceSpace) -> tuple[float, Point]:
    """Robust surrogate at a single point and a maximizing candidate."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    single = EmpiricalDistribution.uniform(PointSet.from_points([z]))
    cands, costs = candidate_table(single, candidates, space, p)
    vals, idx = surrogate_table(f.values(cands), costs, lam)
    return float(vals[0]), cands[int(idx[0])]


def dual_objective(f, Q: EmpiricalDistribution, ball: AmbiguityBall, candidates, space: InstanceSpace,
                   lam: float) -> float:
    """``lam * rho ** p + E_Q phi(lam, .)`` on the candidate set."""
    cands, costs = candidate_table(Q, candidates, space, ball.p)
    vals, _ = surrogate_table(f.values(cands), costs, lam)
    return lam * ball.budget + float(Q.weights @ vals)


def batched_worst_case(values: np.ndarray, costs: np.ndarray, weights: np.ndarray, budget: float,
                       chunk: int = 10000) -> tuple[np.ndarray, np.ndarray]:
    """Dual worst-case values for a stack of tables, each searched up to its threshold.

    Candidates that cannot beat any atom's own loss in any table are dropped
    before the search; this leaves every surrogate value unchanged.
    """
    own = np.max(np.where(costs == 0.0, values[:, None, :], -np.inf), axis=-1)
    keep = np.flatnonzero(np.any(values > own.min(axis=1, keepdims=True), axis=0))
    if keep.size == 0:
        return np.zeros(values.shape[0]), np.sum(weights * own, axis=1)
    lam_out = np.empty(values.shape[0])
    val_out = np.empty(values.shape[0])
    for s in range(0, values.shape[0], chunk):
        sl = slice(s, s + chunk)
        hi = threshold_lambda(values[sl], costs[sl])
        v, c = values[sl][:, keep], costs[sl][:, :, keep]
        lam_out[sl], val_out[sl] = minimize_dual(v, c, weights[sl], budget, hi, own[sl])
    return lam_out, val_out
