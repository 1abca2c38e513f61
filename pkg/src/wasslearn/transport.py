"""Exact discrete optimal transport and the primal worst-case risk.

``solve_transport`` is a transportation simplex on the bipartite flow polytope
(spanning-tree basis, node potentials, lowest-index entering cell). The worst
case over a Wasserstein ball with a finite candidate support is solved exactly
by ``primal_worst_case_risk``; with the second marginal left free the LP splits
into one concave envelope per source atom tied together by a single budget
constraint, and the greedy over envelope segments is optimal.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spaces import (
    AmbiguityBall,
    EmpiricalDistribution,
    InstanceSpace,
    PointSet,
    StructuralError,
    as_point_set,
)

MARGINAL_TOL = 1e-9


class SolverError(RuntimeError):
    """The transport solver failed on inputs that should be solvable."""


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source_support: PointSet
    target_support: PointSet
    plan: np.ndarray
    cost: float
    p: float

    @property
    def source_weights(self) -> np.ndarray:
        return self.plan.sum(axis=1)

    @property
    def target_weights(self) -> np.ndarray:
        return self.plan.sum(axis=0)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source\\target"] + [f"t{j}" for j in range(self.plan.shape[1])])
            for i, row in enumerate(self.plan):
                writer.writerow([f"s{i}"] + [format(v, ".17g") for v in row])


@dataclass(frozen=True, eq=False)
class WorstCaseCertificate:
    """Maximizing distribution on the candidate set and the plan that reaches it."""

    distribution: EmpiricalDistribution
    value: float
    plan: TransportPlan
    candidates: PointSet
    candidate_values: np.ndarray


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    n, m = len(a), len(b)
    ra, rb = a.astype(float).copy(), b.astype(float).copy()
    flow = np.zeros((n, m))
    cells = []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        cells.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1 or (i < n - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    flow[n - 1, m - 1] += max(ra[n - 1], 0.0)
    return flow, cells


def _potentials(n, m, row_adj, col_adj, C):
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        side, k = queue.popleft()
        if side == "r":
            for j in row_adj[k]:
                if np.isnan(v[j]):
                    v[j] = C[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in col_adj[k]:
                if np.isnan(u[i]):
                    u[i] = C[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(start_row, end_col, n, row_adj, col_adj):
    """Basic cells on the tree path from row node ``start_row`` to column node ``end_col``."""
    parent = {("r", start_row): None}
    queue = deque([("r", start_row)])
    target = ("c", end_col)
    while queue:
        node = queue.popleft()
        if node == target:
            break
        side, k = node
        nbrs = [("c", j) for j in row_adj[k]] if side == "r" else [("r", i) for i in col_adj[k]]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    if target not in parent:
        raise SolverError("basis is not a spanning tree")
    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        cell = (node[1], prev[1]) if node[0] == "r" else (prev[1], node[1])
        cells.append(cell)
        node = prev
    cells.reverse()
    return cells


def solve_transport(a, b, C, max_pivots: int | None = None) -> tuple[float, np.ndarray]:
    """Minimize ``<plan, C>`` over couplings of the weight vectors ``a`` and ``b``.

    Returns the optimal value and plan. The entering cell has the most negative
    reduced cost (lowest row-major index among ties); after ``bland_after``
    pivots the rule switches to the first negative cell, which cannot cycle.
    Leaving ties go to the lowest index, so the returned plan is deterministic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    n, m = len(a), len(b)
    if C.shape != (n, m):
        raise StructuralError(f"cost matrix has shape {C.shape}, expected {(n, m)}")
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise StructuralError(f"marginals carry different mass: {a.sum()!r} vs {b.sum()!r}")
    flow, cells = _northwest_corner(a, b)
    if n == 1 or m == 1:
        return float(np.sum(flow * C)), flow
    basis = np.zeros((n, m), dtype=bool)
    row_adj = [set() for _ in range(n)]
    col_adj = [set() for _ in range(m)]
    for i, j in cells:
        basis[i, j] = True
        row_adj[i].add(j)
        col_adj[j].add(i)
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-11 * scale
    limit = max_pivots or 50 * (n + m) * max(n, m) + 1000
    bland_after = 10 * (n + m) * max(n, m)
    for step in range(limit):
        u, v = _potentials(n, m, row_adj, col_adj, C)
        reduced = C - u[:, None] - v[None, :]
        negative = (reduced < -tol) & ~basis
        if not negative.any():
            return float(np.sum(flow * C)), flow
        if step < bland_after:
            flat = int(np.argmin(np.where(negative, reduced, 0.0).ravel()))
        else:
            flat = int(np.argmax(negative.ravel()))
        ei, ej = divmod(flat, m)
        path = _tree_path(ei, ej, n, row_adj, col_adj)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leave = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * m + c[1])
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[ei, ej] += theta
        flow[leave] = 0.0
        basis[leave] = False
        row_adj[leave[0]].discard(leave[1])
        col_adj[leave[1]].discard(leave[0])
        basis[ei, ej] = True
        row_adj[ei].add(ej)
        col_adj[ej].add(ei)
    raise SolverError(f"no optimality after {limit} pivots (n={n}, m={m}, cost scale={scale})")


def _monotone_plan(xa, wa, xb, wb):
    """Quantile coupling of two weighted samples on the line."""
    ia = np.argsort(xa, kind="stable")
    ib = np.argsort(xb, kind="stable")
    sorted_flow, _ = _northwest_corner(wa[ia], wb[ib])
    plan = np.zeros_like(sorted_flow)
    plan[np.ix_(ia, ib)] = sorted_flow
    return plan


def _check_plan(plan, a, b):
    if np.any(plan < -MARGINAL_TOL):
        raise SolverError("negative entry in transport plan")
    if np.abs(plan.sum(axis=1) - a).max() > MARGINAL_TOL or np.abs(plan.sum(axis=0) - b).max() > MARGINAL_TOL:
        raise SolverError("transport plan violates a marginal")


def wasserstein(
    p: float, A: EmpiricalDistribution, B: EmpiricalDistribution, space: InstanceSpace
) -> tuple[float, TransportPlan]:
    """``W_p(A, B)`` and an optimal coupling.

    On one-dimensional unlabeled spaces the monotone (quantile) coupling is used;
    it is optimal for every convex cost ``|x - y|^p``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    D = space.pairwise(A.support, B.support)
    Cp = D**p
    if not space.labeled and space.dimension == 1:
        plan = _monotone_plan(A.features[:, 0], A.weights, B.features[:, 0], B.weights)
    else:
        _, plan = solve_transport(A.weights, B.weights, Cp)
    plan = np.clip(plan, 0.0, None)
    _check_plan(plan, A.weights, B.weights)
    cost = float(np.sum(plan * Cp))
    tp = TransportPlan(A.support, B.support, plan, cost, p)
    return max(cost, 0.0) ** (1.0 / p), tp


def candidate_table(P: EmpiricalDistribution, candidates, space: InstanceSpace, p: float):
    """Candidate points (support of ``P`` appended where missing) and ``d^p`` costs.

    Returns ``(candidates, costs)`` with ``costs[i, j] = d(Z_i, c_j) ** p``.
    """
    cands = as_point_set(candidates)
    if len(cands) == 0:
        raise ValueError("empty candidate set")
    D = space.pairwise(P.support, cands)
    missing = np.flatnonzero(~np.any(D == 0.0, axis=1))
    if missing.size:
        extra = P.support.take(missing)
        cands = cands.concat(extra)
        D = np.hstack([D, space.pairwise(P.support, extra)])
    return cands, D**p


def _envelope(costs: np.ndarray, values: np.ndarray):
    """Upper concave envelope of ``(cost_j, value_j)`` starting from the cheapest best point.

    Returns the start index and the list of ``(slope, dcost, dvalue, j_from, j_to)``.
    """
    zero = np.flatnonzero(costs == 0.0)
    start = int(zero[np.argmax(values[zero])])
    v0 = values[start]
    better = np.flatnonzero(values > v0)
    if better.size == 0:
        return start, []
    order = better[np.lexsort((better, -values[better], costs[better]))]
    hull = [start]
    for j in order:
        if values[j] <= values[hull[-1]]:
            continue
        while len(hull) >= 2:
            h1, h2 = hull[-2], hull[-1]
            s_prev = (values[h2] - values[h1]) / (costs[h2] - costs[h1])
            s_new = (values[j] - values[h2]) / (costs[j] - costs[h2])
            if s_prev <= s_new:
                hull.pop()
            else:
                break
        hull.append(int(j))
    segs = []
    for h1, h2 in zip(hull[:-1], hull[1:]):
        dc = costs[h2] - costs[h1]
        dv = values[h2] - values[h1]
        segs.append((dv / dc, dc, dv, h1, h2))
    return start, segs


def worst_case_from_table(values: np.ndarray, costs: np.ndarray, weights: np.ndarray, budget: float):
    """Exact ``max sum_ij plan_ij values_j`` s.t. rows of plan sum to ``weights`` and
    ``sum plan_ij costs_ij <= budget``. Returns ``(value, plan)``."""
    n, k = costs.shape
    plan = np.zeros((n, k))
    segments = []
    position = np.empty(n, dtype=int)
    for i in range(n):
        start, segs = _envelope(costs[i], values)
        position[i] = start
        plan[i, start] = weights[i]
        if weights[i] > 0:
            segments.extend((-s, i, r, dc, h1, h2) for r, (s, dc, dv, h1, h2) in enumerate(segs))
    segments.sort(key=lambda t: (t[0], t[1], t[2]))
    remaining = budget
    for _, i, _, dc, h1, h2 in segments:
        if remaining <= 0.0:
            break
        need = weights[i] * dc
        if need <= remaining:
            plan[i, h1] -= weights[i]
            plan[i, h2] += weights[i]
            remaining -= need
        else:
            moved = remaining / dc
            plan[i, h1] -= moved
            plan[i, h2] += moved
            remaining = 0.0
    plan = np.clip(plan, 0.0, None)
    return float(plan.sum(axis=0) @ values), plan


def primal_worst_case_risk(
    f, P: EmpiricalDistribution, ball: AmbiguityBall, candidates, space: InstanceSpace
) -> WorstCaseCertificate:
    """Largest ``E_Q[f]`` over distributions ``Q`` on ``candidates`` with ``W_p(P, Q) <= radius``.

    Support points of ``P`` are added to the candidates when absent so that
    every atom may stay put.
    """
    cands, Cp = candidate_table(P, candidates, space, ball.p)
    fv = np.asarray(f.values(cands), dtype=float)
    value, plan = worst_case_from_table(fv, Cp, P.weights, ball.budget)
    cost = float(np.sum(plan * Cp))
    q = plan.sum(axis=0)
    q = q / q.sum()
    tp = TransportPlan(P.support, cands, plan, cost, ball.p)
    return WorstCaseCertificate(EmpiricalDistribution(cands, q), value, tp, cands, fv)
