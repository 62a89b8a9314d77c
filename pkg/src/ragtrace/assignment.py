"""Ranked assignment solving for attention-optimal source orderings.

Positions get expected-attention weights (high at the ends, low in the
middle), sources get relevance shares, and cost[i][j] = -relevance[j] *
weight[i]; a minimum-cost perfect matching then places relevant sources in
high-attention positions. The s best orderings come from exact solution-space
partitioning: emit the pool's cheapest subproblem, then split it on the
emitted solution's pairs into child subproblems with forced/forbidden cells.

Equal-cost solutions (within 1e-9) are emitted in lexicographic order of the
permutation array. That requires the representative of an emitted subproblem
to be the lexicographically smallest of its own optima, which is recovered
from the optimal dual values: the optima of a subproblem are exactly the
perfect matchings of its zero-reduced-cost graph.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InfeasibleMatrix, InvalidInput, NonFiniteEntry, NonSquareMatrix
from .model import ContextSequence, Permutation, RelevanceVector

TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AttentionProfile:
    """Expected attention mass per context position."""

    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights:
            raise InvalidInput("attention profile is empty")
        if any(w <= 0 for w in self.weights):
            raise InvalidInput("attention weights must be positive")

    def to_jsonable(self) -> list[float]:
        return list(self.weights)


def v_shaped_profile(k: int) -> AttentionProfile:
    """Endpoints 1.0, middle 0.5, linear in between; [1.0] for k = 1."""
    if k < 1:
        raise InvalidInput("profile needs at least one position", k=k)
    if k == 1:
        return AttentionProfile((1.0,))
    weights = tuple(0.5 + abs(2 * i - (k - 1)) / (2 * (k - 1)) for i in range(k))
    return AttentionProfile(weights)


class AssignmentCostMatrix:
    """Validated square finite cost matrix; cost[i][j] assigns source j to position i."""

    def __init__(self, cost):
        arr = np.asarray(cost, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise NonSquareMatrix("cost matrix must be square and non-empty",
                                  shape=list(arr.shape))
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntry("cost matrix entries must be finite")
        arr.setflags(write=False)
        self.cost = arr

    @classmethod
    def from_relevance(cls, relevance: Sequence[float],
                       weights: Sequence[float]) -> "AssignmentCostMatrix":
        if len(relevance) != len(weights):
            raise InvalidInput("relevance and weights differ in length")
        return cls(-np.outer(np.asarray(weights, dtype=np.float64),
                             np.asarray(relevance, dtype=np.float64)))

    @property
    def size(self) -> int:
        return int(self.cost.shape[0])

    def to_jsonable(self) -> dict:
        return {"cost": self.cost.tolist()}


@dataclass(frozen=True)
class RankedAssignment:
    """One position-to-source matching; score is the maximization-form total."""

    permutation: Permutation
    score: float
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidInput("rank must be positive")

    def to_jsonable(self) -> dict:
        return {"permutation": self.permutation.to_jsonable(),
                "score": self.score, "rank": self.rank}


def _lap_with_duals(a: np.ndarray) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Shortest-augmenting-path assignment with potentials, O(n^3).

    Returns (order, u, v) where order[i] is the column matched to row i and
    the duals satisfy a[i, j] - u[i] - v[j] >= 0 with equality on matched
    pairs. Entries may be +inf (forbidden); an all-forbidden alternative set
    raises InfeasibleMatrix.
    """
    n = a.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = a[i0 - 1, :] - u[i0] - v[1:]
            unused = ~used[1:]
            improve = unused & (cur < minv[1:])
            minv_view = minv[1:]
            way_view = way[1:]
            minv_view[improve] = cur[improve]
            way_view[improve] = j0
            masked = np.where(unused, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            if not np.isfinite(delta):
                raise InfeasibleMatrix("no perfect matching avoids the forbidden cells")
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    order = [0] * n
    for j in range(1, n + 1):
        order[p[j] - 1] = j - 1
    return order, u[1:].copy(), v[1:].copy()


def _lex_min_argmin(a: np.ndarray, tol: float = TIE_TOLERANCE) -> tuple[tuple[int, ...], float]:
    """Lexicographically smallest minimum-cost assignment of a (possibly inf) matrix.

    Optimal assignments are the perfect matchings of the zero-reduced-cost
    graph, so positions are fixed greedily in ascending order to the smallest
    source that still extends to a perfect matching of that graph.
    """
    n = a.shape[0]
    order, u, v = _lap_with_duals(a)
    zero = np.isfinite(a) & (a - u[:, None] - v[None, :] <= tol)
    match_row = list(order)
    match_col = [0] * n
    for i, j in enumerate(order):
        match_col[j] = i
    fixed_cols = [False] * n
    result = [0] * n

    def rematch(row: int, banned_col: int, visited: set[int]) -> bool:
        for col in range(n):
            if fixed_cols[col] or col == banned_col or col in visited or not zero[row, col]:
                continue
            visited.add(col)
            owner = match_col[col]
            if owner == -1 or rematch(owner, banned_col, visited):
                match_col[col] = row
                match_row[row] = col
                return True
        return False

    for i in range(n):
        for j in range(n):
            if fixed_cols[j] or not zero[i, j]:
                continue
            if match_row[i] == j:
                break
            j_old = match_row[i]
            i_old = match_col[j]
            match_row[i] = j
            match_col[j] = i
            match_col[j_old] = -1
            match_row[i_old] = -1
            if rematch(i_old, j, set()):
                break
            match_row[i] = j_old
            match_col[j_old] = i
            match_row[i_old] = j
            match_col[j] = i_old
        j = match_row[i]
        fixed_cols[j] = True
        result[i] = j

    total = float(sum(a[i, result[i]] for i in range(n)))
    return tuple(result), total


@dataclass(frozen=True)
class _Subproblem:
    forced: tuple[tuple[int, int], ...]
    forbidden: frozenset[tuple[int, int]]
    solution: tuple[int, ...]
    cost: float
    refined: bool = False


def _reduced_matrix(a: np.ndarray, forced: tuple[tuple[int, int], ...],
                    forbidden: frozenset[tuple[int, int]],
                    ) -> tuple[np.ndarray, list[int], list[int]]:
    n = a.shape[0]
    forced_rows = {r for r, _ in forced}
    forced_cols = {c for _, c in forced}
    free_rows = [r for r in range(n) if r not in forced_rows]
    free_cols = [c for c in range(n) if c not in forced_cols]
    sub = a[np.ix_(free_rows, free_cols)].copy()
    row_index = {r: i for i, r in enumerate(free_rows)}
    col_index = {c: i for i, c in enumerate(free_cols)}
    for r, c in forbidden:
        if r in row_index and c in col_index:
            sub[row_index[r], col_index[c]] = np.inf
    return sub, free_rows, free_cols


def _assemble(a: np.ndarray, forced: tuple[tuple[int, int], ...],
              free_rows: list[int], free_cols: list[int],
              sub_order: Sequence[int]) -> tuple[tuple[int, ...], float]:
    n = a.shape[0]
    order = [0] * n
    for r, c in forced:
        order[r] = c
    for local_row, local_col in enumerate(sub_order):
        order[free_rows[local_row]] = free_cols[local_col]
    total = float(sum(a[i, order[i]] for i in range(n)))
    return tuple(order), total


def _solve_subproblem(a: np.ndarray, forced: tuple[tuple[int, int], ...],
                      forbidden: frozenset[tuple[int, int]]) -> _Subproblem | None:
    if len(forced) == a.shape[0]:
        order, total = _assemble(a, forced, [], [], [])
        return _Subproblem(forced, forbidden, order, total)
    sub, free_rows, free_cols = _reduced_matrix(a, forced, forbidden)
    try:
        rows, cols = linear_sum_assignment(sub)
    except ValueError:
        return None
    sub_order = [0] * len(free_rows)
    for r, c in zip(rows, cols):
        sub_order[int(r)] = int(c)
    order, total = _assemble(a, forced, free_rows, free_cols, sub_order)
    if not np.isfinite(total):
        return None
    return _Subproblem(forced, forbidden, order, total)


def _refine(a: np.ndarray, entry: _Subproblem) -> _Subproblem:
    """Replace the representative solution with the subproblem's lex-min optimum."""
    if len(entry.forced) == a.shape[0]:
        return replace(entry, refined=True)
    sub, free_rows, free_cols = _reduced_matrix(a, entry.forced, entry.forbidden)
    sub_order, _ = _lex_min_argmin(sub)
    order, total = _assemble(a, entry.forced, free_rows, free_cols, sub_order)
    return replace(entry, solution=order, cost=total, refined=True)


def _split(a: np.ndarray, entry: _Subproblem) -> list[_Subproblem]:
    n = a.shape[0]
    forced_rows = {r for r, _ in entry.forced}
    free_positions = [r for r in range(n) if r not in forced_rows]
    children = []
    accumulated = list(entry.forced)
    for position in free_positions:
        pair = (position, entry.solution[position])
        child = _solve_subproblem(a, tuple(accumulated),
                                  entry.forbidden | {pair})
        if child is not None:
            children.append(child)
        accumulated.append(pair)
    return children


def _as_matrix(cost) -> np.ndarray:
    if isinstance(cost, AssignmentCostMatrix):
        return cost.cost
    return AssignmentCostMatrix(cost).cost


def solve_best_assignment(cost) -> RankedAssignment:
    """Minimum-total-cost perfect matching; equal costs prefer the lex-smaller order."""
    a = _as_matrix(cost)
    order, total = _lex_min_argmin(a)
    return RankedAssignment(permutation=Permutation(order), score=-total, rank=1)


def solve_s_best_assignments(cost, s: int) -> list[RankedAssignment]:
    """The min(s, k!) cheapest assignments in (cost, lex order) sequence.

    Exact ranking by partitioning: each emitted solution splits its subproblem
    into at most k children, each solved fresh; requests beyond k! distinct
    assignments truncate rather than fail.
    """
    if s < 1:
        raise InvalidInput("s must be positive", s=s)
    a = _as_matrix(cost)
    root = _solve_subproblem(a, (), frozenset())
    if root is None:
        raise InfeasibleMatrix("no assignment exists")
    pool = [root]
    emitted: list[_Subproblem] = []
    while pool and len(emitted) < s:
        floor = min(entry.cost for entry in pool)
        for i, entry in enumerate(pool):
            if entry.cost <= floor + TIE_TOLERANCE and not entry.refined:
                pool[i] = _refine(a, entry)
        tied = [i for i, entry in enumerate(pool) if entry.cost <= floor + TIE_TOLERANCE]
        best_i = min(tied, key=lambda i: (pool[i].cost, pool[i].solution))
        best = pool.pop(best_i)
        emitted.append(best)
        pool.extend(_split(a, best))
    return [RankedAssignment(permutation=Permutation(entry.solution),
                             score=-entry.cost, rank=rank)
            for rank, entry in enumerate(emitted, start=1)]


def optimal_permutations(ctx: ContextSequence, relevance: RelevanceVector,
                         profile: AttentionProfile, s: int) -> list[RankedAssignment]:
    """The s orderings that best place relevant sources in high-attention positions."""
    relevance.check_covers(ctx)
    if len(profile.weights) != ctx.k:
        raise InvalidInput("profile length does not match the context size",
                           profile=len(profile.weights), k=ctx.k)
    shares = [relevance.scores[d] for d in ctx.doc_ids]
    cost = AssignmentCostMatrix.from_relevance(shares, profile.weights)
    return solve_s_best_assignments(cost, s)
