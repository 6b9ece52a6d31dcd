"""Weak and lambda-local splitting of bipartite graphs.

A splitting colors the right side red/blue so that every left node sees
enough of both colors. The sequential-local solver decomposes the conflict
graph of the right side and colors each cluster with a discrepancy search.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from .decomposition import NetworkDecomposition, floor_log2, slocal_ball_growing
from .engine import ExecutionTrace, NodeContext, Ordering, Phase, SlocalRun, node_rng
from .errors import InfeasibleError, InvalidArgument, InvariantError, OracleFailure
from .graphs import BipartiteGraph

__all__ = [
    "RED",
    "BLUE",
    "SplitColoring",
    "SplitReport",
    "Constraint",
    "SplitRunResult",
    "as_fraction",
    "verify_lambda_split",
    "verify_weak_split",
    "random_split",
    "balanced_coloring_search",
    "discrepancy_bound",
    "slocal_lambda_split",
    "slocal_lambda_split_run",
    "slocal_weak_split",
    "partition_neighborhood",
    "reduce_lambda_to_weak",
]

RED = "red"
BLUE = "blue"


def as_fraction(value: Fraction | int | float | str) -> Fraction:
    """Exact rational; floats go through their shortest repr so 0.3 stays 3/10."""
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class SplitColoring:
    color_of: tuple[str, ...]

    def __post_init__(self) -> None:
        bad = [c for c in self.color_of if c not in (RED, BLUE)]
        if bad:
            raise InvalidArgument(f"split colors must be red or blue, got {bad[0]!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "red": [v for v, c in enumerate(self.color_of) if c == RED],
            "blue": [v for v, c in enumerate(self.color_of) if c == BLUE],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], right: int) -> "SplitColoring":
        colors: list[str | None] = [None] * right
        for key in (RED, BLUE):
            for v in data.get(key, []):
                if not 0 <= v < right or colors[v] is not None:
                    raise InvalidArgument(f"right node {v} invalid or colored twice")
                colors[v] = key
        if None in colors:
            raise InvalidArgument(f"right node {colors.index(None)} is uncolored")
        return cls(tuple(colors))  # type: ignore[arg-type]


@dataclass
class SplitReport:
    valid: bool
    counts: list[dict[str, int]]
    violators: list[int] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"valid": self.valid, "violators": self.violators, "counts": self.counts}


def _check(b: BipartiteGraph, coloring: SplitColoring, need_of: Callable[[int], int]) -> SplitReport:
    if len(coloring.color_of) != b.right:
        raise InvalidArgument("coloring does not cover the right side")
    counts, violators = [], []
    for u in range(b.left):
        nbrs = b.left_neighbors(u)
        red = sum(1 for v in nbrs if coloring.color_of[v] == RED)
        blue = len(nbrs) - red
        need = need_of(len(nbrs))
        counts.append({"left": u, "degree": len(nbrs), "red": red, "blue": blue, "need": need})
        if min(red, blue) < need:
            violators.append(u)
    return SplitReport(not violators, counts, violators)


def verify_lambda_split(b: BipartiteGraph, coloring: SplitColoring, lam: Fraction | float | str) -> SplitReport:
    """Every left node needs at least floor(lam * degree) neighbors of each color."""
    lam = as_fraction(lam)
    if not 0 <= lam <= Fraction(1, 2):
        raise InvalidArgument("lambda must lie in [0, 1/2]")
    return _check(b, coloring, lambda d: math.floor(lam * d))


def verify_weak_split(b: BipartiteGraph, coloring: SplitColoring) -> SplitReport:
    """Every left node needs a neighbor of each color."""
    return _check(b, coloring, lambda d: 1)


def random_split(b: BipartiteGraph, seed: int) -> SplitColoring:
    """Each right node is red with probability 1/2, from its own random stream."""
    return SplitColoring(tuple(RED if node_rng(seed, v).random() < 0.5 else BLUE for v in range(b.right)))


# ---------------------------------------------------------------------------
# Discrepancy search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """|#red - #blue| over ``members`` at most ``bound``, with optional per-color minimums.

    ``offset`` is the red-minus-blue count already fixed outside the
    members; only the improvement pass looks at it.
    """

    members: tuple[int, ...]
    bound: float
    min_red: int = 0
    min_blue: int = 0
    key: Any = None
    offset: int = 0

    def satisfied(self, red_of: Mapping[int, bool]) -> bool:
        red = sum(1 for v in self.members if red_of[v])
        blue = len(self.members) - red
        return abs(red - blue) <= self.bound and red >= self.min_red and blue >= self.min_blue


def _all_ok(constraints: Sequence[Constraint], red_of: Mapping[int, bool]) -> bool:
    return all(c.satisfied(red_of) for c in constraints)


def _estimator_choice(nodes: list[int], constraints: Sequence[Constraint]) -> dict[int, bool]:
    """Conditional expectations on sum_c (e^{tS} + e^{-tS}) cosh(t)^free / e^{t*bound}."""
    by_node: dict[int, list[int]] = {v: [] for v in nodes}
    for i, c in enumerate(constraints):
        for v in c.members:
            by_node[v].append(i)
    t = [min(1.0, c.bound / max(len(c.members), 1)) if c.bound > 0 else 1.0 for c in constraints]
    partial = [0] * len(constraints)
    free = [len(c.members) for c in constraints]

    def term(i: int, s: int, f: int) -> float:
        ti = t[i]
        lc = math.log(math.cosh(ti))
        base = f * lc - ti * constraints[i].bound
        return math.exp(min(base + ti * s, 700.0)) + math.exp(min(base - ti * s, 700.0))

    red_of: dict[int, bool] = {}
    for v in nodes:
        plus = sum(term(i, partial[i] + 1, free[i] - 1) for i in by_node[v])
        minus = sum(term(i, partial[i] - 1, free[i] - 1) for i in by_node[v])
        red_of[v] = plus <= minus
        for i in by_node[v]:
            partial[i] += 1 if red_of[v] else -1
            free[i] -= 1
    return red_of


def _violation(c: Constraint, red: int) -> float:
    size = len(c.members)
    return max(0.0, abs(2 * red - size) - c.bound) + max(0, c.min_red - red) + max(0, c.min_blue - size + red)


def _repair(
    nodes: list[int], constraints: Sequence[Constraint], start: dict[int, bool], rng: random.Random, steps: int
) -> dict[int, bool] | None:
    """Walk-style local search on the total constraint violation."""
    by_node: dict[int, list[int]] = {v: [] for v in nodes}
    for i, c in enumerate(constraints):
        for v in c.members:
            by_node[v].append(i)
    red_of = dict(start)
    red = [sum(1 for v in c.members if red_of[v]) for c in constraints]
    for _ in range(steps):
        bad = [i for i, c in enumerate(constraints) if _violation(c, red[i]) > 0]
        if not bad:
            return red_of
        target = constraints[rng.choice(bad)]

        def delta(v: int) -> float:
            step = -1 if red_of[v] else 1
            return sum(_violation(constraints[i], red[i] + step) - _violation(constraints[i], red[i]) for i in by_node[v])

        if rng.random() < 0.2:
            v = rng.choice(target.members)
        else:
            v = min(target.members, key=lambda x: (delta(x), x))
        step = -1 if red_of[v] else 1
        for i in by_node[v]:
            red[i] += step
        red_of[v] = not red_of[v]
    return red_of if _all_ok(constraints, red_of) else None


def _exhaustive(nodes: list[int], constraints: Sequence[Constraint]) -> dict[int, bool] | None:
    by_node: dict[int, list[int]] = {v: [] for v in nodes}
    for i, c in enumerate(constraints):
        for v in c.members:
            by_node[v].append(i)
    red = [0] * len(constraints)
    blue = [0] * len(constraints)
    rem = [len(c.members) for c in constraints]
    red_of: dict[int, bool] = {}

    def feasible(i: int) -> bool:
        c = constraints[i]
        if abs(red[i] - blue[i]) - rem[i] > c.bound:
            return False
        return red[i] + rem[i] >= c.min_red and blue[i] + rem[i] >= c.min_blue

    def dfs(j: int) -> bool:
        if j == len(nodes):
            return True
        v = nodes[j]
        for choice in (True, False):
            for i in by_node[v]:
                rem[i] -= 1
                if choice:
                    red[i] += 1
                else:
                    blue[i] += 1
            if all(feasible(i) for i in by_node[v]):
                red_of[v] = choice
                if dfs(j + 1):
                    return True
            for i in by_node[v]:
                rem[i] += 1
                if choice:
                    red[i] -= 1
                else:
                    blue[i] -= 1
        return False

    return dict(red_of) if dfs(0) else None


def _improve(nodes: list[int], constraints: Sequence[Constraint], red_of: dict[int, bool]) -> dict[int, bool]:
    """Single flips that keep every constraint satisfied and lower sum |offset + #red - #blue|."""
    by_node: dict[int, list[int]] = {v: [] for v in nodes}
    for i, c in enumerate(constraints):
        for v in c.members:
            by_node[v].append(i)
    red = [sum(1 for v in c.members if red_of[v]) for c in constraints]
    size = [len(c.members) for c in constraints]
    improved = True
    while improved:
        improved = False
        for v in nodes:
            step = -1 if red_of[v] else 1
            gain = 0
            ok = True
            for i in by_node[v]:
                c = constraints[i]
                r2 = red[i] + step
                gain += abs(c.offset + 2 * red[i] - size[i]) - abs(c.offset + 2 * r2 - size[i])
                if abs(2 * r2 - size[i]) > c.bound or r2 < c.min_red or size[i] - r2 < c.min_blue:
                    ok = False
                    break
            if ok and gain > 0:
                for i in by_node[v]:
                    red[i] += step
                red_of[v] = not red_of[v]
                improved = True
    return red_of


def balanced_coloring_search(
    nodes: Iterable[int],
    constraints: Sequence[Constraint],
    retries: int = 200,
    seed: int | random.Random = 0,
    improve: bool = True,
    exhaustive_limit: int = 20,
) -> dict[int, str]:
    """Red/blue assignment of ``nodes`` meeting every constraint.

    Random draws come first, then conditional expectations on an
    exponential-moment estimator, then a local-search repair of that
    estimator choice, then exhaustive search when at most
    ``exhaustive_limit`` nodes are constrained. Unconstrained nodes are red.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(f"balance:{seed}")
    nodes = sorted(set(nodes))
    constrained = sorted({v for c in constraints for v in c.members})
    if set(constrained) - set(nodes):
        raise InvalidArgument("constraint members must be cluster nodes")
    found: dict[int, bool] | None = None
    for _ in range(retries):
        draw = {v: rng.random() < 0.5 for v in constrained}
        if _all_ok(constraints, draw):
            found = draw
            break
    if found is None:
        draw = _estimator_choice(constrained, constraints)
        if _all_ok(constraints, draw):
            found = draw
        else:
            found = _repair(constrained, constraints, draw, rng, 50 * len(constrained) + 100)
    if found is None and len(constrained) <= exhaustive_limit:
        found = _exhaustive(constrained, constraints)
    if found is None:
        raise InfeasibleError(f"no coloring of {len(constrained)} nodes meets the discrepancy bounds")
    if improve:
        found = _improve(constrained, constraints, found)
    return {v: RED if found.get(v, True) else BLUE for v in nodes}


def discrepancy_bound(alpha: float, size: int, log_n: float, clusters: int = 1) -> float:
    """alpha * (sqrt(clusters * size * ln n) + clusters * ln n)."""
    return alpha * (math.sqrt(clusters * size * log_n) + clusters * log_n)


# ---------------------------------------------------------------------------
# Sequential-local solver
# ---------------------------------------------------------------------------


@dataclass
class SplitRunResult:
    coloring: SplitColoring
    trace: ExecutionTrace
    decomposition: NetworkDecomposition
    clusters_touched: list[int]
    discrepancy: list[int]
    achieved_lambda: float | None


def _coloring_phase(alpha, log_n, need, retries, reach):
    def procedure(ctx: NodeContext) -> None:
        if ctx.memory.get("cluster") != ctx.node:
            return
        view = ctx.query(ctx.memory["radius"] + 1)
        members = sorted(z for z in view.nodes if view.memory(z).get("cluster") == ctx.node)
        inside = set(members)
        groups: dict[int, list[int]] = {}
        for z in members:
            for u in view.input(z):
                groups.setdefault(u, []).append(z)
        constraints = []
        for u in sorted(groups):
            part = groups[u]
            bound = discrepancy_bound(alpha, len(part), log_n)
            min_red = min_blue = 0
            outside = [z for z in view.nodes if z not in inside and u in view.input(z)]
            fixed = [view.memory(z).get("split") for z in outside]
            offset = sum(1 if c == RED else -1 for c in fixed if c is not None)
            if need is not None and need[u] > 0 and None not in fixed:
                # last cluster touching u: it must make up what is still missing
                min_red = max(0, need[u] - sum(1 for c in fixed if c == RED))
                min_blue = max(0, need[u] - sum(1 for c in fixed if c == BLUE))
            constraints.append(Constraint(tuple(part), bound, min_red, min_blue, u, offset))
        chosen = balanced_coloring_search(members, constraints, retries, ctx.rng)
        for z in members:
            ctx.write(z, "split", chosen[z])

    return Phase(procedure, reach + 1, reach)


def slocal_lambda_split_run(
    b: BipartiteGraph,
    order: Ordering | None = None,
    alpha: float = 4.0,
    seed: int = 0,
    retries: int = 200,
    need: Sequence[int] | None = None,
) -> SplitRunResult:
    """Decompose the conflict graph, then let each cluster center color its cluster.

    Each (left node, cluster) pair gets discrepancy at most
    ``alpha * (sqrt(s ln n) + ln n)`` with ``s`` the left node's neighbors in
    the cluster and ``n`` the total node count. A cluster center sees the
    colors of earlier clusters one hop outside its own and prefers
    colorings that balance them. With ``need`` given, the last cluster
    touching left node ``u`` must supply whatever ``u`` still lacks of
    ``need[u]`` neighbors per color.
    """
    order = Ordering.identity(b.right) if order is None else order
    log_n = math.log(b.node_count) if b.node_count > 1 else 0.0
    if b.right == 0:
        from .graphs import Graph

        run = SlocalRun(Graph.empty(0), order, seed, [])
        empty = NetworkDecomposition((), (), ())
        return SplitRunResult(SplitColoring(()), run.trace(), empty, [0] * b.left, [0] * b.left, None)
    conflict = b.conflict_graph()
    inputs = [tuple(b.right_neighbors(v)) for v in range(b.right)]
    run = SlocalRun(conflict, order, seed, inputs)
    decomp = slocal_ball_growing(run)
    reach = floor_log2(b.right)
    run.run_phase(_coloring_phase(alpha, log_n, need, retries, reach))
    coloring = SplitColoring(tuple(s.memory.get("split", RED) for s in run.states))
    touched, discrepancy = [], []
    worst_lambda: float | None = None
    for u in range(b.left):
        nbrs = b.left_neighbors(u)
        parts: dict[int, list[int]] = {}
        for v in nbrs:
            parts.setdefault(decomp.cluster_of[v], []).append(v)
        for c, part in parts.items():
            red = sum(1 for v in part if coloring.color_of[v] == RED)
            if abs(2 * red - len(part)) > discrepancy_bound(alpha, len(part), log_n):
                raise InvariantError(f"left node {u} exceeds the per-cluster bound in cluster {c}")
        red = sum(1 for v in nbrs if coloring.color_of[v] == RED)
        disc = abs(2 * red - len(nbrs))
        k = len(parts)
        if disc > discrepancy_bound(alpha, len(nbrs), log_n, k) + 1e-9:
            raise InvariantError(f"left node {u} exceeds the combined discrepancy bound")
        if need is not None and min(red, len(nbrs) - red) < need[u]:
            raise InfeasibleError(f"left node {u} did not receive {need[u]} neighbors of each color")
        touched.append(k)
        discrepancy.append(disc)
        if nbrs:
            lam = 0.5 - discrepancy_bound(alpha, len(nbrs), log_n, k) / (2 * len(nbrs))
            worst_lambda = lam if worst_lambda is None else min(worst_lambda, lam)
    return SplitRunResult(coloring, run.trace(), decomp, touched, discrepancy, worst_lambda)


def slocal_lambda_split(b: BipartiteGraph, order: Ordering | None = None, **params: Any) -> tuple[SplitColoring, ExecutionTrace]:
    res = slocal_lambda_split_run(b, order, **params)
    return res.coloring, res.trace


def slocal_weak_split(b: BipartiteGraph, order: Ordering | None = None, **params: Any) -> SplitColoring:
    """Sequential-local solver asked for one neighbor of each color per left node."""
    return slocal_lambda_split_run(b, order, need=[1] * b.left, **params).coloring


# ---------------------------------------------------------------------------
# Reduction from lambda-splitting to weak splitting
# ---------------------------------------------------------------------------


def partition_neighborhood(nbrs: Sequence[int], delta: int) -> list[list[int]]:
    """Contiguous parts of sizes in (delta/2, delta] when possible.

    Uses ceil(d/delta) near-equal parts; if that leaves a part of size at
    most delta/2 (no valid partition exists, e.g. d=5, delta=4), falls back
    to floor(d/delta) near-equal parts, each of size at least delta.
    """
    d = len(nbrs)
    if delta < 1 or d < delta:
        raise InvalidArgument("need 1 <= delta <= degree")
    k = -(-d // delta)
    if 2 * (d // k) <= delta:
        k = d // delta
    base, extra = divmod(d, k)
    parts, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        parts.append(list(nbrs[start : start + size]))
        start += size
    return parts


def reduce_lambda_to_weak(
    b: BipartiteGraph, delta: int, weak_oracle: Callable[[BipartiteGraph], SplitColoring]
) -> SplitColoring:
    """1/delta-splitting of ``b`` from a weak splitter of the partitioned graph."""
    if delta < 1:
        raise InvalidArgument("delta must be positive")
    parts: list[list[int]] = []
    for u in range(b.left):
        nbrs = sorted(b.left_neighbors(u))
        if len(nbrs) >= delta:
            parts.extend(partition_neighborhood(nbrs, delta))
    derived = BipartiteGraph.from_neighborhoods(b.right, parts)
    coloring = weak_oracle(derived)
    if len(coloring.color_of) != b.right or not verify_weak_split(derived, coloring).valid:
        raise OracleFailure("weak splitter output does not verify on the partitioned graph")
    if not verify_lambda_split(b, coloring, Fraction(1, delta)).valid:
        raise InvariantError("composed coloring fails 1/delta verification")
    return coloring
