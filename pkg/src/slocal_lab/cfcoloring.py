"""Conflict-free multicoloring of hypergraphs.

Three solvers: a zero-round random one, a multi-phase sequential-local
ball-growing one, and a low-rank one built on defective colorings of the
hyperedge multigraph. :func:`verify_cf` checks any of them.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .engine import ExecutionTrace, NodeContext, Ordering, Phase, SlocalRun, node_rng
from .errors import InfeasibleError, InvalidArgument, InvariantError
from .graphs import Hypergraph

__all__ = [
    "MultiColoring",
    "CFReport",
    "Multigraph",
    "DefectiveColoring",
    "LowRankResult",
    "SlocalCFResult",
    "verify_cf",
    "random_cf",
    "greedy_defective_coloring",
    "lowrank_cf",
    "lowrank_cf_run",
    "unique_subset_search",
    "slocal_cf",
    "slocal_cf_run",
]


@dataclass(frozen=True)
class MultiColoring:
    colors: tuple[tuple[int, ...], ...]
    q: int

    def __post_init__(self) -> None:
        for v, cs in enumerate(self.colors):
            if not cs:
                raise InvalidArgument(f"node {v} has an empty color set")
            if list(cs) != sorted(set(cs)) or cs[0] < 1 or cs[-1] > self.q:
                raise InvalidArgument(f"node {v} has an invalid color set {cs}")

    @classmethod
    def from_sets(cls, sets: Sequence[Iterable[int]], q: int | None = None) -> "MultiColoring":
        colors = tuple(tuple(sorted(set(s))) for s in sets)
        top = max((c[-1] for c in colors if c), default=1)
        return cls(colors, top if q is None else q)

    @property
    def used_colors(self) -> int:
        return len({c for cs in self.colors for c in cs})

    def to_json(self) -> dict[str, Any]:
        return {"q": self.q, "colors": {str(v): list(cs) for v, cs in enumerate(self.colors)}}

    @classmethod
    def from_json(cls, data: Mapping[str, Any], n: int) -> "MultiColoring":
        raw = data["colors"]
        sets = [raw.get(str(v), []) for v in range(n)]
        return cls.from_sets(sets, int(data["q"]))


@dataclass
class CFReport:
    valid: bool
    witnesses: list[int | None]
    violations: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"valid": self.valid, "violations": self.violations}


def verify_cf(h: Hypergraph, coloring: MultiColoring) -> CFReport:
    """Each hyperedge needs a color held by exactly one of its members."""
    if len(coloring.colors) != h.n:
        raise InvalidArgument("coloring does not cover every node")
    witnesses: list[int | None] = []
    violations = []
    for i, e in enumerate(h.edges):
        hist = Counter(c for v in e for c in coloring.colors[v])
        unique = [c for c, cnt in hist.items() if cnt == 1]
        w = min(unique) if unique else None
        witnesses.append(w)
        if w is None:
            violations.append({"edge": i, "members": list(e)})
    return CFReport(not violations, witnesses, violations)


def random_cf(h: Hypergraph, q: int, seed: int, k: int | None = None) -> MultiColoring:
    """Every node takes each of the colors 1..q-1 with probability 1/k; empty sets get q."""
    if q < 2:
        raise InvalidArgument("q must be at least 2")
    k = h.min_edge_size if k is None else k
    if k < 1:
        k = 1
    p = 1.0 / k
    sets = []
    for v in range(h.n):
        rng = node_rng(seed, v)
        s = [c for c in range(1, q) if rng.random() < p]
        sets.append(s or [q])
    return MultiColoring.from_sets(sets, q)


# ---------------------------------------------------------------------------
# Defective coloring of multigraphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Multigraph:
    """Undirected multigraph given by edge multiplicities on node pairs."""

    n: int
    weights: Mapping[tuple[int, int], int]

    @classmethod
    def from_hyperedges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Multigraph":
        w: Counter = Counter()
        for e in edges:
            for i, a in enumerate(e):
                for b in e[i + 1 :]:
                    w[(a, b) if a < b else (b, a)] += 1
        return cls(n, dict(w))

    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for (a, b), m in sorted(self.weights.items()):
            adj[a].append((b, m))
            adj[b].append((a, m))
        return adj

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for (a, b), m in self.weights.items():
            deg[a] += m
            deg[b] += m
        return deg

    @property
    def max_degree(self) -> int:
        return max(self.degrees(), default=0)


@dataclass(frozen=True)
class DefectiveColoring:
    color_of: tuple[int, ...]
    defect: int


def _defects(adj: list[list[tuple[int, int]]], color: Sequence[int]) -> list[int]:
    return [sum(m for w, m in adj[v] if color[w] == color[v]) for v in range(len(adj))]


def greedy_defective_coloring(mg: Multigraph, q: int, nodes: Iterable[int] | None = None) -> DefectiveColoring:
    """Greedy ascending-id coloring followed by local repair.

    The greedy pass picks the color with the least weight among colored
    neighbors. The repair pass then moves any node whose same-color weight
    exceeds floor(deg/q) to its lightest color; each move strictly lowers
    the total monochromatic weight, so it terminates with every node's
    defect at most floor(deg/q). ``nodes`` restricts which nodes are colored
    (others keep color 0 and are ignored).
    """
    if q < 1:
        raise InvalidArgument("q must be at least 1")
    adj = mg.adjacency()
    deg = mg.degrees()
    active = sorted(range(mg.n) if nodes is None else set(nodes))
    color = [0] * mg.n

    def load(v: int) -> list[int]:
        counts = [0] * (q + 1)
        for w, m in adj[v]:
            if color[w]:
                counts[color[w]] += m
        return counts

    for v in active:
        counts = load(v)
        color[v] = min(range(1, q + 1), key=lambda c: (counts[c], c))
    changed = True
    while changed:
        changed = False
        for v in active:
            counts = load(v)
            if counts[color[v]] > deg[v] // q:
                color[v] = min(range(1, q + 1), key=lambda c: (counts[c], c))
                changed = True
    defects = _defects(adj, color)
    defect = max((defects[v] for v in active), default=0)
    delta = max((deg[v] for v in active), default=0)
    if defect > math.ceil(delta / q):
        raise InvariantError(f"defect {defect} exceeds ceil({delta}/{q})")
    return DefectiveColoring(tuple(color), defect)


# ---------------------------------------------------------------------------
# Low-rank solver
# ---------------------------------------------------------------------------


@dataclass
class LowRankResult:
    sets: list[list[int]]
    deltas: list[int]
    palette_per_phase: int

    @property
    def phases(self) -> int:
        return len(self.deltas)

    @property
    def colors_used(self) -> int:
        return self.phases * self.palette_per_phase


def lowrank_cf_run(h: Hypergraph, offset: int = 0, kappa: int | None = None) -> LowRankResult:
    """Phase loop of the low-rank solver without the trailing default color.

    Phase ``i`` uses the fresh palette ``offset + (i-1)*2k + 1 .. offset + i*2k``
    (k the rank) and only colors nodes that still lie in an unresolved edge.
    """
    kappa = h.rank if kappa is None else kappa
    sets: list[list[int]] = [[] for _ in range(h.n)]
    q = 2 * max(kappa, 1)
    remaining = list(range(h.m))
    deltas: list[int] = []
    base = offset
    while remaining:
        edges = [h.edges[i] for i in remaining]
        mg = Multigraph.from_hyperedges(h.n, edges)
        delta = mg.max_degree
        if deltas and 2 * delta > deltas[-1]:
            raise InvariantError(f"multigraph degree {delta} did not halve from {deltas[-1]}")
        deltas.append(delta)
        nodes = sorted({v for e in edges for v in e})
        dc = greedy_defective_coloring(mg, q, nodes)
        for v in nodes:
            sets[v].append(base + dc.color_of[v])
        still = []
        for i in remaining:
            hist = Counter(dc.color_of[v] for v in h.edges[i])
            if not any(cnt == 1 for cnt in hist.values()):
                still.append(i)
        remaining = still
        base += q
    if deltas and deltas[0] > 0 and len(deltas) > deltas[0].bit_length():
        raise InvariantError("low-rank solver used more than floor(log2 D)+1 phases")
    return LowRankResult(sets, deltas, q)


def lowrank_cf(h: Hypergraph) -> MultiColoring:
    """Conflict-free multicoloring for hypergraphs of small rank."""
    res = lowrank_cf_run(h)
    default = res.colors_used + 1
    needs_default = any(not s for s in res.sets)
    sets = [s or [default] for s in res.sets]
    return MultiColoring.from_sets(sets, default if needs_default else max(res.colors_used, 1))


# ---------------------------------------------------------------------------
# Sequential-local ball-growing solver
# ---------------------------------------------------------------------------


def _unique_count(edges: Sequence[Sequence[int]], chosen: set[int]) -> int:
    return sum(1 for e in edges if sum(1 for v in e if v in chosen) == 1)


def _improve(nodes: list[int], edges: Sequence[Sequence[int]], chosen: set[int]) -> set[int]:
    """Single-node flips that raise the uniquely-hit count, until none does."""
    inc: dict[int, list[int]] = {v: [] for v in nodes}
    for i, e in enumerate(edges):
        for v in e:
            inc[v].append(i)
    hits = [sum(1 for v in e if v in chosen) for e in edges]
    improved = True
    while improved:
        improved = False
        for v in nodes:
            step = -1 if v in chosen else 1
            gain = 0
            for i in inc[v]:
                before, after = hits[i] == 1, hits[i] + step == 1
                gain += after - before
            if gain > 0:
                for i in inc[v]:
                    hits[i] += step
                if step > 0:
                    chosen.add(v)
                else:
                    chosen.discard(v)
                improved = True
    return chosen


def _unique_probability(fixed_in: int, free: int, p: float) -> float:
    if fixed_in == 1:
        return (1 - p) ** free
    if fixed_in == 0 and free:
        return free * p * (1 - p) ** (free - 1)
    return 0.0


def unique_subset_search(
    nodes: Iterable[int],
    edges: Sequence[Sequence[int]],
    k: int,
    theta: float,
    retries: int,
    seed: int | random.Random,
    improve: bool = True,
) -> list[int]:
    """Subset hitting at least ``theta * len(edges)`` edges exactly once.

    Random draws (inclusion probability 1/k) come first; if all fail, the
    method of conditional expectations is run on the expected number of
    uniquely hit edges. With ``improve`` the accepted subset is then
    refined by single-node flips, which only raises the count.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(f"subset:{seed}")
    nodes = sorted(set(nodes))
    if not edges:
        return []
    need = Fraction(theta).limit_denominator(10**6) * len(edges)
    p = 1.0 / max(k, 1)
    found: set[int] | None = None
    for _ in range(retries):
        draw = {v for v in nodes if rng.random() < p}
        if _unique_count(edges, draw) >= need:
            found = draw
            break
    if found is None:
        found = _conditional_expectation(nodes, edges, p)
        if _unique_count(edges, found) < need:
            raise InfeasibleError(f"no subset hits a {float(theta):.3f} fraction of {len(edges)} edges uniquely")
    if improve:
        found = _improve(nodes, edges, found)
    return sorted(found)


def _conditional_expectation(nodes: list[int], edges: Sequence[Sequence[int]], p: float) -> set[int]:
    inc: dict[int, list[int]] = {v: [] for v in nodes}
    for i, e in enumerate(edges):
        for v in e:
            inc[v].append(i)
    fixed_in = [0] * len(edges)
    free = [len(e) for e in edges]
    chosen: set[int] = set()
    for v in nodes:
        gain_in = gain_out = 0.0
        for i in inc[v]:
            now = _unique_probability(fixed_in[i], free[i], p)
            gain_in += _unique_probability(fixed_in[i] + 1, free[i] - 1, p) - now
            gain_out += _unique_probability(fixed_in[i], free[i] - 1, p) - now
        take = gain_in > gain_out
        for i in inc[v]:
            free[i] -= 1
            fixed_in[i] += take
        if take:
            chosen.add(v)
    return chosen


@dataclass
class SlocalCFResult:
    coloring: MultiColoring
    trace: ExecutionTrace
    unresolved: list[int]
    radius_bound: int
    max_radius: int


def _resolved(members: Sequence[int], colors_of: Mapping[int, Sequence[int]], exclude: int) -> bool:
    hist = Counter(c for v in members for c in colors_of[v] if c != exclude)
    return any(cnt == 1 for cnt in hist.values())


def _cf_phase(color: int, theta: float, retries: int, k: int, bound: int, improve: bool, radii: list[int]) -> Phase:
    # Whether an edge is resolved by earlier colors cannot change during the
    # phase, so the answer is memoized across the phase's nodes.
    resolved_before: dict[int, bool] = {}

    def procedure(ctx: NodeContext) -> None:
        if ctx.memory.get("done") == color:
            return
        r = 0
        while True:
            view = ctx.query(r + 2)
            layers = {z: d for z, d in view.dist.items() if view.memory(z).get("done") != color}
            far: dict[int, float] = {}
            members_of: dict[int, tuple[int, ...]] = {}
            for z in layers:
                for eid, members in view.input(z):
                    if eid not in far:
                        far[eid] = max(layers.get(x, math.inf) for x in members)
                        members_of[eid] = members
            inside: dict[int, dict[int, tuple[int, ...]]] = {r: {}, r + 2: {}}
            for eid, members in members_of.items():
                if far[eid] > r + 2:
                    continue
                if eid not in resolved_before:
                    colors = {x: view.memory(x).get("colors", ()) for x in members}
                    resolved_before[eid] = _resolved(members, colors, color)
                if resolved_before[eid]:
                    continue
                inside[r + 2][eid] = members
                if far[eid] <= r:
                    inside[r][eid] = members
            if len(inside[r + 2]) <= 2 * len(inside[r]):
                break
            r += 1
            if r > bound:
                raise InvariantError(f"ball growth at node {ctx.node} passed radius bound {bound}")
        radii.append(r)
        local = list(inside[r].values())
        pool = sorted({x for e in local for x in e})
        chosen = unique_subset_search(pool, local, k, theta, retries, ctx.rng, improve)
        for x in chosen:
            ctx.write(x, "colors", tuple(view.memory(x).get("colors", ())) + (color,))
        for z, d in sorted(layers.items()):
            if d <= r + 1:
                ctx.write(z, "done", color)

    return Phase(procedure, bound + 2, bound + 1)


def slocal_cf(h: Hypergraph, order: Ordering | None = None, **params: Any) -> tuple[MultiColoring, ExecutionTrace]:
    """Sequential-local conflict-free multicoloring; see :func:`slocal_cf_run`."""
    res = slocal_cf_run(h, order, **params)
    return res.coloring, res.trace


def slocal_cf_run(
    h: Hypergraph,
    order: Ordering | None = None,
    theta: float = 1 / 20,
    retries: int = 200,
    seed: int = 0,
    k: int | None = None,
    improve: bool = True,
) -> SlocalCFResult:
    """Multi-phase sequential-local conflict-free multicoloring, one new color per phase.

    In each phase an unprocessed node grows a ball in the primal graph
    until the number of unresolved hyperedges inside stops doubling over two
    hops, colors a subset of the ball that hits a ``theta`` fraction of those
    edges exactly once, and marks the ball plus one hop as processed.
    """
    order = Ordering.identity(h.n) if order is None else order
    k = max(h.min_edge_size, 1) if k is None else k
    primal = h.primal_graph()
    inputs = [tuple((i, h.edges[i]) for i in h.incident(v)) for v in range(h.n)]
    run = SlocalRun(primal, order, seed, inputs)
    bound = 2 * (math.ceil(math.log2(max(h.m, 1))) + 2)
    unresolved = [h.m]
    radii: list[int] = []
    theta_q = Fraction(theta).limit_denominator(10**6)
    color = 0
    while unresolved[-1] > 0:
        color += 1
        run.run_phase(_cf_phase(color, theta, retries, k, bound, improve, radii))
        colors_of = {v: s.memory.get("colors", ()) for v, s in enumerate(run.states)}
        left = sum(1 for e in h.edges if not _resolved(e, colors_of, 0))
        if left > (1 - theta_q / 2) * unresolved[-1]:
            raise InvariantError(f"phase {color} left {left} of {unresolved[-1]} edges unresolved")
        unresolved.append(left)
    default = color + 1
    sets = [list(s.memory.get("colors", ())) or [default] for s in run.states]
    coloring = MultiColoring.from_sets(sets, default)
    return SlocalCFResult(coloring, run.trace(), unresolved, bound, max(radii, default=0))
