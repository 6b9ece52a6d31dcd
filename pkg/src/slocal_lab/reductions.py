"""Constructive reductions between the splitting, coloring and decomposition problems.

``cf_from_split`` builds a conflict-free multicoloring from any
lambda-splitting oracle; ``decomposition_from_cf`` builds a network
decomposition from any conflict-free multicoloring oracle. Oracle answers
are verified before they are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

from .cfcoloring import MultiColoring, lowrank_cf_run, verify_cf
from .decomposition import NetworkDecomposition, verify_decomposition
from .errors import InvalidArgument, InvariantError, OracleFailure
from .graphs import BipartiteGraph, Graph, Hypergraph
from .splitting import RED, SplitColoring, slocal_lambda_split_run, verify_lambda_split, as_fraction

__all__ = [
    "CFFromSplitResult",
    "ClusterAssignment",
    "cf_from_split",
    "cf_from_split_run",
    "decomposition_from_cf",
    "lambda_split_oracle",
    "ball_hypergraphs",
]

SplitOracle = Callable[[BipartiteGraph], SplitColoring]
CFOracle = Callable[[Hypergraph], MultiColoring]


# ---------------------------------------------------------------------------
# Conflict-free multicoloring from a splitting oracle
# ---------------------------------------------------------------------------


@dataclass
class CFFromSplitResult:
    coloring: MultiColoring
    ranks: list[int]
    phases: int
    colors_per_phase: list[int]
    resolved_in_phase: list[int] = field(default_factory=list)


def lambda_split_oracle(delta: int, **params: Any) -> SplitOracle:
    """Sequential-local splitter asked for floor(d/delta) neighbors of each color."""

    def oracle(b: BipartiteGraph) -> SplitColoring:
        need = [len(b.left_neighbors(u)) // delta for u in range(b.left)]
        return slocal_lambda_split_run(b, need=need, **params).coloring

    return oracle


def cf_from_split_run(h: Hypergraph, delta: int, split_oracle: SplitOracle) -> CFFromSplitResult:
    """Phase loop: small edges go to the low-rank solver, large ones are split and shrunk.

    Each phase colors the edges of size at most ``delta`` with a fresh
    palette, then asks the oracle for a 1/delta-split of the bipartite
    incidence graph of the remaining edges and keeps only the red nodes.
    """
    if delta < 2:
        raise InvalidArgument("delta must be at least 2")
    lam = Fraction(1, delta)
    sets: list[list[int]] = [[] for _ in range(h.n)]
    current = {i: tuple(e) for i, e in enumerate(h.edges)}
    resolved_in = [0] * h.m
    ranks: list[int] = []
    colors_per_phase: list[int] = []
    offset = 0
    phase = 0
    while current:
        phase += 1
        rank = max(len(e) for e in current.values())
        if ranks and 2 * delta * rank > (2 * delta - 1) * ranks[-1]:
            raise InvariantError(f"rank {rank} did not shrink enough from {ranks[-1]}")
        ranks.append(rank)
        small = sorted(i for i, e in current.items() if len(e) <= delta)
        large = sorted(i for i, e in current.items() if len(e) > delta)
        used = 0
        if small:
            sub = Hypergraph(h.n, tuple(current[i] for i in small))
            res = lowrank_cf_run(sub, offset=offset)
            for v, cs in enumerate(res.sets):
                sets[v].extend(cs)
            used = res.colors_used
            for i in small:
                resolved_in[i] = phase
                del current[i]
        colors_per_phase.append(used)
        offset += used
        if not large:
            break
        nodes = sorted({v for i in large for v in current[i]})
        index = {v: j for j, v in enumerate(nodes)}
        b = BipartiteGraph.from_neighborhoods(len(nodes), [[index[v] for v in current[i]] for i in large])
        split = split_oracle(b)
        if len(split.color_of) != b.right or not verify_lambda_split(b, split, lam).valid:
            raise OracleFailure(f"split oracle output fails 1/{delta} verification in phase {phase}")
        for i in large:
            current[i] = tuple(v for v in current[i] if split.color_of[index[v]] == RED)
            if not current[i]:
                raise InvariantError(f"edge {i} lost all its nodes")
    if phase > math.ceil(2 * delta * math.log(max(ranks[0], 1))) + 1:
        raise InvariantError(f"{phase} phases exceed the phase bound")
    default = offset + 1
    missing = any(not s for s in sets)
    coloring = MultiColoring.from_sets([s or [default] for s in sets], default if missing else max(offset, 1))
    if not verify_cf(h, coloring).valid:
        raise InvariantError("composed coloring is not conflict-free")
    return CFFromSplitResult(coloring, ranks, phase, colors_per_phase, resolved_in)


def cf_from_split(h: Hypergraph, lam: Fraction | float | str, split_oracle: SplitOracle) -> MultiColoring:
    """Conflict-free multicoloring from a lambda-split oracle; ``lam`` must be 1/delta."""
    lam = as_fraction(lam)
    if lam <= 0 or lam.numerator != 1 or lam.denominator < 2:
        raise InvalidArgument("lambda must be 1/delta for an integer delta >= 2")
    return cf_from_split_run(h, lam.denominator, split_oracle).coloring


# ---------------------------------------------------------------------------
# Network decomposition from a conflict-free multicoloring oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterAssignment:
    center_of: tuple[int, ...]
    color_of: tuple[int, ...]
    radius_of: tuple[int, ...]
    epsilon: Fraction
    q: int

    def to_json(self) -> dict[str, Any]:
        return {
            str(v): {"center": self.center_of[v], "color": self.color_of[v], "r_v": self.radius_of[v]}
            for v in range(len(self.center_of))
        }


def _layers(graph: Graph, v: int, limit: int | None = None) -> list[list[int]]:
    """BFS layers from ``v``, up to ``limit`` (or until exhausted)."""
    seen = {v}
    layers = [[v]]
    while limit is None or len(layers) <= limit:
        nxt = []
        for y in layers[-1]:
            for z in graph.adj[y]:
                if z not in seen:
                    seen.add(z)
                    nxt.append(z)
        if not nxt:
            break
        layers.append(nxt)
    return layers


def _size_class(size: int, base: Fraction) -> int:
    """Largest i with base**i <= size."""
    i, power = 0, base
    while power <= size:
        i += 1
        power *= base
    return i


def ball_hypergraphs(graph: Graph, eps: Fraction, q: int) -> tuple[list[int], list[int], dict[int, list[tuple[int, ...]]]]:
    """Per-node growth radius, size class, and the deduplicated ball hyperedges per class."""
    base = 1 + eps / 3
    n = graph.n
    radius_cap = math.ceil(q * math.log(max(n, 2)) / math.log(float(base)))
    radii, classes = [], []
    classes_edges: dict[int, dict[tuple[int, ...], None]] = {}
    for v in range(n):
        layers = _layers(graph, v)
        prefix = [0]
        for layer in layers:
            prefix.append(prefix[-1] + len(layer))

        def size(r: int) -> int:
            return prefix[min(r + 1, len(layers))]

        r = 0
        while size(r + q) > base * size(r):
            r += 1
        if r > radius_cap:
            raise InvariantError(f"growth radius {r} at node {v} exceeds {radius_cap}")
        i = _size_class(size(r), base)
        radii.append(r)
        classes.append(i)
        bucket = classes_edges.setdefault(i, {})
        flat: list[int] = []
        for j, layer in enumerate(layers[: r + q + 1]):
            flat.extend(layer)
            if j >= r:
                bucket[tuple(sorted(flat))] = None
        if len(layers) < r + q + 1:
            bucket[tuple(sorted(flat))] = None
    return radii, classes, {i: list(b) for i, b in classes_edges.items()}


def decomposition_from_cf(
    graph: Graph, eps: Fraction | float | str, q: int, cf_oracle: CFOracle
) -> tuple[ClusterAssignment, NetworkDecomposition]:
    """Network decomposition from conflict-free multicolorings of ball hypergraphs.

    Every node contributes its balls of radius r_v .. r_v+q, where r_v is
    the first radius whose ball grows by at most a (1+eps/3) factor over
    the next q hops. Balls are grouped by size class into almost uniform
    hypergraphs, each colored by the oracle with its own palette of q
    colors. Two balls of a node sharing a witness color fix the node's
    cluster center and cluster color.
    """
    eps = as_fraction(eps)
    if not 0 < eps < 1:
        raise InvalidArgument("epsilon must lie in (0, 1)")
    if q < 2:
        raise InvalidArgument("q must be at least 2")
    n = graph.n
    base = 1 + eps / 3
    radii, classes, edges_by_class = ball_hypergraphs(graph, eps, q)
    used = sorted(edges_by_class)
    slot = {i: t for t, i in enumerate(used)}
    node_colors: list[list[int]] = [[] for _ in range(n)]
    for i in used:
        edges = edges_by_class[i]
        sizes = [len(e) for e in edges]
        if max(sizes) > base * base * min(sizes):
            raise InvariantError(f"size class {i} is not almost uniform")
        sub = Hypergraph(n, tuple(edges))
        coloring = cf_oracle(sub)
        if len(coloring.colors) != n or not verify_cf(sub, coloring).valid:
            raise OracleFailure(f"oracle coloring of size class {i} is not conflict-free")
        if max((c for cs in coloring.colors for c in cs), default=0) > q:
            raise OracleFailure(f"oracle used more than {q} colors on size class {i}")
        shift = slot[i] * q
        members = {v for e in edges for v in e}
        for v in members:
            node_colors[v].extend(c + shift for c in coloring.colors[v])
    color_sets = [set(cs) for cs in node_colors]
    center_of, cluster_color = [], []
    for v in range(n):
        layers = _layers(graph, v, radii[v] + q)
        lo, hi = slot[classes[v]] * q + 1, (slot[classes[v]] + 1) * q
        witness: list[int] = []
        balls: list[list[int]] = []
        flat: list[int] = []
        for j in range(radii[v] + q + 1):
            if j < len(layers):
                flat = flat + layers[j]
            if j >= radii[v]:
                balls.append(flat)
                counts: dict[int, list[int]] = {}
                for z in flat:
                    for c in color_sets[z]:
                        if lo <= c <= hi:
                            counts.setdefault(c, []).append(z)
                unique = sorted(c for c, holders in counts.items() if len(holders) == 1)
                if not unique:
                    raise InvariantError(f"ball of node {v} has no witness color")
                witness.append(unique[0])
        pair = next(((a, b) for a in range(q + 1) for b in range(a + 1, q + 1) if witness[a] == witness[b]), None)
        if pair is None:
            raise InvariantError(f"no repeated witness color around node {v}")
        c = witness[pair[0]]
        center = next(z for z in balls[pair[0]] if c in color_sets[z])
        center_of.append(center)
        cluster_color.append(c)
    _check_uniqueness(graph, center_of, cluster_color, color_sets)
    for a, b in graph.edges():
        if cluster_color[a] == cluster_color[b] and center_of[a] != center_of[b]:
            raise InvariantError(f"adjacent nodes {a}, {b} share color but not center")
    keys = sorted({(cluster_color[v], center_of[v]) for v in range(n)})
    cid = {k: j for j, k in enumerate(keys)}
    decomp = NetworkDecomposition.from_assignment(
        graph, [cid[(cluster_color[v], center_of[v])] for v in range(n)], [k[0] for k in keys]
    )
    d_bound = 2 * max((r + q for r in radii), default=0)
    c_bound = q * len(used)
    report = verify_decomposition(graph, decomp, d_bound, c_bound)
    if not report.valid:
        raise InvariantError(f"derived decomposition fails verification: {report.violations[:3]}")
    assignment = ClusterAssignment(tuple(center_of), tuple(cluster_color), tuple(radii), eps, q)
    return assignment, decomp


def _check_uniqueness(graph: Graph, center_of: Sequence[int], color_of: Sequence[int], color_sets: list[set[int]]) -> None:
    """The center is the only holder of the cluster color within dist(v, center) + 1."""
    for v in range(graph.n):
        layers = _layers(graph, v)
        dist = {z: d for d, layer in enumerate(layers) for z in layer}
        t = dist.get(center_of[v])
        if t is None:
            raise InvariantError(f"center of node {v} is unreachable")
        holders = [z for d, layer in enumerate(layers[: t + 2]) for z in layer if color_of[v] in color_sets[z]]
        if holders != [center_of[v]]:
            raise InvariantError(f"center of node {v} is not the unique holder within distance {t + 1}")
