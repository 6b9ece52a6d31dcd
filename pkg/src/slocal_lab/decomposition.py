"""Ball-growing network decomposition, its verifier and the derived ordering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .engine import NodeContext, Ordering, Phase, SlocalRun
from .errors import InvalidArgument, InvariantError
from .graphs import Graph, bfs_distances

__all__ = [
    "NetworkDecomposition",
    "DecompositionReport",
    "floor_log2",
    "weak_diameters",
    "ball_growing_decomposition",
    "slocal_ball_growing",
    "decomposition_to_ordering",
    "verify_decomposition",
]


def floor_log2(n: int) -> int:
    return max(n, 1).bit_length() - 1


@dataclass(frozen=True)
class NetworkDecomposition:
    """Clusters with colors; ``weak_diameter`` is measured in the decomposed graph."""

    cluster_of: tuple[int, ...]
    color_of: tuple[int, ...]
    weak_diameter: tuple[int, ...]
    base_graph_radius: int = 1

    @property
    def num_colors(self) -> int:
        return max(self.color_of, default=0)

    @property
    def num_clusters(self) -> int:
        return len(self.color_of)

    @property
    def max_weak_diameter(self) -> int:
        return max(self.weak_diameter, default=0)

    def clusters(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.color_of]
        for v, c in enumerate(self.cluster_of):
            out[c].append(v)
        return out

    def node_color(self, v: int) -> int:
        return self.color_of[self.cluster_of[v]]

    @classmethod
    def from_assignment(
        cls,
        graph: Graph,
        cluster_of: Sequence[int],
        color_of: Sequence[int],
        base_graph_radius: int = 1,
    ) -> "NetworkDecomposition":
        members: list[list[int]] = [[] for _ in color_of]
        for v, c in enumerate(cluster_of):
            members[c].append(v)
        diam = weak_diameters(graph, members)
        return cls(tuple(cluster_of), tuple(color_of), tuple(int(d) for d in diam), base_graph_radius)

    def to_json(self) -> dict[str, Any]:
        return {
            "colors": self.num_colors,
            "clusters": [
                {"id": i, "color": self.color_of[i], "nodes": nodes, "weak_diameter": self.weak_diameter[i]}
                for i, nodes in enumerate(self.clusters())
            ],
        }

    @classmethod
    def from_json(cls, graph: Graph, data: dict[str, Any]) -> "NetworkDecomposition":
        cluster_of = [-1] * graph.n
        clusters = sorted(data["clusters"], key=lambda c: c["id"])
        if [c["id"] for c in clusters] != list(range(len(clusters))):
            raise InvalidArgument("cluster ids must be 0..k-1")
        for c in clusters:
            for v in c["nodes"]:
                if not 0 <= v < graph.n or cluster_of[v] != -1:
                    raise InvalidArgument(f"node {v} invalid or listed twice")
                cluster_of[v] = c["id"]
        if -1 in cluster_of:
            raise InvalidArgument(f"node {cluster_of.index(-1)} is not clustered")
        return cls.from_assignment(graph, cluster_of, [int(c["color"]) for c in clusters])


_SMALL_CLUSTER = 48


def _csr(graph: Graph) -> csr_matrix:
    rows, cols = [], []
    for u, nbrs in enumerate(graph.adj):
        rows.extend([u] * len(nbrs))
        cols.extend(nbrs)
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(graph.n, graph.n))


def _reach_all(graph: Graph, source: int, targets: set[int], limit: int | None) -> float:
    """BFS from ``source`` until every target is found; inf if one lies beyond ``limit``."""
    left = set(targets)
    left.discard(source)
    seen = {source}
    frontier = [source]
    depth = 0
    while left and frontier and (limit is None or depth < limit):
        depth += 1
        nxt = []
        for y in frontier:
            for z in graph.adj[y]:
                if z not in seen:
                    seen.add(z)
                    nxt.append(z)
                    left.discard(z)
        frontier = nxt
    return math.inf if left else float(depth)


def _sweep(adj: Any, sources: np.ndarray, members: np.ndarray, limit: int | None) -> float:
    """Level-synchronous BFS from all ``sources`` at once via matrix products.

    ``adj`` is the symmetric adjacency matrix (dense array or sparse); the
    reached sets are kept node-major, one column per source. Returns the
    first depth at which every source has reached every member.
    """
    n = adj.shape[0]
    reached = np.zeros((n, len(sources)), dtype=bool)
    reached[sources, np.arange(len(sources))] = True
    frontier = reached.astype(np.float32)
    depth = 0
    while not reached[members].all():
        if (limit is not None and depth >= limit) or not frontier.any():
            return math.inf
        step = (adj @ frontier > 0) & ~reached
        reached |= step
        frontier = step.astype(np.float32)
        depth += 1
    return float(depth)


def weak_diameters(
    graph: Graph, clusters: Sequence[Sequence[int]], limit: int | None = None, batch: int = 512
) -> list[float]:
    """Max pairwise distance in ``graph`` between members of each cluster.

    With ``limit`` set, distances beyond it are reported as ``inf``. Small
    clusters use one early-exit BFS per member; large ones sweep batches of
    members together.
    """
    out: list[float] = [0.0] * len(clusters)
    for i, members in enumerate(clusters):
        if 1 < len(members) <= _SMALL_CLUSTER:
            out[i] = max(_reach_all(graph, s, set(members), limit) for s in members)
    large = [i for i, c in enumerate(clusters) if len(c) > _SMALL_CLUSTER]
    if not large:
        return out
    adj: Any = _csr(graph).astype(np.float32)
    if graph.n <= 4096 and adj.nnz * 16 > graph.n * graph.n:
        adj = adj.toarray()
    for ci in large:
        members = np.asarray(clusters[ci])
        for lo in range(0, len(members), batch):
            out[ci] = max(out[ci], _sweep(adj, members[lo : lo + batch], members, limit))
            if math.isinf(out[ci]):
                break
    return out


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _grow(graph: Graph, v: int, alive: set[int]) -> tuple[int, dict[int, int]]:
    """Smallest r with |B_{r+1}| <= 2|B_r| inside ``alive``, and the BFS layers up to r+1."""
    dist = {v: 0}
    frontier = [v]
    size = 1
    r = 0
    while True:
        nxt = []
        for y in frontier:
            for z in graph.adj[y]:
                if z not in dist and z in alive:
                    dist[z] = r + 1
                    nxt.append(z)
        if size + len(nxt) <= 2 * size:
            return r, dist
        size += len(nxt)
        frontier = nxt
        r += 1


def ball_growing_decomposition(graph: Graph) -> NetworkDecomposition:
    """Sequential ball-growing decomposition with lowest-id start vertices.

    Block ``i`` carves clusters out of the still-unclustered graph; each
    cluster is a ball whose one-hop extension is at most twice as large,
    and that extension is removed from the block.
    """
    n = graph.n
    log_n = floor_log2(n)
    unclustered = set(range(n))
    cluster_of = [-1] * n
    color_of: list[int] = []
    radii: list[int] = []
    color = 0
    while unclustered:
        color += 1
        before = len(unclustered)
        alive = set(unclustered)
        for v in sorted(unclustered):
            if v not in alive:
                continue
            r, dist = _grow(graph, v, alive)
            if r > log_n:
                raise InvariantError(f"ball radius {r} exceeds floor(log2 n)={log_n}")
            cid = len(color_of)
            color_of.append(color)
            radii.append(r)
            for u, d in dist.items():
                if d <= r:
                    cluster_of[u] = cid
                    unclustered.discard(u)
                alive.discard(u)
        if 2 * len(unclustered) > before:
            raise InvariantError(f"block {color} clustered fewer than half of {before} nodes")
    if color > log_n + 1:
        raise InvariantError(f"{color} colors exceed floor(log2 n)+1")
    members: list[list[int]] = [[] for _ in color_of]
    for v, c in enumerate(cluster_of):
        members[c].append(v)
    diam = weak_diameters(graph, members, limit=2 * max(radii))
    if any(math.isinf(d) for d in diam):
        raise InvariantError("cluster weak diameter exceeds twice its radius")
    return NetworkDecomposition(tuple(cluster_of), tuple(color_of), tuple(int(d) for d in diam))


def _block_phase(block: int, log_n: int) -> Phase:
    def procedure(ctx: NodeContext) -> None:
        mem = ctx.memory
        if "cluster" in mem or mem.get("removed") == block:
            return

        def alive(z: int) -> bool:
            m = view.memory(z)
            return "cluster" not in m and m.get("removed") != block

        r = 0
        while True:
            view = ctx.query(r + 1)
            dist = view.within(ctx.node, r + 1, alive)
            inner = sum(1 for d in dist.values() if d <= r)
            if len(dist) <= 2 * inner:
                break
            r += 1
        for z, d in sorted(dist.items()):
            if d <= r:
                ctx.write(z, "cluster", ctx.node)
                ctx.write(z, "color", block)
                ctx.write(z, "radius", r)
            ctx.write(z, "removed", block)

    return Phase(procedure, log_n + 1, log_n + 1)


def slocal_ball_growing(run: SlocalRun) -> NetworkDecomposition:
    """Ball growing as sequential-local phases (one per block) on ``run``.

    Start vertices are taken in the run's processing order; under the
    identity order this reproduces :func:`ball_growing_decomposition`.
    Each clustered node records ``cluster`` (the center), ``color`` and
    ``radius`` in its memory.
    """
    graph = run.graph
    log_n = floor_log2(graph.n)
    block = 0
    while any("cluster" not in s.memory for s in run.states):
        block += 1
        if block > log_n + 1:
            raise InvariantError("ball growing used more than floor(log2 n)+1 blocks")
        run.run_phase(_block_phase(block, log_n))
    centers = sorted({s.memory["cluster"] for s in run.states}, key=lambda c: (run.states[c].memory["color"], c))
    index = {c: i for i, c in enumerate(centers)}
    cluster_of = [index[s.memory["cluster"]] for s in run.states]
    color_of = [run.states[c].memory["color"] for c in centers]
    return NetworkDecomposition.from_assignment(graph, cluster_of, color_of)


def decomposition_to_ordering(decomp: NetworkDecomposition) -> Ordering:
    """Labels follow (cluster color, cluster id, node id) lexicographically."""
    keyed = sorted(range(len(decomp.cluster_of)), key=lambda v: (decomp.node_color(v), decomp.cluster_of[v], v))
    return Ordering.from_sequence(keyed)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass
class DecompositionReport:
    valid: bool
    d_bound: int
    c_bound: int
    violations: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"valid": self.valid, "d_bound": self.d_bound, "c_bound": self.c_bound, "violations": self.violations}


def verify_decomposition(graph: Graph, decomp: NetworkDecomposition, d_bound: int, c_bound: int) -> DecompositionReport:
    """Check totality, weak diameters, palette size and color separation."""
    violations: list[dict[str, Any]] = []
    n = graph.n
    k = len(decomp.color_of)
    if len(decomp.cluster_of) != n:
        violations.append({"kind": "partition", "detail": "cluster map does not cover every node"})
        return DecompositionReport(False, d_bound, c_bound, violations)
    members: list[list[int]] = [[] for _ in range(k)]
    for v, c in enumerate(decomp.cluster_of):
        if not 0 <= c < k:
            violations.append({"kind": "partition", "node": v, "cluster": c})
        else:
            members[c].append(v)
    for c, mem in enumerate(members):
        if not mem:
            violations.append({"kind": "partition", "cluster": c, "detail": "empty cluster"})
    if violations:
        return DecompositionReport(False, d_bound, c_bound, violations)
    diam = weak_diameters(graph, members, limit=d_bound)
    for c, d in enumerate(diam):
        if d > d_bound:
            far = _far_pair(graph, members[c], d_bound)
            violations.append({"kind": "diameter", "cluster": c, "bound": d_bound, "witness": far})
    for c, col in enumerate(decomp.color_of):
        if not 1 <= col <= c_bound:
            violations.append({"kind": "colors", "cluster": c, "color": col, "bound": c_bound})
    for u, v in graph.edges():
        cu, cv = decomp.cluster_of[u], decomp.cluster_of[v]
        if cu != cv and decomp.color_of[cu] == decomp.color_of[cv]:
            violations.append({"kind": "separation", "edge": [u, v], "clusters": [cu, cv]})
    return DecompositionReport(not violations, d_bound, c_bound, violations)


def _far_pair(graph: Graph, members: list[int], bound: int) -> list[int]:
    for s in members:
        d = bfs_distances(graph, s, bound)
        for t in members:
            if t not in d:
                return [s, t]
    return []
