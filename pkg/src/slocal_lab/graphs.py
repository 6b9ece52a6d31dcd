"""Immutable graph structures, ball queries, generators and file I/O.

Node ids are dense integers ``0..n-1``. Adjacency lists are kept sorted so
that every iteration order in the library is deterministic.
"""

from __future__ import annotations

import io
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, ParseError

__all__ = [
    "Graph",
    "Hypergraph",
    "BipartiteGraph",
    "EmbeddingMap",
    "ball",
    "bfs_distances",
    "power_graph",
    "generate",
    "random_hypergraph",
    "random_bipartite",
    "regularize",
    "parse_graph",
    "parse_hypergraph",
    "parse_bipartite",
    "read_graph",
    "read_hypergraph",
    "read_bipartite",
    "format_graph",
    "format_hypergraph",
    "format_bipartite",
    "write_graph",
    "write_hypergraph",
    "write_bipartite",
]


# ---------------------------------------------------------------------------
# Structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``."""

    n: int
    adj: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidArgument("graph needs at least one node")
        if len(self.adj) != self.n:
            raise InvalidArgument("adjacency length differs from node count")
        for u, nbrs in enumerate(self.adj):
            prev = -1
            for v in nbrs:
                if not 0 <= v < self.n:
                    raise InvalidArgument(f"neighbor {v} of {u} out of range")
                if v == u:
                    raise InvalidArgument(f"self-loop at {u}")
                if v <= prev:
                    raise InvalidArgument(f"adjacency of {u} not sorted/unique")
                prev = v
        for u, nbrs in enumerate(self.adj):
            for v in nbrs:
                if not _sorted_contains(self.adj[v], u):
                    raise InvalidArgument(f"edge {u}-{v} not symmetric")

    @classmethod
    def _trusted(cls, n: int, adj: tuple[tuple[int, ...], ...]) -> "Graph":
        # Skips validation; callers build sorted symmetric adjacency themselves.
        g = object.__new__(cls)
        object.__setattr__(g, "n", n)
        object.__setattr__(g, "adj", adj)
        return g

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if n < 1:
            raise InvalidArgument("graph needs at least one node")
        sets: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidArgument(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InvalidArgument(f"self-loop at {u}")
            sets[u].add(v)
            sets[v].add(u)
        return cls._trusted(n, tuple(tuple(sorted(s)) for s in sets))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, tuple(() for _ in range(n)))

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adj[u]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    @property
    def max_degree(self) -> int:
        return max(len(a) for a in self.adj)

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, nbrs in enumerate(self.adj):
            for v in nbrs:
                if u < v:
                    yield (u, v)

    def has_edge(self, u: int, v: int) -> bool:
        return _sorted_contains(self.adj[u], v)

    def induced(self, nodes: Iterable[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph relabelled to ``0..k-1`` plus the old ids."""
        old = sorted(set(nodes))
        index = {v: i for i, v in enumerate(old)}
        adj = tuple(tuple(index[w] for w in self.adj[v] if w in index) for v in old)
        return Graph._trusted(len(old), adj), old


@dataclass(frozen=True)
class Hypergraph:
    """Hypergraph whose edges are non-empty sorted tuples of node ids."""

    n: int
    edges: tuple[tuple[int, ...], ...]
    _incident: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidArgument("hypergraph needs at least one node")
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for i, e in enumerate(self.edges):
            if not e:
                raise InvalidArgument(f"hyperedge {i} is empty")
            if list(e) != sorted(set(e)):
                raise InvalidArgument(f"hyperedge {i} not sorted/unique")
            if e[0] < 0 or e[-1] >= self.n:
                raise InvalidArgument(f"hyperedge {i} has a member out of range")
            for v in e:
                inc[v].append(i)
        object.__setattr__(self, "_incident", tuple(tuple(x) for x in inc))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Iterable[int]]) -> "Hypergraph":
        out = []
        for e in edges:
            members = list(e)
            if len(set(members)) != len(members):
                raise InvalidArgument(f"hyperedge {members} repeats a node")
            out.append(tuple(sorted(members)))
        return cls(n, tuple(out))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def rank(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    @property
    def min_edge_size(self) -> int:
        return min((len(e) for e in self.edges), default=0)

    def incident(self, v: int) -> tuple[int, ...]:
        """Indices of the hyperedges containing ``v``."""
        return self._incident[v]

    def primal_graph(self) -> Graph:
        """Two nodes are adjacent iff they share a hyperedge."""
        if not self.edges:
            return Graph.empty(self.n)
        # Node-by-node co-membership counts via the sparse incidence matrix.
        rows = np.repeat(np.arange(len(self.edges)), [len(e) for e in self.edges])
        cols = np.fromiter((v for e in self.edges for v in e), dtype=np.int64, count=len(rows))
        inc = sp.csr_matrix((np.ones(len(rows), dtype=np.int32), (rows, cols)), shape=(len(self.edges), self.n))
        share = (inc.T @ inc).tocsr()
        share.setdiag(0)
        share.eliminate_zeros()
        share.sort_indices()
        ptr, idx = share.indptr, share.indices.tolist()
        return Graph._trusted(self.n, tuple(tuple(idx[ptr[v]:ptr[v + 1]]) for v in range(self.n)))


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph with a left side U and a right side V."""

    left: int
    right: int
    edges: tuple[tuple[int, int], ...]
    _lnbrs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _rnbrs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.left < 0 or self.right < 0:
            raise InvalidArgument("side sizes must be non-negative")
        lsets: list[list[int]] = [[] for _ in range(self.left)]
        rsets: list[list[int]] = [[] for _ in range(self.right)]
        seen: set[tuple[int, int]] = set()
        for u, v in self.edges:
            if not (0 <= u < self.left and 0 <= v < self.right):
                raise InvalidArgument(f"edge ({u}, {v}) out of range")
            if (u, v) in seen:
                raise InvalidArgument(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            lsets[u].append(v)
            rsets[v].append(u)
        object.__setattr__(self, "_lnbrs", tuple(tuple(sorted(x)) for x in lsets))
        object.__setattr__(self, "_rnbrs", tuple(tuple(sorted(x)) for x in rsets))

    @classmethod
    def from_neighborhoods(cls, right: int, neighborhoods: Sequence[Iterable[int]]) -> "BipartiteGraph":
        edges = tuple((u, v) for u, nb in enumerate(neighborhoods) for v in sorted(set(nb)))
        return cls(len(neighborhoods), right, edges)

    def left_neighbors(self, u: int) -> tuple[int, ...]:
        return self._lnbrs[u]

    def right_neighbors(self, v: int) -> tuple[int, ...]:
        return self._rnbrs[v]

    def degree(self, u: int) -> int:
        return len(self._lnbrs[u])

    @property
    def min_left_degree(self) -> int:
        return min((len(x) for x in self._lnbrs), default=0)

    @property
    def node_count(self) -> int:
        return self.left + self.right

    def conflict_graph(self) -> Graph:
        """Graph on V where two right nodes are adjacent iff they share a left neighbor.

        Cost is quadratic in the left degrees.
        """
        if self.right == 0:
            raise InvalidArgument("conflict graph of an empty right side")
        adj = []
        for v in range(self.right):
            s: set[int] = set()
            s.update(*(self._lnbrs[u] for u in self._rnbrs[v]))
            s.discard(v)
            adj.append(tuple(sorted(s)))
        return Graph._trusted(self.right, tuple(adj))


@dataclass(frozen=True)
class EmbeddingMap:
    """Maps nodes of a derived graph back to the original graph."""

    original_count: int
    mapping: tuple[int | None, ...]

    def original(self, v: int) -> int | None:
        return self.mapping[v]

    def gadget_nodes(self) -> list[int]:
        return [v for v, o in enumerate(self.mapping) if o is None]


def _sorted_contains(seq: Sequence[int], x: int) -> bool:
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if seq[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < len(seq) and seq[lo] == x


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------


def bfs_distances(
    graph: Graph,
    source: int,
    limit: int | None = None,
    allowed: set[int] | frozenset[int] | None = None,
) -> dict[int, int]:
    """Hop distances from ``source``, optionally truncated at ``limit``.

    If ``allowed`` is given, the search runs inside the subgraph induced by
    it (the source must belong to it).
    """
    if not 0 <= source < graph.n:
        raise InvalidArgument(f"node {source} out of range")
    dist = {source: 0}
    queue = deque([source])
    adj = graph.adj
    while queue:
        u = queue.popleft()
        du = dist[u]
        if limit is not None and du >= limit:
            continue
        for w in adj[u]:
            if w not in dist and (allowed is None or w in allowed):
                dist[w] = du + 1
                queue.append(w)
    return dist


def ball(graph: Graph, center: int, radius: int) -> set[int]:
    """All nodes within hop distance ``radius`` of ``center``."""
    if radius < 0:
        raise InvalidArgument("radius must be non-negative")
    return set(bfs_distances(graph, center, radius))


def power_graph(graph: Graph, r: int) -> Graph:
    """Graph joining every pair at distance between 1 and ``r``."""
    if r < 1:
        raise InvalidArgument("power must be at least 1")
    if r == 1:
        return graph
    adj = []
    for v in range(graph.n):
        d = bfs_distances(graph, v, r)
        del d[v]
        adj.append(tuple(sorted(d)))
    return Graph._trusted(graph.n, tuple(adj))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _from_nx(g: nx.Graph, n: int) -> Graph:
    return Graph.from_edges(n, ((int(u), int(v)) for u, v in g.edges()))


def _need_int(params: dict, key: str, low: int) -> int:
    if key not in params:
        raise InvalidArgument(f"missing parameter {key!r}")
    val = params[key]
    if isinstance(val, bool) or int(val) != val or int(val) < low:
        raise InvalidArgument(f"parameter {key} must be an integer >= {low}")
    return int(val)


def generate(kind: str, seed: int | None = None, **params) -> Graph:
    """Build a graph of the given kind.

    Kinds: ``path(n)``, ``cycle(n)``, ``grid(rows, cols)``,
    ``random_gnp(n, p)`` (alias ``gnp``), ``complete(n)`` and
    ``random_regular(n, d)``. Random kinds are deterministic in ``seed``.
    """
    kind = kind.replace("-", "_")
    if kind == "path":
        n = _need_int(params, "n", 1)
        return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))
    if kind == "cycle":
        n = _need_int(params, "n", 3)
        return Graph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))
    if kind == "grid":
        rows = _need_int(params, "rows", 1)
        cols = _need_int(params, "cols", 1)
        edges = []
        for i in range(rows):
            for j in range(cols):
                v = i * cols + j
                if j + 1 < cols:
                    edges.append((v, v + 1))
                if i + 1 < rows:
                    edges.append((v, v + cols))
        return Graph.from_edges(rows * cols, edges)
    if kind == "complete":
        n = _need_int(params, "n", 1)
        return Graph._trusted(n, tuple(tuple(w for w in range(n) if w != v) for v in range(n)))
    if kind in ("random_gnp", "gnp"):
        p = float(params.get("p", -1))
        if not 0.0 <= p <= 1.0:
            raise InvalidArgument("p must lie in [0, 1]")
        n = _need_int(params, "n", 1)
        return _from_nx(nx.fast_gnp_random_graph(n, p, seed=_seed(seed)), n)
    if kind == "random_regular":
        n = _need_int(params, "n", 1)
        d = _need_int(params, "d", 0)
        if d >= n or (d * n) % 2:
            raise InvalidArgument("random_regular needs d < n and d*n even")
        return _from_nx(nx.random_regular_graph(d, n, seed=_seed(seed)), n)
    raise InvalidArgument(f"unknown graph kind {kind!r}")


def _seed(seed: int | None) -> int:
    return 0 if seed is None else int(seed)


def random_hypergraph(
    n: int, m: int, k: int, seed: int | None = None, k_max: int | None = None
) -> Hypergraph:
    """``m`` random hyperedges with sizes drawn uniformly from ``[k, k_max]``."""
    k_max = k if k_max is None else k_max
    if not 1 <= k <= k_max <= n:
        raise InvalidArgument("need 1 <= k <= k_max <= n")
    rng = random.Random(_seed(seed))
    edges = [tuple(sorted(rng.sample(range(n), rng.randint(k, k_max)))) for _ in range(m)]
    return Hypergraph(n, tuple(edges))


def random_bipartite(
    left: int, right: int, d_min: int, d_max: int | None = None, seed: int | None = None
) -> BipartiteGraph:
    """Each left node picks a uniform random neighborhood of size in ``[d_min, d_max]``."""
    d_max = d_min if d_max is None else d_max
    if not 0 <= d_min <= d_max <= right:
        raise InvalidArgument("need 0 <= d_min <= d_max <= right")
    rng = random.Random(_seed(seed))
    nbhds = [rng.sample(range(right), rng.randint(d_min, d_max)) for _ in range(left)]
    return BipartiteGraph.from_neighborhoods(right, nbhds)


# ---------------------------------------------------------------------------
# Regularization gadget
# ---------------------------------------------------------------------------


def regularize(graph: Graph, d: int) -> tuple[Graph, EmbeddingMap]:
    """Embed ``graph`` into a ``d``-regular graph by appending gadgets.

    A node with even deficit ``e`` is joined to ``e`` endpoints of a matching
    of size ``e/2`` removed from a fresh clique on ``d+1`` nodes. An odd
    deficit first receives a pendant node, which then gets its own gadget.
    """
    if d < 1 or d % 2 == 0:
        raise InvalidArgument("d must be odd and positive")
    if d < graph.max_degree:
        raise InvalidArgument(f"d={d} below maximum degree {graph.max_degree}")
    edges = list(graph.edges())
    mapping: list[int | None] = list(range(graph.n))
    count = graph.n

    def new_node() -> int:
        nonlocal count
        mapping.append(None)
        count += 1
        return count - 1

    def attach_clique(v: int, deficit: int) -> None:
        clique = [new_node() for _ in range(d + 1)]
        removed = {(clique[2 * i], clique[2 * i + 1]) for i in range(deficit // 2)}
        for i, a in enumerate(clique):
            for b in clique[i + 1 :]:
                if (a, b) not in removed:
                    edges.append((a, b))
        for a, b in removed:
            edges.append((v, a))
            edges.append((v, b))

    for v in range(graph.n):
        deficit = d - graph.degree(v)
        if deficit % 2:
            pendant = new_node()
            edges.append((v, pendant))
            deficit -= 1
            if d - 1 > 0:
                attach_clique(pendant, d - 1)
        if deficit > 0:
            attach_clique(v, deficit)
    return Graph.from_edges(count, edges), EmbeddingMap(graph.n, tuple(mapping))


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def _content_lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


def _header(lines: Iterator[tuple[int, list[str]]], arity: int, what: str) -> tuple[int, list[int]]:
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError(f"empty {what} file", 1) from None
    vals = _ints(tokens, lineno)
    if len(vals) != arity or min(vals) < 0:
        raise ParseError(f"{what} header needs {arity} non-negative integers", lineno)
    return lineno, vals


def _body(lines: Iterator[tuple[int, list[str]]], m: int, last: int) -> list[tuple[int, list[int]]]:
    body = [(ln, _ints(tok, ln)) for ln, tok in lines]
    if len(body) != m:
        where = body[m][0] if len(body) > m else last + 1
        raise ParseError(f"expected {m} records, found {len(body)}", where)
    return body


def parse_graph(text: str) -> Graph:
    lines = _content_lines(text)
    hline, (n, m) = _header(lines, 2, "graph")
    if n < 1:
        raise ParseError("graph needs at least one node", hline)
    body = _body(lines, m, hline)
    seen: set[tuple[int, int]] = set()
    edges = []
    for ln, vals in body:
        if len(vals) != 2:
            raise ParseError("edge line needs two ids", ln)
        u, v = vals
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"node id out of range in edge ({u}, {v})", ln)
        if u == v:
            raise ParseError(f"self-loop at {u}", ln)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ParseError(f"duplicate edge ({u}, {v})", ln)
        seen.add(key)
        edges.append(key)
    return Graph.from_edges(n, edges)


def parse_hypergraph(text: str) -> Hypergraph:
    lines = _content_lines(text)
    hline, (n, m) = _header(lines, 2, "hypergraph")
    if n < 1:
        raise ParseError("hypergraph needs at least one node", hline)
    body = _body(lines, m, hline)
    seen: set[tuple[int, ...]] = set()
    edges = []
    for ln, vals in body:
        if not vals or vals[0] < 1 or len(vals) != vals[0] + 1:
            raise ParseError("hyperedge line must be 'k v1 ... vk' with k >= 1", ln)
        members = vals[1:]
        if any(not 0 <= v < n for v in members):
            raise ParseError("node id out of range in hyperedge", ln)
        if len(set(members)) != len(members):
            raise ParseError("hyperedge repeats a node", ln)
        key = tuple(sorted(members))
        if key in seen:
            raise ParseError(f"duplicate hyperedge {list(key)}", ln)
        seen.add(key)
        edges.append(key)
    return Hypergraph(n, tuple(edges))


def parse_bipartite(text: str) -> BipartiteGraph:
    lines = _content_lines(text)
    hline, (nu, nv, m) = _header(lines, 3, "bipartite")
    body = _body(lines, m, hline)
    seen: set[tuple[int, int]] = set()
    edges = []
    for ln, vals in body:
        if len(vals) != 2:
            raise ParseError("edge line needs two ids", ln)
        u, v = vals
        if not (0 <= u < nu and 0 <= v < nv):
            raise ParseError(f"id out of range in edge ({u}, {v})", ln)
        if (u, v) in seen:
            raise ParseError(f"duplicate edge ({u}, {v})", ln)
        seen.add((u, v))
        edges.append((u, v))
    return BipartiteGraph(nu, nv, tuple(sorted(edges)))


def format_graph(graph: Graph) -> str:
    out = io.StringIO()
    out.write(f"{graph.n} {graph.m}\n")
    for u, v in graph.edges():
        out.write(f"{u} {v}\n")
    return out.getvalue()


def format_hypergraph(h: Hypergraph) -> str:
    out = io.StringIO()
    out.write(f"{h.n} {h.m}\n")
    for e in h.edges:
        out.write(f"{len(e)} {' '.join(map(str, e))}\n")
    return out.getvalue()


def format_bipartite(b: BipartiteGraph) -> str:
    out = io.StringIO()
    out.write(f"{b.left} {b.right} {len(b.edges)}\n")
    for u, v in sorted(b.edges):
        out.write(f"{u} {v}\n")
    return out.getvalue()


def read_graph(path: str | Path) -> Graph:
    return parse_graph(Path(path).read_text())


def read_hypergraph(path: str | Path) -> Hypergraph:
    return parse_hypergraph(Path(path).read_text())


def read_bipartite(path: str | Path) -> BipartiteGraph:
    return parse_bipartite(Path(path).read_text())


def write_graph(graph: Graph, path: str | Path) -> None:
    Path(path).write_text(format_graph(graph))


def write_hypergraph(h: Hypergraph, path: str | Path) -> None:
    Path(path).write_text(format_hypergraph(h))


def write_bipartite(b: BipartiteGraph, path: str | Path) -> None:
    Path(path).write_text(format_bipartite(b))
