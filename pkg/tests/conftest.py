"""Independent oracles shared by the test modules.

Nothing here calls the library's own verifiers; each check is rebuilt on
networkx, scipy or brute force so that a bug cannot hide on both sides.
"""

from __future__ import annotations

import itertools
from collections import Counter
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from scipy.optimize import Bounds, LinearConstraint, milp

from slocal_lab.graphs import Graph

settings.register_profile("lab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


@st.composite
def small_graphs(draw, min_n: int = 1, max_n: int = 12) -> Graph:
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_edges(n, chosen)


# ---------------------------------------------------------------------------
# Graph oracles
# ---------------------------------------------------------------------------


def to_nx(graph: Graph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(graph.n))
    g.add_edges_from(graph.edges())
    return g


def nx_distances(graph: Graph) -> dict[int, dict[int, int]]:
    return dict(nx.all_pairs_shortest_path_length(to_nx(graph)))


def brute_ordering_diameter(graph: Graph, labels: Sequence[int]) -> int:
    """Enumerate every label-increasing path from every start node."""
    dist = nx_distances(graph)
    best = 0
    for s in range(graph.n):
        stack = [s]
        seen = {s}
        while stack:
            x = stack.pop()
            best = max(best, dist[s][x])
            for y in graph.adj[x]:
                if labels[y] > labels[x] and y not in seen:
                    seen.add(y)
                    stack.append(y)
    return best


def decomposition_ok(graph: Graph, cluster_of: Sequence[int], color_of: Sequence[int], d: int, c: int) -> bool:
    dist = nx_distances(graph)
    members: dict[int, list[int]] = {}
    for v, k in enumerate(cluster_of):
        members.setdefault(k, []).append(v)
    for mem in members.values():
        for a, b in itertools.combinations(mem, 2):
            if dist[a].get(b, float("inf")) > d:
                return False
    if any(not 1 <= col <= c for col in color_of):
        return False
    for u, v in graph.edges():
        cu, cv = cluster_of[u], cluster_of[v]
        if cu != cv and color_of[cu] == color_of[cv]:
            return False
    return True


def is_mis(graph: Graph, chosen: Iterable[int]) -> bool:
    s = set(chosen)
    g = to_nx(graph)
    return nx.is_dominating_set(g, s) and all(not g.has_edge(a, b) for a, b in itertools.combinations(s, 2))


def is_proper(graph: Graph, colors: Sequence[int]) -> bool:
    return all(colors[u] != colors[v] for u, v in to_nx(graph).edges())


# ---------------------------------------------------------------------------
# Exact optima by integer programming
# ---------------------------------------------------------------------------


def _incidence(graph: Graph) -> np.ndarray:
    edges = list(graph.edges())
    a = np.zeros((max(len(edges), 1), graph.n))
    for i, (u, v) in enumerate(edges):
        a[i, u] = a[i, v] = 1
    return a


def milp_alpha(graph: Graph) -> int:
    if graph.n == 0:
        return 0
    res = milp(
        c=-np.ones(graph.n),
        constraints=LinearConstraint(_incidence(graph), -np.inf, 1),
        integrality=np.ones(graph.n),
        bounds=Bounds(0, 1),
    )
    return int(round(-res.fun))


def milp_gamma(graph: Graph) -> int:
    if graph.n == 0:
        return 0
    closed = np.eye(graph.n)
    for u, v in graph.edges():
        closed[u, v] = closed[v, u] = 1
    res = milp(
        c=np.ones(graph.n),
        constraints=LinearConstraint(closed, 1, np.inf),
        integrality=np.ones(graph.n),
        bounds=Bounds(0, 1),
    )
    return int(round(res.fun))


# ---------------------------------------------------------------------------
# Coloring and splitting oracles
# ---------------------------------------------------------------------------


def cf_ok(edges: Iterable[Sequence[int]], colors: Sequence[Iterable[int]]) -> bool:
    for e in edges:
        hist = Counter(c for v in e for c in set(colors[v]))
        if 1 not in hist.values():
            return False
    return True


def split_counts(neighborhoods: Iterable[Sequence[int]], red: set[int]) -> list[tuple[int, int]]:
    return [(sum(1 for v in nb if v in red), sum(1 for v in nb if v not in red)) for nb in neighborhoods]


@pytest.fixture
def tmp_instance(tmp_path):
    def write(name: str, text: str):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


# ---------------------------------------------------------------------------
# Acceptance summary
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
