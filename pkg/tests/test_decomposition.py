from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given

from conftest import brute_ordering_diameter, decomposition_ok, nx_distances, small_graphs
from slocal_lab.decomposition import (
    NetworkDecomposition,
    ball_growing_decomposition,
    decomposition_to_ordering,
    floor_log2,
    slocal_ball_growing,
    verify_decomposition,
    weak_diameters,
)
from slocal_lab.engine import Ordering, SlocalRun, ordering_diameter
from slocal_lab.graphs import Graph, generate


def clusters_of(decomp: NetworkDecomposition) -> list[tuple[int, list[int]]]:
    return sorted((decomp.color_of[i], nodes) for i, nodes in enumerate(decomp.clusters()))


def test_single_node():
    d = ball_growing_decomposition(Graph.empty(1))
    assert d.num_clusters == 1 and d.num_colors == 1 and d.max_weak_diameter == 0


@pytest.mark.parametrize("n", [3, 5, 9])
def test_complete_graph_single_cluster(n):
    d = ball_growing_decomposition(generate("complete", n=n))
    assert d.num_clusters == 1 and d.num_colors == 1


def test_path_five_blocks():
    d = ball_growing_decomposition(generate("path", n=5))
    assert clusters_of(d) == [(1, [0]), (1, [2]), (1, [4]), (2, [1]), (2, [3])]


@given(small_graphs())
def test_construction_guarantee_on_small_graphs(g):
    d = ball_growing_decomposition(g)
    log_n = floor_log2(g.n)
    assert decomposition_ok(g, d.cluster_of, d.color_of, 2 * log_n, log_n + 1)
    assert verify_decomposition(g, d, 2 * log_n, log_n + 1).valid


def test_gnp_200_guarantee():
    g = generate("gnp", seed=1, n=200, p=0.05)
    d = ball_growing_decomposition(g)
    log_n = floor_log2(200)
    assert verify_decomposition(g, d, 2 * log_n, log_n + 1).valid
    assert decomposition_ok(g, d.cluster_of, d.color_of, 2 * log_n, log_n + 1)


@given(small_graphs())
def test_slocal_version_matches_under_identity(g):
    direct = ball_growing_decomposition(g)
    run = SlocalRun(g, Ordering.identity(g.n))
    local = slocal_ball_growing(run)
    assert clusters_of(local) == clusters_of(direct)
    log_n = floor_log2(g.n)
    assert run.trace().max_locality <= log_n + 1


@given(small_graphs())
def test_slocal_version_valid_under_random_order(g):
    run = SlocalRun(g, Ordering.random(g.n, g.n))
    d = slocal_ball_growing(run)
    log_n = floor_log2(g.n)
    assert decomposition_ok(g, d.cluster_of, d.color_of, 2 * log_n, log_n + 1)


# ---------------------------------------------------------------------------
# Weak diameters
# ---------------------------------------------------------------------------


def brute_weak(g: Graph, members: list[int]) -> float:
    dist = nx_distances(g)
    return max((dist[a].get(b, float("inf")) for a, b in itertools.combinations(members, 2)), default=0)


@given(small_graphs())
def test_weak_diameters_match_brute_force(g):
    rng = np.random.default_rng(g.n)
    labels = rng.integers(0, 3, g.n)
    groups = [[v for v in range(g.n) if labels[v] == c] for c in range(3)]
    groups = [m for m in groups if m]
    assert [float(x) for x in weak_diameters(g, groups)] == [brute_weak(g, m) for m in groups]


def test_sparse_batched_sweep_matches_brute_force():
    g = generate("gnp", seed=8, n=400, p=0.008)
    rng = np.random.default_rng(1)
    groups = [sorted(rng.choice(400, size=s, replace=False).tolist()) for s in (60, 120, 300)]
    assert [float(x) for x in weak_diameters(g, groups, batch=50)] == [brute_weak(g, m) for m in groups]


def test_dense_and_sparse_sweeps_agree():
    g = generate("gnp", seed=5, n=300, p=0.3)
    groups = [list(range(0, 300, 7)), list(range(1, 300, 11))]
    assert [float(x) for x in weak_diameters(g, groups)] == [brute_weak(g, m) for m in groups]


# ---------------------------------------------------------------------------
# Orderings from decompositions
# ---------------------------------------------------------------------------


def test_single_cluster_ordering():
    g = generate("complete", n=6)
    d = ball_growing_decomposition(g)
    assert ordering_diameter(g, decomposition_to_ordering(d)) <= max(d.max_weak_diameter, 1)


def test_path_five_ordering():
    g = generate("path", n=5)
    order = decomposition_to_ordering(ball_growing_decomposition(g))
    assert order.sequence()[:3] == [0, 2, 4]
    measured = ordering_diameter(g, order)
    assert measured == brute_ordering_diameter(g, order.labels)
    assert measured <= 2


@given(small_graphs())
def test_ordering_bound_small(g):
    d = ball_growing_decomposition(g)
    order = decomposition_to_ordering(d)
    measured = ordering_diameter(g, order)
    assert measured == brute_ordering_diameter(g, order.labels)
    assert measured <= d.num_colors * (d.max_weak_diameter + 1)


def test_cycle_eight_ordering_bound():
    g = generate("cycle", n=8)
    d = ball_growing_decomposition(g)
    assert ordering_diameter(g, decomposition_to_ordering(d)) <= d.num_colors * (d.max_weak_diameter + 1)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def test_edgeless_singletons_valid():
    g = Graph.empty(4)
    d = NetworkDecomposition.from_assignment(g, [0, 1, 2, 3], [1, 1, 1, 1])
    assert verify_decomposition(g, d, 0, 1).valid


def test_adjacent_same_color_singletons_rejected():
    g = generate("path", n=2)
    d = NetworkDecomposition.from_assignment(g, [0, 1], [1, 1])
    report = verify_decomposition(g, d, 0, 1)
    assert not report.valid
    assert report.violations[0]["kind"] == "separation" and report.violations[0]["edge"] == [0, 1]


def test_diameter_and_palette_violations():
    g = generate("path", n=4)
    d = NetworkDecomposition.from_assignment(g, [0, 0, 0, 0], [3])
    kinds = {v["kind"] for v in verify_decomposition(g, d, 2, 2).violations}
    assert kinds == {"diameter", "colors"}


def test_json_round_trip():
    g = generate("grid", rows=4, cols=4)
    d = ball_growing_decomposition(g)
    again = NetworkDecomposition.from_json(g, d.to_json())
    assert again.cluster_of == d.cluster_of and again.color_of == d.color_of
