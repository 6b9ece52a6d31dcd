from __future__ import annotations

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import nx_distances, small_graphs, to_nx
from slocal_lab.errors import InvalidArgument, ParseError
from slocal_lab.graphs import (
    BipartiteGraph,
    Graph,
    Hypergraph,
    ball,
    bfs_distances,
    format_bipartite,
    format_graph,
    format_hypergraph,
    generate,
    parse_bipartite,
    parse_graph,
    parse_hypergraph,
    power_graph,
    random_bipartite,
    random_hypergraph,
    read_graph,
    regularize,
    write_graph,
)


def edge_set(g: Graph) -> set[tuple[int, int]]:
    return set(g.edges())


# ---------------------------------------------------------------------------
# Balls and distances
# ---------------------------------------------------------------------------


def test_ball_zero_radius_is_center():
    g = generate("cycle", n=6)
    assert ball(g, 3, 0) == {3}


def test_ball_examples_on_path():
    p5 = generate("path", n=5)
    assert ball(p5, 2, 1) == {1, 2, 3}
    assert ball(p5, 0, 3) == {0, 1, 2, 3}


@given(small_graphs(), st.integers(0, 11), st.integers(0, 5))
def test_ball_matches_networkx(g, center, radius):
    center %= g.n
    expected = set(nx.single_source_shortest_path_length(to_nx(g), center, cutoff=radius))
    assert ball(g, center, radius) == expected
    dist = bfs_distances(g, center, radius)
    truth = nx_distances(g)[center]
    assert dist == {v: d for v, d in truth.items() if d <= radius}


# ---------------------------------------------------------------------------
# Power graphs
# ---------------------------------------------------------------------------


def test_power_one_is_identity():
    g = generate("gnp", seed=3, n=15, p=0.3)
    assert edge_set(power_graph(g, 1)) == edge_set(g)


def test_power_examples_on_p4():
    p4 = generate("path", n=4)
    assert edge_set(power_graph(p4, 2)) == {(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)}
    assert edge_set(power_graph(p4, 3)) == edge_set(generate("complete", n=4))


@given(small_graphs(), st.integers(1, 4))
def test_power_graph_matches_distance_table(g, r):
    dist = nx_distances(g)
    expected = {(u, v) for u in range(g.n) for v in range(u + 1, g.n) if dist[u].get(v, r + 1) <= r}
    assert edge_set(power_graph(g, r)) == expected


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def test_cycle_definition():
    assert edge_set(generate("cycle", n=5)) == {(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)}


def test_gnp_extremes():
    assert generate("random_gnp", seed=4, n=10, p=0).m == 0
    assert edge_set(generate("random_gnp", seed=4, n=10, p=1)) == edge_set(generate("complete", n=10))


def test_gnp_rejects_bad_probability():
    with pytest.raises(InvalidArgument):
        generate("gnp", seed=0, n=5, p=1.5)


def test_generators_are_deterministic():
    a = generate("gnp", seed=11, n=60, p=0.1)
    b = generate("gnp", seed=11, n=60, p=0.1)
    assert a == b
    assert generate("random_regular", seed=2, n=20, d=3) == generate("random_regular", seed=2, n=20, d=3)


def test_grid_and_regular_shapes():
    grid = generate("grid", rows=3, cols=4)
    assert grid.n == 12 and grid.m == 3 * 3 + 2 * 4
    reg = generate("random_regular", seed=1, n=10, d=3)
    assert all(reg.degree(v) == 3 for v in range(10))


def test_unknown_kind_rejected():
    with pytest.raises(InvalidArgument):
        generate("torus", n=4)


def test_random_hypergraph_and_bipartite_sizes():
    h = random_hypergraph(40, 25, 5, seed=1, k_max=7)
    assert h.m <= 25 and all(5 <= len(e) <= 7 for e in h.edges)
    b = random_bipartite(4, 30, 10, 12, seed=2)
    assert b.left == 4 and b.right == 30
    assert all(10 <= len(b.left_neighbors(u)) <= 12 for u in range(4))


# ---------------------------------------------------------------------------
# Regularization gadget
# ---------------------------------------------------------------------------


def test_regularize_already_regular():
    k4 = generate("complete", n=4)
    big, mapping = regularize(k4, 3)
    assert big == k4
    assert [mapping.original(v) for v in range(4)] == [0, 1, 2, 3]


def test_regularize_single_edge():
    big, mapping = regularize(generate("path", n=2), 3)
    assert big.n == 10
    assert all(big.degree(v) == 3 for v in range(big.n))
    assert len(mapping.gadget_nodes()) == 8


def test_regularize_single_node_odd_deficit():
    big, _ = regularize(Graph.empty(1), 1)
    assert big.n == 2 and edge_set(big) == {(0, 1)}


@given(small_graphs(max_n=8), st.sampled_from([1, 3, 5, 7, 9]))
def test_regularize_properties(g, d):
    if d < g.max_degree:
        with pytest.raises(InvalidArgument):
            regularize(g, d)
        return
    big, mapping = regularize(g, d)
    assert all(big.degree(v) == d for v in range(big.n))
    induced, ids = big.induced(range(g.n))
    assert ids == list(range(g.n)) and edge_set(induced) == edge_set(g)
    assert [mapping.original(v) for v in range(g.n)] == list(range(g.n))


def test_regularize_rejects_even_degree():
    with pytest.raises(InvalidArgument):
        regularize(generate("path", n=3), 4)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def test_parse_path_three():
    assert edge_set(parse_graph("3 2\n0 1\n1 2")) == {(0, 1), (1, 2)}


def test_parse_rejects_out_of_range():
    with pytest.raises(ParseError):
        parse_graph("2 1\n0 5")


@pytest.mark.parametrize(
    "text",
    ["", "3\n", "3 2\n0 1\n", "3 1\n0 0\n", "3 2\n0 1\n1 0\n", "3 1\n0 x\n", "3 1\n0 1 2\n"],
)
def test_parse_graph_errors(text):
    with pytest.raises(ParseError):
        parse_graph(text)


def test_round_trip_is_canonical(tmp_path):
    text = "# comment\n4 3\n2 1\n\n3 0\n0 1\n"
    g = parse_graph(text)
    path = tmp_path / "g.txt"
    write_graph(g, path)
    assert path.read_text() == "4 3\n0 1\n0 3\n1 2\n"
    assert read_graph(path) == g


@given(small_graphs())
def test_graph_round_trip_property(g):
    assert parse_graph(format_graph(g)) == g


def test_hypergraph_and_bipartite_round_trip():
    h = Hypergraph(5, ((0, 1, 2), (3,), (1, 4)))
    assert parse_hypergraph(format_hypergraph(h)) == h
    b = BipartiteGraph.from_neighborhoods(4, [[0, 1], [2, 3, 1]])
    again = parse_bipartite(format_bipartite(b))
    assert [again.left_neighbors(u) for u in range(2)] == [b.left_neighbors(u) for u in range(2)]


@pytest.mark.parametrize("text", ["3 1\n2 0 0\n", "3 1\n0\n", "3 1\n2 0 7\n", "3 2\n2 0 1\n2 1 0\n"])
def test_parse_hypergraph_errors(text):
    with pytest.raises(ParseError):
        parse_hypergraph(text)


def test_parse_bipartite_errors():
    with pytest.raises(ParseError):
        parse_bipartite("1 2 1\n0 2\n")


def test_conflict_graph_joins_shared_neighbors():
    b = BipartiteGraph.from_neighborhoods(4, [[0, 1], [1, 2]])
    assert edge_set(b.conflict_graph()) == {(0, 1), (1, 2)}
