from __future__ import annotations

import math
from fractions import Fraction

import pytest

from conftest import cf_ok, decomposition_ok
from slocal_lab.cfcoloring import MultiColoring, slocal_cf_run
from slocal_lab.errors import InvalidArgument, OracleFailure
from slocal_lab.graphs import Graph, Hypergraph, generate, random_hypergraph
from slocal_lab.reductions import (
    ball_hypergraphs,
    cf_from_split,
    cf_from_split_run,
    decomposition_from_cf,
    lambda_split_oracle,
)
from slocal_lab.splitting import RED, SplitColoring


def never(_):
    raise AssertionError("oracle must not be called")


def slocal_cf_oracle(h: Hypergraph) -> MultiColoring:
    return slocal_cf_run(h).coloring


# ---------------------------------------------------------------------------
# Conflict-free coloring from splitting
# ---------------------------------------------------------------------------


def test_small_edges_skip_the_oracle():
    h = Hypergraph(6, ((0, 1, 2), (2, 3), (0, 4, 5)))
    res = cf_from_split_run(h, 4, never)
    assert res.phases == 1 and res.ranks == [3]
    assert cf_ok(h.edges, res.coloring.colors)


def test_single_large_edge_rank_sequence():
    h = Hypergraph(20, (tuple(range(20)),))
    res = cf_from_split_run(h, 8, lambda_split_oracle(8))
    assert res.ranks == [20, 10, 5]
    assert all(a - b >= 20 // 8 for a, b in zip(res.ranks, res.ranks[1:]))
    assert cf_ok(h.edges, res.coloring.colors)


def test_uniform_64_end_to_end():
    h = random_hypergraph(300, 200, 64, seed=5)
    delta = 8
    res = cf_from_split_run(h, delta, lambda_split_oracle(delta))
    assert cf_ok(h.edges, res.coloring.colors)
    assert res.phases <= math.ceil(2 * delta * math.log(64)) + 1
    assert all(2 * delta * b <= (2 * delta - 1) * a for a, b in zip(res.ranks, res.ranks[1:]))


def test_lambda_must_be_reciprocal():
    h = Hypergraph(3, ((0, 1, 2),))
    with pytest.raises(InvalidArgument):
        cf_from_split(h, Fraction(2, 5), never)
    assert cf_ok(h.edges, cf_from_split(h, Fraction(1, 4), never).colors)


def test_bad_split_oracle_detected():
    h = Hypergraph(20, (tuple(range(20)),))
    with pytest.raises(OracleFailure):
        cf_from_split_run(h, 4, lambda b: SplitColoring((RED,) * b.right))


# ---------------------------------------------------------------------------
# Decomposition from conflict-free coloring
# ---------------------------------------------------------------------------


def test_single_node():
    assignment, decomp = decomposition_from_cf(Graph.empty(1), Fraction(1, 2), 6, slocal_cf_oracle)
    assert assignment.radius_of == (0,) and assignment.center_of == (0,)
    assert decomp.num_clusters == 1


def test_complete_graph_shares_center():
    g = generate("complete", n=6)
    assignment, decomp = decomposition_from_cf(g, Fraction(1, 2), 6, slocal_cf_oracle)
    assert set(assignment.radius_of) == {1}
    assert len(set(assignment.center_of)) == 1 and decomp.num_clusters == 1


def test_ball_hypergraph_radii_on_complete_graph():
    radii, classes, edges = ball_hypergraphs(generate("complete", n=5), Fraction(1, 2), 3)
    assert radii == [1] * 5 and len(set(classes)) == 1
    assert list(edges.values()) == [[(0, 1, 2, 3, 4)]]


@pytest.mark.parametrize("graph", [generate("cycle", n=50), generate("grid", rows=6, cols=6),
                                   generate("gnp", seed=3, n=60, p=0.06)], ids=["c50", "grid6", "gnp60"])
def test_end_to_end_with_slocal_oracle(graph):
    q = 6
    assignment, decomp = decomposition_from_cf(graph, Fraction(1, 2), q, slocal_cf_oracle)
    d = 2 * max(r + q for r in assignment.radius_of)
    c = q * len(ball_hypergraphs(graph, Fraction(1, 2), q)[2])
    assert decomposition_ok(graph, decomp.cluster_of, decomp.color_of, d, c)


def test_oracle_with_too_many_colors_rejected():
    def wide(h: Hypergraph) -> MultiColoring:
        return MultiColoring.from_sets([[9]] * h.n, 9)

    with pytest.raises(OracleFailure):
        decomposition_from_cf(generate("cycle", n=10), Fraction(1, 2), 6, wide)


def test_non_cf_oracle_rejected():
    with pytest.raises(OracleFailure):
        decomposition_from_cf(generate("cycle", n=10), Fraction(1, 2), 6, lambda h: MultiColoring.from_sets([[1]] * h.n, 1))


def test_epsilon_range():
    with pytest.raises(InvalidArgument):
        decomposition_from_cf(generate("cycle", n=5), Fraction(1), 6, slocal_cf_oracle)
