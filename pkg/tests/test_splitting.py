from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import split_counts
from slocal_lab.errors import InvalidArgument, OracleFailure
from slocal_lab.graphs import BipartiteGraph, random_bipartite
from slocal_lab.splitting import (
    BLUE,
    RED,
    Constraint,
    SplitColoring,
    balanced_coloring_search,
    discrepancy_bound,
    partition_neighborhood,
    random_split,
    reduce_lambda_to_weak,
    slocal_lambda_split_run,
    slocal_weak_split,
    verify_lambda_split,
    verify_weak_split,
)


def coloring(*colors: str) -> SplitColoring:
    return SplitColoring(tuple(colors))


def lambda_ok(b: BipartiteGraph, c: SplitColoring, lam: Fraction) -> bool:
    red = {v for v, x in enumerate(c.color_of) if x == RED}
    nbhds = [b.left_neighbors(u) for u in range(b.left)]
    return all(min(r, bl) >= math.floor(lam * (r + bl)) for r, bl in split_counts(nbhds, red))


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def test_verify_examples():
    b = BipartiteGraph.from_neighborhoods(2, [[0, 1]])
    assert verify_lambda_split(b, coloring(RED, BLUE), Fraction(1, 2)).valid
    report = verify_lambda_split(b, coloring(RED, RED), Fraction(1, 2))
    assert not report.valid and report.violators == [0]
    five = BipartiteGraph.from_neighborhoods(5, [[0, 1, 2, 3, 4]])
    assert verify_lambda_split(five, coloring(*[RED] * 5), Fraction(1, 10)).valid


def test_verify_rejects_out_of_range_lambda():
    b = BipartiteGraph.from_neighborhoods(2, [[0, 1]])
    with pytest.raises(InvalidArgument):
        verify_lambda_split(b, coloring(RED, BLUE), Fraction(3, 4))


@given(st.integers(0, 10**6), st.sampled_from([Fraction(0), Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)]))
def test_verify_matches_counting_oracle(seed, lam):
    b = random_bipartite(4, 12, 0, 12, seed=seed)
    rng = random.Random(seed)
    c = SplitColoring(tuple(rng.choice((RED, BLUE)) for _ in range(12)))
    assert verify_lambda_split(b, c, lam).valid == lambda_ok(b, c, lam)


def test_weak_verification():
    b = BipartiteGraph.from_neighborhoods(3, [[0, 1], [2]])
    assert not verify_weak_split(b, coloring(RED, BLUE, RED)).valid
    assert verify_weak_split(BipartiteGraph.from_neighborhoods(3, [[0, 1]]), coloring(RED, BLUE, RED)).valid


def test_json_round_trip():
    c = coloring(RED, BLUE, BLUE)
    assert SplitColoring.from_json(c.to_json(), 3) == c


# ---------------------------------------------------------------------------
# Random splitting
# ---------------------------------------------------------------------------


def test_random_empty_right_side():
    assert random_split(BipartiteGraph.from_neighborhoods(0, [[]]), 3).color_of == ()


def test_random_golden():
    b = BipartiteGraph.from_neighborhoods(6, [[0, 1, 2, 3], [2, 3, 4, 5]])
    assert random_split(b, 7).color_of == (BLUE, RED, RED, BLUE, BLUE, RED)


def test_random_success_rate():
    n_right, left = 400, 6
    n = n_right + left
    delta = math.ceil(64 * math.log(n))
    b = random_bipartite(left, n_right, delta, n_right, seed=1)
    lam = Fraction(1, 2) - Fraction(math.sqrt(math.log(n) / b.min_left_degree)).limit_denominator(10**9)
    ok = sum(verify_lambda_split(b, random_split(b, s), lam).valid for s in range(100))
    assert ok >= 95


# ---------------------------------------------------------------------------
# Balanced coloring search
# ---------------------------------------------------------------------------


def test_search_two_nodes_balanced():
    out = balanced_coloring_search([0, 1], [Constraint((0, 1), 0)])
    assert sorted(out.values()) == [BLUE, RED]


def test_search_three_nodes_parity():
    out = balanced_coloring_search([0, 1, 2], [Constraint((0, 1, 2), 1)])
    assert sorted(out.values()).count(RED) in (1, 2)


def test_search_chernoff_constraints():
    rng = random.Random(4)
    log_n = math.log(12)
    constraints = []
    for i in range(5):
        members = tuple(sorted(rng.sample(range(12), 7)))
        constraints.append(Constraint(members, discrepancy_bound(4.0, len(members), log_n), key=i))
    out = balanced_coloring_search(range(12), constraints, retries=0)
    red_of = {v: out[v] == RED for v in range(12)}
    assert all(c.satisfied(red_of) for c in constraints)


def brute_feasible(n: int, constraints) -> bool:
    for bits in itertools.product((True, False), repeat=n):
        if all(c.satisfied(dict(enumerate(bits))) for c in constraints):
            return True
    return False


@given(st.integers(0, 10**6))
def test_search_finds_tight_assignments_when_they_exist(seed):
    rng = random.Random(seed)
    constraints = []
    for i in range(5):
        size = rng.choice((2, 4, 6))
        constraints.append(Constraint(tuple(sorted(rng.sample(range(12), size))), 0, key=i))
    if not brute_feasible(12, constraints):
        return
    out = balanced_coloring_search(range(12), constraints, retries=0, seed=seed)
    red_of = {v: out[v] == RED for v in range(12)}
    assert all(c.satisfied(red_of) for c in constraints)


# ---------------------------------------------------------------------------
# Sequential-local splitting
# ---------------------------------------------------------------------------


def test_slocal_two_neighbors():
    b = BipartiteGraph.from_neighborhoods(2, [[0, 1]])
    res = slocal_lambda_split_run(b)
    assert sorted(res.coloring.color_of) == [BLUE, RED]
    assert res.discrepancy == [0]


def test_slocal_empty_left_side():
    b = BipartiteGraph.from_neighborhoods(5, [])
    res = slocal_lambda_split_run(b)
    assert res.coloring.color_of == (RED,) * 5


def test_slocal_dense_instance_meets_computed_lambda():
    right, left = 800, 10
    n = right + left
    delta = math.ceil(16 * math.log(n) ** 2)
    b = random_bipartite(left, right, delta, right, seed=2)
    alpha = 4.0
    res = slocal_lambda_split_run(b, alpha=alpha, seed=2)
    log_n = math.log(n)
    for u in range(b.left):
        d = len(b.left_neighbors(u))
        assert res.discrepancy[u] <= discrepancy_bound(alpha, d, log_n, res.clusters_touched[u]) + 1e-9
    k_max = max(res.clusters_touched)
    lam = 0.5 - alpha * (math.sqrt(k_max * log_n / delta) + k_max * log_n / delta) / 2
    assert lam > 0
    assert verify_lambda_split(b, res.coloring, Fraction(lam).limit_denominator(10**9)).valid


@given(st.integers(0, 10**6))
def test_slocal_bounds_on_small_instances(seed):
    b = random_bipartite(3, 20, 2, 10, seed=seed)
    res = slocal_lambda_split_run(b, seed=seed)
    log_n = math.log(b.node_count)
    for u in range(b.left):
        d = len(b.left_neighbors(u))
        assert res.discrepancy[u] <= discrepancy_bound(4.0, d, log_n, res.clusters_touched[u]) + 1e-9


# ---------------------------------------------------------------------------
# Reduction to weak splitting
# ---------------------------------------------------------------------------


def test_partition_examples():
    assert [len(p) for p in partition_neighborhood(list(range(4)), 4)] == [4]
    assert [len(p) for p in partition_neighborhood(list(range(10)), 4)] == [4, 3, 3]
    assert [len(p) for p in partition_neighborhood(list(range(5)), 4)] == [5]


@given(st.integers(1, 60), st.integers(1, 12))
def test_partition_properties(d, delta):
    if d < delta:
        with pytest.raises(InvalidArgument):
            partition_neighborhood(list(range(d)), delta)
        return
    parts = partition_neighborhood(list(range(d)), delta)
    assert sorted(v for p in parts for v in p) == list(range(d))
    assert len(parts) >= d // delta
    assert all(len(p) >= 1 for p in parts)


def test_bichromatic_parts_give_enough_of_each_color():
    parts = partition_neighborhood(list(range(10)), 4)
    assert len(parts) == 3 >= 10 // 4


@pytest.mark.parametrize("seed", range(20))
def test_reduce_to_weak_with_slocal_splitter(seed):
    b = random_bipartite(6, 200, 40, 60, seed=seed)
    out = reduce_lambda_to_weak(b, 16, lambda d: slocal_weak_split(d, seed=seed))
    assert lambda_ok(b, out, Fraction(1, 16))


def test_reduce_to_weak_detects_bad_oracle():
    b = random_bipartite(3, 40, 20, 30, seed=1)
    with pytest.raises(OracleFailure):
        reduce_lambda_to_weak(b, 8, lambda d: SplitColoring((RED,) * d.right))
