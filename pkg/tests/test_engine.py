from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_ordering_diameter, is_mis, small_graphs
from slocal_lab.algorithms import (
    degree_sum_two_phase,
    flagging_mis,
    greedy_coloring,
    greedy_mis,
    mis_pointer_two_phase,
    scribbler,
    stamp_writer,
    verify_degree_sum,
    verify_mis,
    verify_mis_pointers,
)
from slocal_lab.engine import (
    Ordering,
    Phase,
    SlocalAlgorithm,
    SlocalRun,
    canonical_json,
    eliminate_writes,
    node_rng,
    ordering_diameter,
    reduce_phases,
    resolve_records,
    run_slocal,
)
from slocal_lab.errors import InvalidArgument, LocalityViolation, ParseError, WriteViolation
from slocal_lab.graphs import Graph, generate


def chosen(trace) -> set[int]:
    return {v for v, o in enumerate(trace.outputs) if o == 1}


# ---------------------------------------------------------------------------
# Direct runs
# ---------------------------------------------------------------------------


def test_greedy_mis_on_p3_identity():
    trace = run_slocal(generate("path", n=3), greedy_mis(), Ordering.identity(3))
    assert chosen(trace) == {0, 2}
    assert trace.max_locality == 1


def test_greedy_mis_on_p3_middle_first():
    order = Ordering.from_sequence([1, 0, 2])
    trace = run_slocal(generate("path", n=3), greedy_mis(), order)
    assert chosen(trace) == {1}
    assert trace.max_locality == 1


def test_zero_phase_algorithm():
    trace = run_slocal(generate("cycle", n=4), SlocalAlgorithm("none", ()), Ordering.identity(4))
    assert trace.outputs == [None] * 4
    assert trace.max_locality == 0


@given(small_graphs(), st.integers(0, 10**6))
def test_greedy_outputs_verified_under_any_order(g, seed):
    order = Ordering.random(g.n, seed)
    mis = run_slocal(g, greedy_mis(), order)
    assert is_mis(g, chosen(mis))
    col = run_slocal(g, greedy_coloring(), order).outputs
    assert all(col[u] != col[v] for u, v in g.edges())
    assert max(col) <= g.max_degree + 1


def test_locality_violation_detected():
    def greedy(ctx):
        ctx.query(2)

    with pytest.raises(LocalityViolation):
        run_slocal(generate("path", n=3), SlocalAlgorithm("bad", (Phase(greedy, 1),)), Ordering.identity(3))


def test_write_violation_detected():
    def far(ctx):
        ctx.write((ctx.node + 2) % 5, "x", 1)

    with pytest.raises(WriteViolation):
        run_slocal(generate("cycle", n=5), SlocalAlgorithm("bad", (Phase(far, 1, 1),)), Ordering.identity(5))


def test_node_rng_independent_of_order():
    g = generate("cycle", n=6)

    def draw(ctx):
        ctx.set_output(ctx.rng.random())

    alg = SlocalAlgorithm("draw", (Phase(draw, 0),))
    a = run_slocal(g, alg, Ordering.identity(6), seed=5).outputs
    b = run_slocal(g, alg, Ordering.random(6, 9), seed=5).outputs
    assert a == b == [node_rng(5, v).random() for v in range(6)]


def test_slocal_run_is_incremental():
    g = generate("path", n=4)
    run = SlocalRun(g, Ordering.identity(4))
    for phase in degree_sum_two_phase().phases:
        run.run_phase(phase)
    assert run.trace().outputs == run_slocal(g, degree_sum_two_phase(), Ordering.identity(4)).outputs


# ---------------------------------------------------------------------------
# Orderings
# ---------------------------------------------------------------------------


def test_ordering_rejects_duplicates():
    with pytest.raises(InvalidArgument):
        Ordering((0, 0, 1))


def test_ordering_parse_and_format():
    order = Ordering.parse("0 5\n1 2\n2 9\n", 3)
    assert order.sequence() == [1, 0, 2]
    assert Ordering.parse(order.format(), 3) == order
    with pytest.raises(ParseError):
        Ordering.parse("0 1\n", 2)


# ---------------------------------------------------------------------------
# Remote-write elimination
# ---------------------------------------------------------------------------


def effective(trace):
    return canonical_json([[s.output for s in trace.states], resolve_records(trace)])


def direct(trace):
    return canonical_json([[s.output for s in trace.states], [s.memory for s in trace.states]])


def test_eliminate_writes_identity_without_writes():
    alg = greedy_mis()
    assert eliminate_writes(alg) is alg


def test_flagging_on_c5():
    g = generate("cycle", n=5)
    order = Ordering.identity(5)
    original = run_slocal(g, flagging_mis(), order)
    pure = eliminate_writes(flagging_mis())
    assert pure.pure and pure.phases[0].locality == 2
    transformed = run_slocal(g, pure, order)
    assert transformed.max_locality <= 2
    assert transformed.outputs == original.outputs
    assert chosen(original) == {0, 2}


def test_two_writers_later_wins():
    g = generate("path", n=3)
    trace = run_slocal(g, stamp_writer(), Ordering.identity(3))
    assert trace.states[1].memory["stamp"] == 2
    pure = run_slocal(g, eliminate_writes(stamp_writer()), Ordering.identity(3))
    assert resolve_records(pure)[1]["stamp"] == 2
    assert effective(pure) == direct(trace)


@given(small_graphs(max_n=9), st.integers(0, 1000), st.sampled_from([(1, 1), (2, 1), (2, 2), (3, 2)]))
def test_eliminate_writes_matches_original(g, seed, radii):
    r, w = radii
    alg = scribbler(r, w)
    order = Ordering.random(g.n, seed)
    original = run_slocal(g, alg, order, seed)
    transformed = run_slocal(g, eliminate_writes(alg), order, seed)
    assert transformed.max_locality <= r + w
    assert effective(transformed) == direct(original)


# ---------------------------------------------------------------------------
# Phase folding
# ---------------------------------------------------------------------------


def test_reduce_phases_single_phase_identity():
    alg = greedy_mis()
    assert reduce_phases(alg) is alg


def test_reduce_phases_degree_sum():
    g = generate("gnp", seed=21, n=20, p=0.3)
    alg = degree_sum_two_phase()
    folded = reduce_phases(alg)
    assert folded.k == 1
    two = run_slocal(g, alg, Ordering.identity(20))
    one = run_slocal(g, folded, Ordering.identity(20))
    assert one.max_locality <= 3
    assert one.outputs == two.outputs
    assert verify_degree_sum(g, one.outputs)


@pytest.mark.parametrize("seed", range(50))
def test_reduce_phases_mis_pointer_random_orders(seed):
    g = generate("gnp", seed=7, n=25, p=0.15)
    folded = reduce_phases(mis_pointer_two_phase())
    trace = run_slocal(g, folded, Ordering.random(g.n, seed))
    assert trace.max_locality <= 3
    assert verify_mis_pointers(g, trace.outputs)


def test_reduce_phases_rejects_writers():
    with pytest.raises(InvalidArgument):
        reduce_phases(SlocalAlgorithm("w", flagging_mis().phases * 2))


# ---------------------------------------------------------------------------
# Ordering diameter
# ---------------------------------------------------------------------------


def test_ordering_diameter_examples():
    assert ordering_diameter(Graph.empty(1), Ordering.identity(1)) == 0
    p3 = generate("path", n=3)
    assert ordering_diameter(p3, Ordering((1, 2, 3))) == 2
    assert ordering_diameter(p3, Ordering((1, 3, 2))) == 1


@given(small_graphs(), st.integers(0, 10**6))
def test_ordering_diameter_matches_enumeration(g, seed):
    order = Ordering.random(g.n, seed)
    assert ordering_diameter(g, order) == brute_ordering_diameter(g, order.labels)


def test_verifiers_reject_bad_outputs():
    g = generate("path", n=3)
    assert not verify_mis(g, [1, 1, 0])
    assert not verify_mis(g, [0, 0, 0])
    assert not verify_mis_pointers(g, [0, 0, 0])
