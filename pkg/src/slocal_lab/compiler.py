"""Synchronous LOCAL execution and the two sequential-to-local compilers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .decomposition import (
    NetworkDecomposition,
    ball_growing_decomposition,
    decomposition_to_ordering,
    weak_diameters,
)
from .engine import (
    BallView,
    ExecutionTrace,
    NodeContext,
    NodeState,
    Ordering,
    SlocalAlgorithm,
    StateView,
    canonical_json,
    ordering_diameter,
    run_slocal,
    simulate_procedure,
    view_of,
)
from .errors import CompilationError, InvalidArgument, InvariantError, SeparationViolation, WriteViolation
from .graphs import Graph, bfs_distances, power_graph

__all__ = [
    "LocalStep",
    "LocalProgram",
    "CompilationReport",
    "run_local",
    "charged_rounds",
    "compile_via_ordering",
    "compile_via_decomposition",
]

SIM_KEY = "sim"


@dataclass(frozen=True)
class LocalStep:
    radius: int
    procedure: Callable[[NodeContext], None]


@dataclass(frozen=True)
class LocalProgram:
    steps: tuple[LocalStep, ...]

    @property
    def rounds(self) -> int:
        return sum(s.radius for s in self.steps)


class _SnapshotBackend:
    def __init__(self, graph: Graph, snapshot: list[NodeState], fresh: list[NodeState]):
        self.graph = graph
        self.snapshot = snapshot
        self.fresh = fresh

    def _state(self, u: int) -> StateView:
        return view_of(u, self.snapshot[u])

    def own(self, u: int) -> StateView:
        return view_of(u, self.fresh[u])

    def view(self, center: int, radius: int) -> BallView:
        dist = bfs_distances(self.graph, center, radius)
        return BallView(center, radius, dist, self.graph.neighbors, self._state)

    def zone(self, a: int, radius: int) -> Any:
        return ()

    def write(self, ctx: NodeContext, target: int, key: str, value: Any) -> None:
        if target != ctx.node:
            raise WriteViolation(ctx.node, target, 0)
        self.fresh[target].memory[key] = value

    def set_output(self, node: int, value: Any) -> None:
        self.fresh[node].output = value


def run_local(
    graph: Graph, program: LocalProgram, seed: int = 0, inputs: Sequence[Any] | None = None
) -> ExecutionTrace:
    """Run ``program`` synchronously.

    In every step each node reads a snapshot of the states within the step
    radius as of the step start; updates become visible in the next step.
    """
    states = [NodeState(None if inputs is None else inputs[v]) for v in range(graph.n)]
    locality = [0] * graph.n
    rounds = 0
    per_step = []
    for index, step in enumerate(program.steps):
        snapshot = [s.copy() for s in states]
        fresh = [s.copy() for s in states]
        backend = _SnapshotBackend(graph, snapshot, fresh)
        worst = 0
        for v in range(graph.n):
            ctx = NodeContext(v, v, index, seed, step.radius, 0, backend)
            step.procedure(ctx)
            worst = max(worst, ctx.observed)
            locality[v] = max(locality[v], ctx.observed)
        states = fresh
        rounds += step.radius
        per_step.append(worst)
    return ExecutionTrace(tuple(states), tuple(locality), tuple(per_step), None, rounds)


def charged_rounds(r: int, n: int, beta: float = 1.0) -> int:
    """Cost charged for a decomposition of the r-th power graph: ceil(beta * r * log2(n)^2)."""
    return math.ceil(beta * r * math.log2(n) ** 2) if n > 1 else 0


@dataclass
class CompilationReport:
    rounds_measured: int
    rounds_charged: int
    phases: int
    equality: bool
    diff: list[dict[str, Any]]
    round_bound: int
    trace: ExecutionTrace | None = field(default=None, repr=False, compare=False)
    order: Ordering | None = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict[str, Any]:
        return {
            "rounds_measured": self.rounds_measured,
            "rounds_charged": self.rounds_charged,
            "phases": self.phases,
            "equality": self.equality,
            "diff": self.diff,
            "round_bound": self.round_bound,
        }


def _pack(state: NodeState) -> tuple:
    return (tuple(sorted(state.memory.items())), state.output)


def _compare(reference: ExecutionTrace, compiled: list[tuple[dict[str, Any], Any]]) -> list[dict[str, Any]]:
    diff = []
    for v, (mem, out) in enumerate(compiled):
        ref = reference.states[v]
        if canonical_json([ref.output, ref.memory]) != canonical_json([out, mem]):
            diff.append({"node": v, "expected": ref.output, "compiled": out})
    return diff


def _single_pure(algorithm: SlocalAlgorithm) -> int:
    if algorithm.k != 1 or not algorithm.pure:
        raise InvalidArgument("compilers expect a single-phase algorithm without remote writes")
    return algorithm.phases[0].locality


def _unpack_sim(trace: ExecutionTrace) -> list[tuple[dict[str, Any], Any]]:
    out = []
    for s in trace.states:
        if SIM_KEY not in s.memory:
            raise CompilationError("a node finished without committing its simulated state")
        items, output = s.memory[SIM_KEY]
        out.append((dict(items), output))
    return out


# ---------------------------------------------------------------------------
# Compilation along a low-diameter ordering
# ---------------------------------------------------------------------------


def compile_via_ordering(
    graph: Graph,
    algorithm: SlocalAlgorithm,
    order: Ordering,
    seed: int = 0,
    inputs: Sequence[Any] | None = None,
    ell: int | None = None,
) -> tuple[LocalProgram, CompilationReport]:
    """One gather of radius ``ell*r + r``, then local simulation of the dependency closure."""
    r = _single_pure(algorithm)
    procedure = algorithm.phases[0].procedure
    labels = order.labels
    measured = ordering_diameter(power_graph(graph, r), order) if r > 0 else 0
    if ell is None:
        ell = measured
    elif measured > ell:
        raise InvalidArgument(f"ordering diameter {measured} exceeds the claimed {ell}")
    radius = ell * r + r

    def step(ctx: NodeContext) -> None:
        v = ctx.node
        big = ctx.query(radius)
        closure = {v}
        stack = [v]
        while stack:
            x = stack.pop()
            if big.dist[x] > ell * r:
                raise CompilationError(f"dependency closure of {v} reaches {x} beyond distance {ell * r}")
            if r == 0:
                continue
            for z in big.within(x, r):
                if labels[z] < labels[x] and z not in closure:
                    closure.add(z)
                    stack.append(z)
        sim: dict[int, NodeState] = {}

        def state_of(z: int) -> StateView:
            if z in sim:
                return view_of(z, sim[z])
            return view_of(z, NodeState(big.input(z)))

        for x in sorted(closure, key=labels.__getitem__):
            sim[x], _ = simulate_procedure(
                procedure,
                big=big,
                node=x,
                label=labels[x],
                phase=0,
                seed=ctx.seed,
                locality=r,
                start=NodeState(big.input(x)),
                state_of=state_of,
            )
        ctx.store(SIM_KEY, _pack(sim[v]))
        ctx.set_output(sim[v].output)

    program = LocalProgram((LocalStep(radius, step),))
    trace = run_local(graph, program, seed, inputs)
    reference = run_slocal(graph, algorithm, order, seed, inputs)
    diff = _compare(reference, _unpack_sim(trace))
    if trace.rounds > radius:
        raise InvariantError(f"compiled rounds {trace.rounds} exceed {radius}")
    report = CompilationReport(trace.rounds, 0, 1, not diff, diff, radius, trace, order)
    return program, report


# ---------------------------------------------------------------------------
# Compilation along decomposition phases
# ---------------------------------------------------------------------------


def compile_via_decomposition(
    graph: Graph,
    algorithm: SlocalAlgorithm,
    seed: int = 0,
    inputs: Sequence[Any] | None = None,
    beta: float = 1.0,
    decomposition: NetworkDecomposition | None = None,
) -> tuple[LocalProgram, CompilationReport]:
    """Simulate the algorithm cluster by cluster, one color class per phase.

    Every node of a cluster gathers the cluster's r-neighborhood, replays
    the algorithm on the cluster's nodes in processing order and keeps its
    own resulting state. ``decomposition`` overrides the default
    decomposition of the (r+1)-th power graph (used to test separation
    checks).
    """
    r = _single_pure(algorithm)
    procedure = algorithm.phases[0].procedure
    if decomposition is None:
        decomposition = ball_growing_decomposition(power_graph(graph, r + 1))
        decomposition = NetworkDecomposition(
            decomposition.cluster_of, decomposition.color_of, decomposition.weak_diameter, r + 1
        )
    order = decomposition_to_ordering(decomposition)
    labels = order.labels
    clusters = decomposition.clusters()
    cluster_of = decomposition.cluster_of
    color_of = decomposition.color_of
    base_diam = [int(d) for d in weak_diameters(graph, clusters)]
    q = decomposition.num_colors
    steps = []
    for color in range(1, q + 1):
        in_phase = [c for c in range(len(clusters)) if color_of[c] == color]
        radius = max(base_diam[c] for c in in_phase) + r if in_phase else 0
        steps.append(LocalStep(radius, _phase_step(procedure, r, radius, color, clusters, cluster_of, color_of, labels)))
    program = LocalProgram(tuple(steps))
    trace = run_local(graph, program, seed, inputs)
    reference = run_slocal(graph, algorithm, order, seed, inputs)
    diff = _compare(reference, _unpack_sim(trace))
    bound = q * (decomposition.max_weak_diameter * decomposition.base_graph_radius + r)
    charged = charged_rounds(r + 1, graph.n, beta)
    if trace.rounds > bound:
        raise InvariantError(f"compiled rounds {trace.rounds} exceed {bound}")
    report = CompilationReport(trace.rounds, charged, q, not diff, diff, bound, trace, order)
    return program, report


def _phase_step(procedure, r, radius, color, clusters, cluster_of, color_of, labels):
    def step(ctx: NodeContext) -> None:
        v = ctx.node
        own_cluster = cluster_of[v]
        if color_of[own_cluster] != color:
            return
        big = ctx.query(radius)
        sim: dict[int, NodeState] = {}

        def state_of(z: int) -> StateView:
            if z in sim:
                return view_of(z, sim[z])
            cz = cluster_of[z]
            if cz != own_cluster and color_of[cz] == color:
                raise SeparationViolation(f"cluster {own_cluster} read node {z} of same-phase cluster {cz}")
            committed = big.memory(z).get(SIM_KEY)
            if committed is None:
                return view_of(z, NodeState(big.input(z)))
            return view_of(z, NodeState(big.input(z), dict(committed[0]), committed[1]))

        for x in sorted(clusters[own_cluster], key=labels.__getitem__):
            sim[x], _ = simulate_procedure(
                procedure,
                big=big,
                node=x,
                label=labels[x],
                phase=0,
                seed=ctx.seed,
                locality=r,
                start=NodeState(big.input(x)),
                state_of=state_of,
            )
        ctx.store(SIM_KEY, _pack(sim[v]))
        ctx.set_output(sim[v].output)

    return step
