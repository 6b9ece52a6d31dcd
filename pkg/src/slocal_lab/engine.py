"""Sequential-local execution engine.

A node procedure receives a :class:`NodeContext` and may only interact with
the world through ``query``, ``write``/``store`` and ``set_output``. The
same context type is reused by every emulation layer (write elimination,
phase folding, compiled simulation), each of which plugs in its own backend.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    CompilationError,
    InvalidArgument,
    LocalityViolation,
    ParseError,
    WriteViolation,
)
from .graphs import Graph, bfs_distances

__all__ = [
    "NodeState",
    "StateView",
    "BallView",
    "NodeContext",
    "Ordering",
    "Phase",
    "SlocalAlgorithm",
    "ExecutionTrace",
    "SlocalRun",
    "run_slocal",
    "eliminate_writes",
    "reduce_phases",
    "resolve_records",
    "ordering_diameter",
    "simulate_procedure",
    "node_rng",
    "canonical_json",
]

Procedure = Callable[["NodeContext"], None]

RECORDS_KEY = "__records__"


def node_rng(seed: int, node: int, phase: int = 0) -> random.Random:
    """Private random stream of ``node`` for ``phase``; independent of any order."""
    return random.Random(f"slocal:{seed}:{node}:{phase}")


def _jsonable(value: Any) -> Any:
    if isinstance(value, (set, frozenset)):
        return sorted(_jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(_jsonable(value), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# States and views
# ---------------------------------------------------------------------------


@dataclass
class NodeState:
    input: Any = None
    memory: dict[str, Any] = field(default_factory=dict)
    output: Any = None

    def copy(self) -> "NodeState":
        return NodeState(self.input, dict(self.memory), self.output)


@dataclass(frozen=True)
class StateView:
    node: int
    input: Any
    memory: Mapping[str, Any]
    output: Any


def view_of(node: int, state: NodeState) -> StateView:
    return StateView(node, state.input, MappingProxyType(state.memory), state.output)


class BallView:
    """Read access to the nodes of one queried ball.

    Topology is exposed as the subgraph induced by the ball.
    """

    __slots__ = ("center", "radius", "dist", "_nbrs", "_state", "_nodes")

    def __init__(
        self,
        center: int,
        radius: int,
        dist: dict[int, int],
        neighbors: Callable[[int], Sequence[int]],
        state: Callable[[int], StateView],
    ):
        self.center = center
        self.radius = radius
        self.dist = dist
        self._nbrs = neighbors
        self._state = state
        self._nodes: list[int] | None = None

    @property
    def nodes(self) -> list[int]:
        if self._nodes is None:
            self._nodes = sorted(self.dist)
        return self._nodes

    def __contains__(self, u: object) -> bool:
        return u in self.dist

    def __iter__(self) -> Iterator[int]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.dist)

    def _check(self, u: int) -> None:
        if u not in self.dist:
            raise LocalityViolation(self.center, self.radius + 1, self.radius)

    def state(self, u: int) -> StateView:
        self._check(u)
        return self._state(u)

    def memory(self, u: int) -> Mapping[str, Any]:
        return self.state(u).memory

    def output(self, u: int) -> Any:
        return self.state(u).output

    def input(self, u: int) -> Any:
        return self.state(u).input

    def neighbors(self, u: int) -> list[int]:
        self._check(u)
        d = self.dist
        return [w for w in self._nbrs(u) if w in d]

    def within(self, source: int, radius: int, allowed: Callable[[int], bool] | None = None) -> dict[int, int]:
        """Distances from ``source`` computed inside this ball, up to ``radius``.

        Exact whenever ``dist[source] + radius`` does not exceed the ball's
        own radius.
        """
        self._check(source)
        if self.dist[source] + radius > self.radius:
            raise CompilationError(
                f"ball of radius {self.radius} around {self.center} cannot serve a "
                f"radius-{radius} query at {source}"
            )
        out = {source: 0}
        frontier = [source]
        for step in range(1, radius + 1):
            nxt = []
            for y in frontier:
                for z in self.neighbors(y):
                    if z not in out and (allowed is None or allowed(z)):
                        out[z] = step
                        nxt.append(z)
            if not nxt:
                break
            frontier = nxt
        return out


class NodeContext:
    """Handle given to a node procedure while that node is processed."""

    def __init__(
        self,
        node: int,
        label: int,
        phase: int,
        seed: int,
        locality: int,
        write_radius: int,
        backend: Any,
    ):
        self.node = node
        self.label = label
        self.phase = phase
        self.seed = seed
        self.locality = locality
        self.write_radius = write_radius
        self.observed = 0
        self._backend = backend
        self._rng: random.Random | None = None
        self._zone: Any = None

    @property
    def rng(self) -> random.Random:
        if self._rng is None:
            self._rng = node_rng(self.seed, self.node, self.phase)
        return self._rng

    def random_stream(self, node: int, phase: int) -> random.Random:
        """Random stream of another node, as stored in its initial state."""
        return node_rng(self.seed, node, phase)

    def query(self, radius: int) -> BallView:
        if radius < 0:
            raise InvalidArgument("query radius must be non-negative")
        if radius > self.locality:
            raise LocalityViolation(self.node, radius, self.locality)
        self.observed = max(self.observed, radius)
        return self._backend.view(self.node, radius)

    def write(self, target: int, key: str, value: Any) -> None:
        if target != self.node:
            if self._zone is None:
                self._zone = self._backend.zone(self.node, self.write_radius) if self.write_radius > 0 else ()
            if target not in self._zone:
                raise WriteViolation(self.node, target, self.write_radius)
        self._backend.write(self, target, key, value)

    def store(self, key: str, value: Any) -> None:
        self.write(self.node, key, value)

    def set_output(self, value: Any) -> None:
        self._backend.set_output(self.node, value)

    @property
    def own(self) -> StateView:
        return self._backend.own(self.node)

    @property
    def memory(self) -> Mapping[str, Any]:
        return self.own.memory

    @property
    def input(self) -> Any:
        return self.own.input

    @property
    def output(self) -> Any:
        return self.own.output


# ---------------------------------------------------------------------------
# Orderings and algorithms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ordering:
    """Distinct integer labels; nodes are processed by ascending label."""

    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise InvalidArgument("ordering labels must be distinct")

    @classmethod
    def identity(cls, n: int) -> "Ordering":
        return cls(tuple(range(n)))

    @classmethod
    def from_sequence(cls, sequence: Sequence[int]) -> "Ordering":
        n = len(sequence)
        if sorted(sequence) != list(range(n)):
            raise InvalidArgument("sequence must be a permutation of 0..n-1")
        labels = [0] * n
        for pos, v in enumerate(sequence):
            labels[v] = pos
        return cls(tuple(labels))

    @classmethod
    def random(cls, n: int, seed: int) -> "Ordering":
        seq = list(range(n))
        random.Random(f"order:{seed}").shuffle(seq)
        return cls.from_sequence(seq)

    @classmethod
    def parse(cls, text: str, n: int) -> "Ordering":
        labels: dict[int, int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                node, label = (int(p) for p in parts)
            except ValueError:
                raise ParseError("ordering line must be 'node label'", lineno) from None
            if not 0 <= node < n:
                raise ParseError(f"node {node} out of range", lineno)
            if node in labels:
                raise ParseError(f"node {node} labelled twice", lineno)
            labels[node] = label
        if len(labels) != n:
            raise ParseError(f"ordering covers {len(labels)} of {n} nodes")
        try:
            return cls(tuple(labels[v] for v in range(n)))
        except InvalidArgument as exc:
            raise ParseError(str(exc)) from None

    def format(self) -> str:
        return "".join(f"{v} {lab}\n" for v, lab in enumerate(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def sequence(self) -> list[int]:
        return sorted(range(len(self.labels)), key=self.labels.__getitem__)


@dataclass(frozen=True)
class Phase:
    procedure: Procedure
    locality: int
    write_radius: int = 0

    def __post_init__(self) -> None:
        if self.locality < 0 or self.write_radius < 0:
            raise InvalidArgument("radii must be non-negative")


@dataclass(frozen=True)
class SlocalAlgorithm:
    name: str
    phases: tuple[Phase, ...]

    @property
    def k(self) -> int:
        return len(self.phases)

    @property
    def pure(self) -> bool:
        return all(p.write_radius == 0 for p in self.phases)

    @property
    def localities(self) -> list[int]:
        return [p.locality for p in self.phases]


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionTrace:
    states: tuple[NodeState, ...]
    locality: tuple[int, ...]
    phase_locality: tuple[int, ...]
    order: Ordering | None = None
    rounds: int = 0

    @property
    def outputs(self) -> list[Any]:
        return [s.output for s in self.states]

    @property
    def max_locality(self) -> int:
        return max(self.locality, default=0)

    def memory(self, v: int) -> dict[str, Any]:
        return self.states[v].memory

    def to_json(self) -> dict[str, Any]:
        return {
            str(v): {
                "output": _jsonable(s.output),
                "locality": self.locality[v],
                "memory_keys": sorted(s.memory),
            }
            for v, s in enumerate(self.states)
        }

    def canonical(self) -> str:
        """Outputs and memories as one canonical string, for bit-equality checks."""
        return canonical_json([[s.output, s.memory] for s in self.states])


# ---------------------------------------------------------------------------
# Direct execution
# ---------------------------------------------------------------------------


class _LiveBackend:
    def __init__(self, graph: Graph, states: list[NodeState]):
        self.graph = graph
        self.states = states

    def _state(self, u: int) -> StateView:
        return view_of(u, self.states[u])

    def own(self, u: int) -> StateView:
        return self._state(u)

    def view(self, center: int, radius: int) -> BallView:
        dist = bfs_distances(self.graph, center, radius)
        return BallView(center, radius, dist, self.graph.neighbors, self._state)

    def zone(self, a: int, radius: int) -> Any:
        return bfs_distances(self.graph, a, radius)

    def write(self, ctx: NodeContext, target: int, key: str, value: Any) -> None:
        self.states[target].memory[key] = value

    def set_output(self, node: int, value: Any) -> None:
        self.states[node].output = value


class SlocalRun:
    """Incremental sequential execution: phases can be appended one at a time.

    Algorithms whose phase count depends on the data drive this directly.
    """

    def __init__(
        self,
        graph: Graph,
        order: Ordering,
        seed: int = 0,
        inputs: Sequence[Any] | None = None,
    ):
        if len(order) != graph.n:
            raise InvalidArgument("ordering size differs from node count")
        if inputs is not None and len(inputs) != graph.n:
            raise InvalidArgument("inputs size differs from node count")
        self.graph = graph
        self.order = order
        self.seed = seed
        self.states = [NodeState(None if inputs is None else inputs[v]) for v in range(graph.n)]
        self.locality = [0] * graph.n
        self.phase_locality: list[int] = []
        self._backend = _LiveBackend(graph, self.states)
        self._sequence = order.sequence()

    def run_phase(self, phase: Phase) -> int:
        index = len(self.phase_locality)
        worst = 0
        for v in self._sequence:
            ctx = NodeContext(
                v, self.order.labels[v], index, self.seed, phase.locality, phase.write_radius, self._backend
            )
            phase.procedure(ctx)
            worst = max(worst, ctx.observed)
            self.locality[v] = max(self.locality[v], ctx.observed)
        self.phase_locality.append(worst)
        return worst

    def trace(self) -> ExecutionTrace:
        return ExecutionTrace(
            tuple(s.copy() for s in self.states),
            tuple(self.locality),
            tuple(self.phase_locality),
            self.order,
        )


def run_slocal(
    graph: Graph,
    algorithm: SlocalAlgorithm,
    order: Ordering,
    seed: int = 0,
    inputs: Sequence[Any] | None = None,
) -> ExecutionTrace:
    """Process every phase of ``algorithm`` over the nodes in label order."""
    run = SlocalRun(graph, order, seed, inputs)
    for phase in algorithm.phases:
        run.run_phase(phase)
    return run.trace()


# ---------------------------------------------------------------------------
# Simulation inside a gathered ball
# ---------------------------------------------------------------------------


class _SimBackend:
    def __init__(self, big: BallView, node: int, working: NodeState, state_of: Callable[[int], StateView]):
        self.big = big
        self.node = node
        self.working = working
        self.state_of = state_of

    def _state(self, u: int) -> StateView:
        if u == self.node:
            return view_of(u, self.working)
        return self.state_of(u)

    def own(self, u: int) -> StateView:
        return self._state(u)

    def view(self, center: int, radius: int) -> BallView:
        dist = self.big.within(center, radius)
        return BallView(center, radius, dist, self.big.neighbors, self._state)

    def zone(self, a: int, radius: int) -> Any:
        return self.big.within(a, radius)

    def write(self, ctx: NodeContext, target: int, key: str, value: Any) -> None:
        if target != self.node:
            raise WriteViolation(self.node, target, 0)
        self.working.memory[key] = value

    def set_output(self, node: int, value: Any) -> None:
        self.working.output = value


def simulate_procedure(
    procedure: Procedure,
    *,
    big: BallView,
    node: int,
    label: int,
    phase: int,
    seed: int,
    locality: int,
    start: NodeState,
    state_of: Callable[[int], StateView],
) -> tuple[NodeState, int]:
    """Run one pure node procedure against data gathered in ``big``.

    ``start`` is the node's state before the step; ``state_of`` supplies the
    states of the other nodes. Returns the node's new state and its observed
    locality.
    """
    working = start.copy()
    ctx = NodeContext(node, label, phase, seed, locality, 0, _SimBackend(big, node, working, state_of))
    procedure(ctx)
    return working, ctx.observed


# ---------------------------------------------------------------------------
# Remote-write elimination
# ---------------------------------------------------------------------------


def _apply_records(base: Mapping[str, Any], records: Iterable[tuple]) -> dict[str, Any]:
    mem = {k: v for k, v in base.items() if k != RECORDS_KEY}
    for _, key, value, _, _ in sorted(records, key=lambda r: (r[3], r[4])):
        mem[key] = value
    return mem


class _RecordBackend:
    """Emulates remote writes by storing tagged records in the writer's memory."""

    def __init__(self, real: NodeContext, w: int):
        self.real = real
        self.w = w
        self.seq = 0

    def _effective(self, big: BallView) -> Callable[[int], StateView]:
        cache: dict[str, Any] = {"seq": -1, "index": {}}

        def index() -> dict[int, list[tuple]]:
            if cache["seq"] != self.seq:
                idx: dict[int, list[tuple]] = {}
                for h in big.nodes:
                    for rec in big.memory(h).get(RECORDS_KEY, ()):
                        idx.setdefault(rec[0], []).append(rec)
                cache["index"], cache["seq"] = idx, self.seq
            return cache["index"]

        def state(u: int) -> StateView:
            raw = big.state(u)
            mem = _apply_records(raw.memory, index().get(u, ()))
            return StateView(u, raw.input, MappingProxyType(mem), raw.output)

        return state

    def view(self, center: int, radius: int) -> BallView:
        big = self.real.query(radius + self.w)
        dist = {u: d for u, d in big.dist.items() if d <= radius}
        return BallView(center, radius, dist, big.neighbors, self._effective(big))

    def own(self, u: int) -> StateView:
        big = self.real.query(self.w)
        return self._effective(big)(u)

    def zone(self, a: int, radius: int) -> Any:
        return {z for z, d in self.real.query(self.w).dist.items() if d <= radius}

    def write(self, ctx: NodeContext, target: int, key: str, value: Any) -> None:
        rec = (target, key, value, ctx.label, self.seq)
        self.seq += 1
        held = tuple(self.real.memory.get(RECORDS_KEY, ()))
        self.real.store(RECORDS_KEY, held + (rec,))

    def set_output(self, node: int, value: Any) -> None:
        self.real.set_output(value)


def eliminate_writes(algorithm: SlocalAlgorithm) -> SlocalAlgorithm:
    """Turn a single-phase algorithm with write radius ``w`` into a pure one.

    The result has locality ``R + w`` and produces the same outputs.
    """
    if algorithm.k != 1:
        raise InvalidArgument("eliminate_writes expects a single-phase algorithm")
    phase = algorithm.phases[0]
    w, r = phase.write_radius, phase.locality
    if w == 0:
        return algorithm
    if w > r:
        raise InvalidArgument(f"write radius {w} exceeds locality {r}")
    inner = phase.procedure

    def procedure(ctx: NodeContext) -> None:
        emulated = NodeContext(ctx.node, ctx.label, ctx.phase, ctx.seed, r, w, _RecordBackend(ctx, w))
        inner(emulated)

    return SlocalAlgorithm(f"{algorithm.name}+nowrite", (Phase(procedure, r + w, 0),))


def resolve_records(trace: ExecutionTrace) -> list[dict[str, Any]]:
    """Effective memories of a run of a write-eliminated algorithm."""
    by_target: dict[int, list[tuple]] = {}
    for s in trace.states:
        for rec in s.memory.get(RECORDS_KEY, ()):
            by_target.setdefault(rec[0], []).append(rec)
    return [_apply_records(s.memory, by_target.get(v, ())) for v, s in enumerate(trace.states)]


# ---------------------------------------------------------------------------
# Phase folding
# ---------------------------------------------------------------------------


def _phase_key(j: int) -> str:
    return f"phase:{j}"


def _fold(phases: Sequence[Phase]) -> Procedure:
    k = len(phases)
    radii = [p.locality for p in phases]
    total = sum(radii)
    # reach[j]: radius around u whose phase-j states u must know (j = 1..k).
    reach = {j: sum(radii[j:]) for j in range(1, k + 1)}

    def procedure(ctx: NodeContext) -> None:
        u = ctx.node
        big = ctx.query(total)
        # Everything committed so far is read once, before this node writes.
        staged: dict[tuple[int, int], NodeState] = {}
        for z in big.nodes:
            sv = big.state(z)
            staged[(z, 0)] = NodeState(sv.input)
            for j in range(1, k + 1):
                rec = sv.memory.get(_phase_key(j))
                if rec is not None:
                    staged[(z, j)] = NodeState(sv.input, dict(rec[0]), rec[1])

        def stage(z: int, j: int) -> NodeState | None:
            return staged.get((z, j))

        for j in range(1, k + 1):
            phase = phases[j - 1]

            def state_of(z: int, j: int = j) -> StateView:
                st = stage(z, j)
                if st is None:
                    st = stage(z, j - 1)
                if st is None:
                    raise CompilationError(f"phase {j - 1} state of {z} unavailable at {u}")
                return view_of(z, st)

            targets = [u] if j == k else sorted(x for x, d in big.dist.items() if d <= reach[j])
            for x in targets:
                if stage(x, j) is not None:
                    continue
                start = stage(x, j - 1)
                if start is None:
                    raise CompilationError(f"phase {j - 1} state of {x} unavailable at {u}")
                new, _ = simulate_procedure(
                    phase.procedure,
                    big=big,
                    node=x,
                    label=x,
                    phase=j - 1,
                    seed=ctx.seed,
                    locality=phase.locality,
                    start=start,
                    state_of=state_of,
                )
                staged[(x, j)] = new
                ctx.write(x, _phase_key(j), (tuple(sorted(new.memory.items())), new.output))
                if j == k:
                    ctx.set_output(new.output)

    return procedure


def reduce_phases(algorithm: SlocalAlgorithm) -> SlocalAlgorithm:
    """Fold a pure k-phase algorithm into one phase.

    The folded phase writes simulated states of earlier phases into nearby
    nodes (write radius ``sum(r_2..r_k)``); those writes are then removed by
    :func:`eliminate_writes`, giving locality ``r_1 + 2*sum(r_2..r_k)``.
    Earlier-phase work inside a gathered ball is simulated in ascending node
    id, so the result is a valid run but not necessarily the k-phase one.
    """
    if algorithm.k == 0:
        raise InvalidArgument("cannot fold an algorithm without phases")
    if not algorithm.pure:
        raise InvalidArgument("reduce_phases expects pure phases (write radius 0)")
    if algorithm.k == 1:
        return algorithm
    radii = algorithm.localities
    total = sum(radii)
    folded = SlocalAlgorithm(
        f"{algorithm.name}+folded", (Phase(_fold(algorithm.phases), total, total - radii[0]),)
    )
    out = eliminate_writes(folded)
    return SlocalAlgorithm(f"{algorithm.name}+1phase", out.phases)


def folded_output_memory(trace: ExecutionTrace, k: int) -> list[dict[str, Any]]:
    """Final-phase memories recovered from a run of a folded algorithm."""
    mems = resolve_records(trace)
    out = []
    for mem in mems:
        rec = mem.get(_phase_key(k))
        out.append(dict(rec[0]) if rec is not None else {})
    return out


# ---------------------------------------------------------------------------
# Ordering diameter
# ---------------------------------------------------------------------------


def ordering_diameter(graph: Graph, order: Ordering, chunk: int = 256) -> int:
    """Largest graph distance between two nodes joined by a label-increasing path."""
    n = graph.n
    if len(order) != n:
        raise InvalidArgument("ordering size differs from node count")
    labels = order.labels
    reach = np.zeros((n, n), dtype=bool)
    for v in sorted(range(n), key=lambda x: -labels[x]):
        row = reach[v]
        row[v] = True
        for w in graph.adj[v]:
            if labels[w] > labels[v]:
                row |= reach[w]
    if graph.m == 0:
        return 0
    rows, cols = [], []
    for u, v in graph.edges():
        rows += [u, v]
        cols += [v, u]
    csr = csr_matrix((np.ones(len(rows), dtype=np.float32), (rows, cols)), shape=(n, n))
    best = 0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        sub = reach[idx]
        if sub.sum() == len(idx):
            continue
        depth = _sweep_targets(csr, idx, sub.T, _SWEEP_LEVELS)
        if depth is None:
            dist = shortest_path(csr, method="D", unweighted=True, indices=idx)
            depth = int(dist[sub].max())
        best = max(best, depth)
    return best


_SWEEP_LEVELS = 64


def _sweep_targets(adj: csr_matrix, sources: np.ndarray, targets: np.ndarray, levels: int) -> int | None:
    """Largest BFS depth at which a source first meets one of its targets.

    ``targets`` is node-major (one column per source). Gives up and returns
    None when targets remain after ``levels`` levels.
    """
    n = adj.shape[0]
    reached = np.zeros((n, len(sources)), dtype=bool)
    reached[sources, np.arange(len(sources))] = True
    left = targets & ~reached
    frontier = reached.astype(np.float32)
    depth = 0
    deepest = 0
    while left.any():
        if depth >= levels or not frontier.any():
            return None
        step = (adj @ frontier > 0) & ~reached
        depth += 1
        if (step & left).any():
            deepest = depth
            left &= ~step
        reached |= step
        frontier = step.astype(np.float32)
    return deepest
