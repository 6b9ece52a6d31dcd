"""Bundled sequential-local algorithms and the verifiers for their problems.

Greedy MIS and greedy coloring are the workhorses for the compilers. The
two-phase algorithms exercise phase folding, and the writer algorithms
exercise remote-write elimination.
"""

from __future__ import annotations

from typing import Any, Sequence

from .engine import NodeContext, Phase, SlocalAlgorithm
from .graphs import Graph

__all__ = [
    "greedy_mis",
    "greedy_coloring",
    "distance_two_coloring",
    "degree_sum_two_phase",
    "mis_pointer_two_phase",
    "flagging_mis",
    "stamp_writer",
    "scribbler",
    "verify_mis",
    "verify_coloring",
    "verify_degree_sum",
    "verify_mis_pointers",
    "BUNDLED",
]


def _greedy_mis_step(ctx: NodeContext) -> None:
    view = ctx.query(1)
    joined = not any(view.output(w) == 1 for w in view.neighbors(ctx.node))
    ctx.set_output(1 if joined else 0)


def greedy_mis() -> SlocalAlgorithm:
    """Join iff no earlier neighbor joined."""
    return SlocalAlgorithm("greedy-mis", (Phase(_greedy_mis_step, 1),))


def _greedy_color_step(ctx: NodeContext) -> None:
    view = ctx.query(1)
    taken = {view.output(w) for w in view.neighbors(ctx.node)}
    c = 1
    while c in taken:
        c += 1
    ctx.set_output(c)


def greedy_coloring() -> SlocalAlgorithm:
    """Smallest color not used by an earlier neighbor; at most max degree + 1 colors."""
    return SlocalAlgorithm("greedy-color", (Phase(_greedy_color_step, 1),))


def _distance_two_step(ctx: NodeContext) -> None:
    view = ctx.query(2)
    taken = {view.output(w) for w in view.nodes if w != ctx.node}
    c = 1
    while c in taken:
        c += 1
    ctx.set_output(c)


def distance_two_coloring() -> SlocalAlgorithm:
    """Greedy coloring of the square graph (locality 2)."""
    return SlocalAlgorithm("greedy-color-d2", (Phase(_distance_two_step, 2),))


# ---------------------------------------------------------------------------
# Two-phase algorithms
# ---------------------------------------------------------------------------


def _record_degree(ctx: NodeContext) -> None:
    view = ctx.query(1)
    ctx.store("deg", len(view.neighbors(ctx.node)))


def _sum_degrees(ctx: NodeContext) -> None:
    view = ctx.query(1)
    ctx.set_output(sum(view.memory(w)["deg"] for w in view.neighbors(ctx.node)))


def degree_sum_two_phase() -> SlocalAlgorithm:
    """Phase 1 records the degree, phase 2 outputs the neighbors' degree sum."""
    return SlocalAlgorithm("degree-sum", (Phase(_record_degree, 1), Phase(_sum_degrees, 1)))


def _mis_phase(ctx: NodeContext) -> None:
    view = ctx.query(1)
    joined = not any(view.memory(w).get("mis") for w in view.neighbors(ctx.node))
    ctx.store("mis", joined)


def _pointer_phase(ctx: NodeContext) -> None:
    view = ctx.query(1)
    if ctx.memory["mis"]:
        ctx.set_output(ctx.node)
        return
    ctx.set_output(min(w for w in view.neighbors(ctx.node) if view.memory(w)["mis"]))


def mis_pointer_two_phase() -> SlocalAlgorithm:
    """Phase 1 greedy MIS; phase 2 points each other node at its smallest MIS neighbor.

    MIS nodes point at themselves.
    """
    return SlocalAlgorithm("mis-pointer", (Phase(_mis_phase, 1), Phase(_pointer_phase, 1)))


# ---------------------------------------------------------------------------
# Algorithms with remote writes
# ---------------------------------------------------------------------------


def _flagging_step(ctx: NodeContext) -> None:
    if ctx.memory.get("blocked"):
        ctx.set_output(0)
        return
    ctx.set_output(1)
    view = ctx.query(1)
    for w in view.neighbors(ctx.node):
        ctx.write(w, "blocked", True)


def flagging_mis() -> SlocalAlgorithm:
    """Greedy MIS where joining nodes flag their neighbors instead of being read."""
    return SlocalAlgorithm("flagging-mis", (Phase(_flagging_step, 1, 1),))


def _stamp_step(ctx: NodeContext) -> None:
    view = ctx.query(2)
    nbr_stamps = sorted(
        (w, view.memory(w).get("stamp", -1)) for w in view.neighbors(ctx.node)
    )
    ctx.set_output([ctx.memory.get("stamp", -1), nbr_stamps])
    for w in view.nodes:
        if w != ctx.node:
            ctx.write(w, "stamp", ctx.node)


def stamp_writer() -> SlocalAlgorithm:
    """Every node stamps its id on all nodes within distance 2.

    Targets are stamped by several writers, so the last writer in the
    processing order must win.
    """
    return SlocalAlgorithm("stamp-writer", (Phase(_stamp_step, 2, 2),))


def _make_scribble(radius: int, write_radius: int):
    def step(ctx: NodeContext) -> None:
        view = ctx.query(radius)
        seen = [[w, sorted(view.memory(w).items())] for w in view.nodes]
        ctx.set_output(seen)
        near = [w for w, d in view.dist.items() if d <= write_radius]
        near.sort()
        for _ in range(ctx.rng.randint(0, 3)):
            target = ctx.rng.choice(near)
            ctx.write(target, f"k{ctx.rng.randint(0, 2)}", ctx.rng.randint(0, 99))

    return step


def scribbler(radius: int = 2, write_radius: int = 1) -> SlocalAlgorithm:
    """Random writes within ``write_radius``; outputs everything it read."""
    return SlocalAlgorithm(
        f"scribbler-{radius}-{write_radius}",
        (Phase(_make_scribble(radius, write_radius), radius, write_radius),),
    )


# ---------------------------------------------------------------------------
# Verifiers
# ---------------------------------------------------------------------------


def verify_mis(graph: Graph, outputs: Sequence[Any]) -> bool:
    """Outputs 1/0 form an independent and maximal set."""
    chosen = {v for v, o in enumerate(outputs) if o == 1}
    if any(o not in (0, 1) for o in outputs):
        return False
    for u, v in graph.edges():
        if u in chosen and v in chosen:
            return False
    return all(v in chosen or any(w in chosen for w in graph.adj[v]) for v in range(graph.n))


def verify_coloring(graph: Graph, outputs: Sequence[Any], max_colors: int | None = None) -> bool:
    limit = graph.max_degree + 1 if max_colors is None else max_colors
    if any(not isinstance(c, int) or not 1 <= c <= limit for c in outputs):
        return False
    return all(outputs[u] != outputs[v] for u, v in graph.edges())


def verify_degree_sum(graph: Graph, outputs: Sequence[Any]) -> bool:
    return all(outputs[v] == sum(graph.degree(w) for w in graph.adj[v]) for v in range(graph.n))


def verify_mis_pointers(graph: Graph, outputs: Sequence[Any]) -> bool:
    mis = [1 if outputs[v] == v else 0 for v in range(graph.n)]
    if not verify_mis(graph, mis):
        return False
    for v in range(graph.n):
        if outputs[v] != v:
            cands = [w for w in graph.adj[v] if mis[w]]
            if not cands or outputs[v] != min(cands):
                return False
    return True


BUNDLED = {
    "greedy-mis": (greedy_mis, verify_mis),
    "greedy-color": (greedy_coloring, verify_coloring),
    "degree-sum": (degree_sum_two_phase, verify_degree_sum),
    "mis-pointer": (mis_pointer_two_phase, verify_mis_pointers),
}
