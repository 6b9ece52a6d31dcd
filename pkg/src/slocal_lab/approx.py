"""Ball-growing (1+eps)-approximations for maximum independent set and minimum dominating set.

Each processed node grows a ball until an exact in-ball optimum stops
growing by more than a (1+eps) factor, commits that local optimum and
deletes the ball. Exact branch-and-bound solvers serve both as the in-ball
subroutine and as small-instance oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .engine import ExecutionTrace, NodeContext, Ordering, Phase, SlocalRun
from .errors import CapacityError, InvalidArgument, InvariantError
from .graphs import Graph, bfs_distances
from .splitting import as_fraction

__all__ = [
    "ApproxParams",
    "ApproxResult",
    "exact_mis",
    "exact_mds",
    "verify_independent",
    "verify_dominating",
    "mis_radius_bound",
    "mds_radius_bound",
    "slocal_mis_approx",
    "slocal_mis_approx_run",
    "slocal_mds_approx",
    "slocal_mds_approx_run",
]

DEFAULT_CAP = 25


@dataclass(frozen=True)
class ApproxParams:
    epsilon: Fraction
    ball_node_cap: int = DEFAULT_CAP

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise InvalidArgument("epsilon must be positive")
        if self.ball_node_cap < 1:
            raise InvalidArgument("ball node cap must be at least 1")


@dataclass
class ApproxResult:
    nodes: list[int]
    trace: ExecutionTrace
    radii: dict[int, int]
    central_balls: dict[int, list[int]] = field(default_factory=dict)

    def to_json(self, exact: int | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {"nodes": self.nodes, "size": len(self.nodes), "locality": self.trace.max_locality}
        if exact is not None:
            out["ratio_vs_exact"] = str(Fraction(len(self.nodes), exact)) if exact else None
        return out


# ---------------------------------------------------------------------------
# Verifiers
# ---------------------------------------------------------------------------


def verify_independent(graph: Graph, nodes: Iterable[int]) -> bool:
    chosen = set(nodes)
    return all(not (u in chosen and v in chosen) for u, v in graph.edges())


def verify_dominating(graph: Graph, nodes: Iterable[int]) -> bool:
    chosen = set(nodes)
    return all(v in chosen or any(w in chosen for w in graph.adj[v]) for v in range(graph.n))


# ---------------------------------------------------------------------------
# Exact solvers
# ---------------------------------------------------------------------------


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _mis_masks(nbr: list[int], cand: int) -> int:
    """Maximum independent set within ``cand`` as a bitmask."""
    best = 0
    best_size = 0

    def rec(cand: int, chosen: int, size: int) -> None:
        nonlocal best, best_size
        # vertices with at most one candidate neighbor can always be taken
        changed = True
        while changed:
            changed = False
            for v in _bits(cand):
                if cand >> v & 1 and bin(nbr[v] & cand).count("1") <= 1:
                    chosen |= 1 << v
                    size += 1
                    cand &= ~(nbr[v] | 1 << v)
                    changed = True
        if not cand:
            if size > best_size:
                best, best_size = chosen, size
            return
        if size + bin(cand).count("1") <= best_size:
            return
        v = max(_bits(cand), key=lambda x: (bin(nbr[x] & cand).count("1"), -x))
        rec(cand & ~(nbr[v] | 1 << v), chosen | 1 << v, size + 1)
        rec(cand & ~(1 << v), chosen, size)

    rec(cand, 0, 0)
    return best


def exact_mis(graph: Graph, cap: int = DEFAULT_CAP) -> list[int]:
    """A maximum independent set by branch and bound."""
    if graph.n > cap:
        raise CapacityError(f"exact MIS on {graph.n} nodes exceeds cap {cap}")
    nbr = [sum(1 << w for w in graph.adj[v]) for v in range(graph.n)]
    return _bits(_mis_masks(nbr, (1 << graph.n) - 1))


def exact_mds(
    graph: Graph,
    dominators: Iterable[int] | None = None,
    targets: Iterable[int] | None = None,
    cap: int = DEFAULT_CAP,
) -> list[int]:
    """Smallest subset of ``dominators`` dominating every node of ``targets``.

    Both default to all nodes. Raises if some target cannot be dominated.
    """
    pool = sorted(set(range(graph.n) if dominators is None else dominators))
    goal = sorted(set(range(graph.n) if targets is None else targets))
    if len(pool) > cap:
        raise CapacityError(f"exact MDS over {len(pool)} candidate nodes exceeds cap {cap}")
    tindex = {t: i for i, t in enumerate(goal)}
    cover = []
    for d in pool:
        m = 0
        for x in (d, *graph.adj[d]):
            if x in tindex:
                m |= 1 << tindex[x]
        cover.append(m)
    full = (1 << len(goal)) - 1
    reach = 0
    for m in cover:
        reach |= m
    if reach != full:
        raise InvalidArgument("some target has no dominator in the pool")
    options = [[j for j in range(len(pool)) if cover[j] >> t & 1] for t in range(len(goal))]
    best: list[int] = list(range(len(pool)))

    def rec(uncovered: int, chosen: list[int]) -> None:
        nonlocal best
        if not uncovered:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        widest = max(bin(cover[j] & uncovered).count("1") for j in range(len(pool)))
        if len(chosen) + -(-bin(uncovered).count("1") // widest) >= len(best):
            return
        t = min(_bits(uncovered), key=lambda x: (len(options[x]), x))
        for j in sorted(options[t], key=lambda j: (-bin(cover[j] & uncovered).count("1"), j)):
            chosen.append(j)
            rec(uncovered & ~cover[j], chosen)
            chosen.pop()

    rec(full, [])
    return sorted(pool[j] for j in best)


def _induced_mis_size(graph: Any, nodes: Sequence[int], cap: int, radius: int) -> int:
    if len(nodes) > cap:
        raise CapacityError(f"ball of {len(nodes)} nodes exceeds cap {cap}", radius)
    sub, _ = graph.induced(nodes)
    return len(exact_mis(sub, cap))


# ---------------------------------------------------------------------------
# Sequential-local approximation schemes
# ---------------------------------------------------------------------------


def _log_ceil(n: int, eps: Fraction) -> int:
    """ceil(log_{1+eps} n) computed exactly."""
    base, k, power = 1 + eps, 0, Fraction(1)
    while power < n:
        power *= base
        k += 1
    return k


def mis_radius_bound(n: int, eps: Fraction) -> int:
    return _log_ceil(max(n, 1), eps)


def mds_radius_bound(n: int, eps: Fraction) -> int:
    return 2 * _log_ceil(max(n, 1), eps) + 1


def _mis_phase(eps: Fraction, cap: int, bound: int, radii: dict[int, int]) -> Phase:
    def procedure(ctx: NodeContext) -> None:
        if ctx.memory.get("removed"):
            return
        sizes: dict[int, int] = {}

        def ball(view: Any, r: int) -> list[int]:
            return sorted(z for z, d in view.dist.items() if d <= r and not view.memory(z).get("removed"))

        def alpha(view: Any, r: int) -> int:
            if r not in sizes:
                sizes[r] = _induced_mis_size(_BallGraph.of(view), ball(view, r), cap, r)
            return sizes[r]

        r = 0
        view = ctx.query(1)
        while alpha(view, r + 1) > (1 + eps) * alpha(view, r):
            r += 1
            if r > bound:
                raise InvariantError(f"MIS ball radius at node {ctx.node} passed bound {bound}")
            view = ctx.query(r + 1)
        radii[ctx.node] = r
        sub, ids = _BallGraph.of(view).induced(ball(view, r))
        for j in exact_mis(sub, cap):
            ctx.write(ids[j], "selected", True)
        for z in ball(view, r + 1):
            ctx.write(z, "removed", True)

    return Phase(procedure, bound + 1, bound + 1)


class _BallGraph:
    """Adjacency restricted to a ball view, exposing ``induced`` like :class:`Graph`."""

    def __init__(self, view: Any):
        self.view = view

    @classmethod
    def of(cls, view: Any) -> "_BallGraph":
        return cls(view)

    def induced(self, nodes: Sequence[int]) -> tuple[Graph, list[int]]:
        ids = sorted(nodes)
        index = {v: i for i, v in enumerate(ids)}
        edges = [(index[v], index[w]) for v in ids for w in self.view.neighbors(v) if w in index and v < w]
        return Graph.from_edges(len(ids), edges), ids


def _params(eps: Fraction | float | str, cap: int) -> ApproxParams:
    return ApproxParams(as_fraction(eps), cap)


def slocal_mis_approx_run(
    graph: Graph, eps: Fraction | float | str, order: Ordering | None = None, cap: int = DEFAULT_CAP
) -> ApproxResult:
    params = _params(eps, cap)
    order = Ordering.identity(graph.n) if order is None else order
    bound = mis_radius_bound(graph.n, params.epsilon)
    radii: dict[int, int] = {}
    run = SlocalRun(graph, order)
    run.run_phase(_mis_phase(params.epsilon, params.ball_node_cap, bound, radii))
    nodes = sorted(v for v, s in enumerate(run.states) if s.memory.get("selected"))
    if not verify_independent(graph, nodes):
        raise InvariantError("approximate MIS is not independent")
    return ApproxResult(nodes, run.trace(), radii)


def slocal_mis_approx(
    graph: Graph, eps: Fraction | float | str, order: Ordering | None = None, cap: int = DEFAULT_CAP
) -> tuple[list[int], ExecutionTrace]:
    """Independent set of size at least alpha(G)/(1+eps)."""
    res = slocal_mis_approx_run(graph, eps, order, cap)
    return res.nodes, res.trace


def _mds_phase(eps: Fraction, cap: int, bound: int, radii: dict[int, int], central: dict[int, list[int]]) -> Phase:
    def procedure(ctx: NodeContext) -> None:
        if ctx.memory.get("removed"):
            return
        sizes: dict[int, int] = {}

        def targets(view: Any, r: int) -> list[int]:
            return sorted(z for z, d in view.dist.items() if d <= r and not view.memory(z).get("removed"))

        def solve(view: Any, r: int) -> list[int]:
            dom = sorted(z for z, d in view.dist.items() if d <= r + 1)
            if len(dom) > cap:
                raise CapacityError(f"dominator pool of {len(dom)} nodes exceeds cap {cap}", r)
            sub, ids = _BallGraph.of(view).induced(dom)
            index = {v: i for i, v in enumerate(ids)}
            picked = [ids[j] for j in exact_mds(sub, None, [index[t] for t in targets(view, r)], cap)]
            sizes[r] = len(picked)
            return picked

        def g(view: Any, r: int) -> int:
            return sizes[r] if r in sizes else len(solve(view, r))

        r = 0
        view = ctx.query(3)
        while g(view, r + 2) > (1 + eps) * g(view, r):
            r += 1
            if r > bound:
                raise InvariantError(f"MDS ball radius at node {ctx.node} passed bound {bound}")
            view = ctx.query(r + 3)
        radii[ctx.node] = r
        central[ctx.node] = targets(view, r)
        for z in solve(view, r + 2):
            ctx.write(z, "selected", True)
        for z in targets(view, r + 2):
            ctx.write(z, "removed", True)

    return Phase(procedure, bound + 3, bound + 3)


def _check_separation(graph: Graph, central: dict[int, list[int]]) -> None:
    owner = {z: v for v, ball in central.items() for z in ball}
    for v, ball in central.items():
        for z in ball:
            for w, d in bfs_distances(graph, z, 2).items():
                if owner.get(w, v) != v:
                    raise InvariantError(f"central balls of {v} and {owner[w]} are closer than 3")


def slocal_mds_approx_run(
    graph: Graph, eps: Fraction | float | str, order: Ordering | None = None, cap: int = DEFAULT_CAP
) -> ApproxResult:
    params = _params(eps, cap)
    order = Ordering.identity(graph.n) if order is None else order
    bound = mds_radius_bound(graph.n, params.epsilon)
    radii: dict[int, int] = {}
    central: dict[int, list[int]] = {}
    run = SlocalRun(graph, order)
    run.run_phase(_mds_phase(params.epsilon, params.ball_node_cap, bound, radii, central))
    nodes = sorted(v for v, s in enumerate(run.states) if s.memory.get("selected"))
    if not verify_dominating(graph, nodes):
        raise InvariantError("approximate MDS is not dominating")
    _check_separation(graph, central)
    return ApproxResult(nodes, run.trace(), radii, central)


def slocal_mds_approx(
    graph: Graph, eps: Fraction | float | str, order: Ordering | None = None, cap: int = DEFAULT_CAP
) -> tuple[list[int], ExecutionTrace]:
    """Dominating set of size at most (1+eps) * gamma(G)."""
    res = slocal_mds_approx_run(graph, eps, order, cap)
    return res.nodes, res.trace
