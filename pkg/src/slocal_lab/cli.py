"""Command-line front end: generate instances, run solvers and pipelines, verify outputs.

Every command prints (or writes with ``--json``) one JSON report with sorted
keys and no timings, so identical invocations give byte-identical output.
Exit codes: 0 valid, 1 verifier or invariant failure, 2 usage error,
3 capacity or infeasibility, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .algorithms import BUNDLED, verify_coloring, verify_mis
from .approx import (
    DEFAULT_CAP,
    exact_mds,
    exact_mis,
    slocal_mds_approx_run,
    slocal_mis_approx_run,
    verify_dominating,
    verify_independent,
)
from .cfcoloring import MultiColoring, lowrank_cf_run, random_cf, slocal_cf_run, verify_cf
from .compiler import compile_via_decomposition, compile_via_ordering
from .decomposition import (
    NetworkDecomposition,
    ball_growing_decomposition,
    decomposition_to_ordering,
    floor_log2,
    slocal_ball_growing,
    verify_decomposition,
)
from .engine import Ordering, SlocalRun, canonical_json, reduce_phases, run_slocal
from .errors import InvalidArgument, LabError, OracleFailure
from .graphs import (
    BipartiteGraph,
    Graph,
    Hypergraph,
    format_bipartite,
    format_graph,
    format_hypergraph,
    generate,
    power_graph,
    random_bipartite,
    random_hypergraph,
    read_bipartite,
    read_graph,
    read_hypergraph,
    regularize,
)
from .reductions import ball_hypergraphs, cf_from_split_run, decomposition_from_cf, lambda_split_oracle
from .splitting import (
    SplitColoring,
    as_fraction,
    random_split,
    reduce_lambda_to_weak,
    slocal_lambda_split_run,
    slocal_weak_split,
    verify_lambda_split,
    verify_weak_split,
)

__all__ = ["main", "build_parser", "CATALOG", "SCHEMA"]

SCHEMA = 1
THREADS_ENV = "SLOCAL_LAB_THREADS"
GRAPH_KINDS = ("path", "cycle", "grid", "complete", "gnp", "random-gnp", "random-regular")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 as well; keep the message on stderr
        self.print_usage(sys.stderr)
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _ordering(args: argparse.Namespace, n: int, seed: int) -> Ordering:
    spec = args.order or "id"
    if spec == "id":
        return Ordering.identity(n)
    if spec == "random":
        return Ordering.random(n, seed)
    if spec.startswith("file:"):
        return Ordering.parse(Path(spec[5:]).read_text(), n)
    raise InvalidArgument(f"unknown ordering {spec!r}; use id, random or file:PATH")


def _fraction(value: str | None, name: str, default: Fraction | None = None) -> Fraction:
    if value is None:
        if default is None:
            raise InvalidArgument(f"--{name} is required")
        return default
    try:
        return as_fraction(value)
    except (ValueError, ZeroDivisionError):
        raise InvalidArgument(f"--{name} must be a number or a fraction like 1/2") from None


def _report(args: argparse.Namespace, algorithm: str, valid: bool, solution: Any, metrics: dict[str, Any],
            assertions: dict[str, bool] | None = None, params: dict[str, Any] | None = None) -> dict[str, Any]:
    assertions = assertions or {}
    return {
        "schema": SCHEMA,
        "command": args.command,
        "algorithm": algorithm,
        "params": params or {},
        "order": args.order or "id",
        "valid": bool(valid and all(assertions.values())),
        "assertions": assertions,
        "solution": solution,
        "metrics": metrics,
    }


def _need_paths(paths: Sequence[str], count: int, usage: str) -> list[str]:
    if len(paths) != count:
        raise InvalidArgument(f"usage: {usage}")
    return list(paths)


# ---------------------------------------------------------------------------
# Graph solvers
# ---------------------------------------------------------------------------


def _decomp_bounds(n: int) -> tuple[int, int]:
    log_n = floor_log2(n)
    return 2 * log_n, log_n + 1


def _run_ball_decomp(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run ball-decomp GRAPH")
    graph = read_graph(path)
    decomp = ball_growing_decomposition(graph)
    d, c = _decomp_bounds(graph.n)
    check = verify_decomposition(graph, decomp, d, c)
    metrics = {"colors": decomp.num_colors, "clusters": decomp.num_clusters,
               "max_weak_diameter": decomp.max_weak_diameter, **check.to_json()}
    return _report(args, "ball-decomp", check.valid, decomp.to_json(), metrics)


def _run_slocal_decomp(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run slocal-decomp GRAPH")
    graph = read_graph(path)
    run = SlocalRun(graph, _ordering(args, graph.n, seed), seed)
    decomp = slocal_ball_growing(run)
    d, c = _decomp_bounds(graph.n)
    check = verify_decomposition(graph, decomp, d, c)
    trace = run.trace()
    metrics = {"colors": decomp.num_colors, "clusters": decomp.num_clusters, "phases": len(trace.phase_locality),
               "locality": trace.max_locality, **check.to_json()}
    return _report(args, "slocal-decomp", check.valid, decomp.to_json(), metrics)


def _bundled(name: str):
    if name not in BUNDLED:
        raise InvalidArgument(f"unknown bundled algorithm {name!r}; choose from {sorted(BUNDLED)}")
    return BUNDLED[name]


def _run_bundled(name: str):
    def handler(args, paths, seed):
        (path,) = _need_paths(paths, 1, f"run {name} GRAPH")
        graph = read_graph(path)
        make, verify = _bundled(name)
        algorithm = make()
        trace = run_slocal(graph, algorithm, _ordering(args, graph.n, seed), seed)
        valid = verify(graph, trace.outputs)
        bound = sum(algorithm.localities)
        metrics = {"locality": trace.max_locality, "phases": algorithm.k, "phase_locality": list(trace.phase_locality)}
        assertions = {"locality_within_declared": trace.max_locality <= bound}
        return _report(args, name, valid, {"outputs": trace.outputs}, metrics, assertions)

    return handler


def _run_fold(args, paths, seed):
    alg_name, path = _need_paths(paths, 2, "run fold-phases ALGORITHM GRAPH")
    graph = read_graph(path)
    make, verify = _bundled(alg_name)
    algorithm = make()
    folded = reduce_phases(algorithm)
    trace = run_slocal(graph, folded, _ordering(args, graph.n, seed), seed)
    radii = algorithm.localities
    bound = radii[0] + 2 * sum(radii[1:])
    metrics = {"locality": trace.max_locality, "locality_bound": bound, "original_phases": algorithm.k}
    assertions = {"locality_within_bound": trace.max_locality <= bound, "single_phase": folded.k == 1}
    return _report(args, "fold-phases", verify(graph, trace.outputs), {"outputs": trace.outputs}, metrics,
                   assertions, {"inner": alg_name})


def _run_regularize(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run regularize GRAPH --d D")
    graph = read_graph(path)
    if args.d is None:
        raise InvalidArgument("--d is required")
    big, mapping = regularize(graph, args.d)
    regular = all(big.degree(v) == args.d for v in range(big.n))
    induced, _ = big.induced(range(graph.n))
    same = sorted(induced.edges()) == sorted(graph.edges())
    solution = {"graph": format_graph(big), "original_nodes": graph.n}
    return _report(args, "regularize", regular and same, solution, {"n": big.n, "m": big.m},
                   {"regular": regular, "embedding_induced": same}, {"d": args.d})


def _approx_runner(kind: str):
    def handler(args, paths, seed):
        (path,) = _need_paths(paths, 1, f"run slocal-{kind} GRAPH --epsilon EPS")
        graph = read_graph(path)
        eps = _fraction(args.epsilon, "epsilon")
        cap = args.cap or DEFAULT_CAP
        order = _ordering(args, graph.n, seed)
        runner = slocal_mis_approx_run if kind == "mis" else slocal_mds_approx_run
        res = runner(graph, eps, order, cap)
        exact = None
        assertions: dict[str, bool] = {}
        if graph.n <= 24:
            exact = len(exact_mis(graph, cap=24) if kind == "mis" else exact_mds(graph, cap=24))
            size = len(res.nodes)
            if kind == "mis":
                assertions["ratio_within_bound"] = size * (1 + eps) >= exact
            else:
                assertions["ratio_within_bound"] = size <= (1 + eps) * exact
        valid = verify_independent(graph, res.nodes) if kind == "mis" else verify_dominating(graph, res.nodes)
        solution = res.to_json(exact)
        metrics = {"locality": res.trace.max_locality, "max_radius": max(res.radii.values(), default=0)}
        if exact is not None:
            metrics["exact"] = exact
        return _report(args, f"slocal-{kind}", valid, solution, metrics, assertions, {"epsilon": str(eps), "cap": cap})

    return handler


def _exact_runner(kind: str):
    def handler(args, paths, seed):
        (path,) = _need_paths(paths, 1, f"run exact-{kind} GRAPH")
        graph = read_graph(path)
        cap = args.cap or DEFAULT_CAP
        nodes = exact_mis(graph, cap) if kind == "mis" else exact_mds(graph, cap=cap)
        valid = verify_independent(graph, nodes) if kind == "mis" else verify_dominating(graph, nodes)
        return _report(args, f"exact-{kind}", valid, {"nodes": nodes, "size": len(nodes)}, {}, None, {"cap": cap})

    return handler


# ---------------------------------------------------------------------------
# Hypergraph solvers
# ---------------------------------------------------------------------------


def _cf_report(args, name, h: Hypergraph, coloring: MultiColoring, metrics, assertions=None, params=None):
    check = verify_cf(h, coloring)
    metrics = {"q": coloring.q, "violations": check.violations, **metrics}
    return _report(args, name, check.valid, coloring.to_json(), metrics, assertions, params)


def _run_random_cf(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run random-cf HYPERGRAPH")
    h = read_hypergraph(path)
    q = args.q if args.q is not None else math.ceil(8 * math.log(max(h.n + h.m, 2)))
    coloring = random_cf(h, q, seed, args.k)
    return _cf_report(args, "random-cf", h, coloring, {}, None, {"q": q, "k": args.k})


def _run_slocal_cf(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run slocal-cf HYPERGRAPH")
    h = read_hypergraph(path)
    theta = args.theta if args.theta is not None else 1 / 20
    res = slocal_cf_run(h, _ordering(args, h.n, seed), theta=theta, seed=seed, k=args.k)
    metrics = {"phases": len(res.unresolved) - 1, "unresolved": res.unresolved, "locality": res.trace.max_locality,
               "radius_bound": res.radius_bound, "max_radius": res.max_radius}
    assertions = {"radius_within_bound": res.max_radius <= res.radius_bound}
    return _cf_report(args, "slocal-cf", h, res.coloring, metrics, assertions, {"theta": theta, "k": args.k})


def _run_lowrank_cf(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run lowrank-cf HYPERGRAPH")
    h = read_hypergraph(path)
    res = lowrank_cf_run(h)
    default = res.colors_used + 1
    coloring = MultiColoring.from_sets([s or [default] for s in res.sets], default)
    halving = all(2 * b <= a for a, b in zip(res.deltas, res.deltas[1:]))
    metrics = {"phases": res.phases, "deltas": res.deltas, "palette_per_phase": res.palette_per_phase}
    return _cf_report(args, "lowrank-cf", h, coloring, metrics, {"degree_halves": halving})


# ---------------------------------------------------------------------------
# Bipartite solvers
# ---------------------------------------------------------------------------


def _split_lambda_default(b: BipartiteGraph) -> Fraction:
    delta = b.min_left_degree
    if delta == 0:
        return Fraction(0)
    lam = 0.5 - math.sqrt(math.log(b.node_count) / delta)
    return max(Fraction(0), as_fraction(lam))


def _run_random_split(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run random-split BIPARTITE")
    b = read_bipartite(path)
    lam = _fraction(args.lam, "lambda", _split_lambda_default(b))
    coloring = random_split(b, seed)
    check = verify_lambda_split(b, coloring, lam)
    return _report(args, "random-split", check.valid, coloring.to_json(), {"violators": check.violators},
                   None, {"lambda": str(lam)})


def _run_slocal_split(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run slocal-split BIPARTITE")
    b = read_bipartite(path)
    alpha = args.alpha if args.alpha is not None else 4.0
    res = slocal_lambda_split_run(b, _ordering(args, b.right, seed), alpha=alpha, seed=seed)
    achieved = as_fraction(res.achieved_lambda) if res.achieved_lambda is not None else Fraction(0)
    lam = _fraction(args.lam, "lambda", max(Fraction(0), achieved))
    check = verify_lambda_split(b, res.coloring, lam)
    metrics = {"discrepancy": res.discrepancy, "clusters_touched": res.clusters_touched,
               "achieved_lambda": res.achieved_lambda, "locality": res.trace.max_locality,
               "violators": check.violators}
    return _report(args, "slocal-split", check.valid, res.coloring.to_json(), metrics, None,
                   {"alpha": alpha, "lambda": str(lam)})


def _run_reduce_to_weak(args, paths, seed):
    (path,) = _need_paths(paths, 1, "run reduce-to-weak BIPARTITE --delta D")
    b = read_bipartite(path)
    if args.delta is None:
        raise InvalidArgument("--delta is required")
    alpha = args.alpha if args.alpha is not None else 4.0
    coloring = reduce_lambda_to_weak(b, args.delta, lambda d: slocal_weak_split(d, seed=seed, alpha=alpha))
    check = verify_lambda_split(b, coloring, Fraction(1, args.delta))
    return _report(args, "reduce-to-weak", check.valid, coloring.to_json(), {"violators": check.violators}, None,
                   {"delta": args.delta, "alpha": alpha})


# ---------------------------------------------------------------------------
# Compilers
# ---------------------------------------------------------------------------


def _compile(mode: str):
    def handler(args, paths, seed):
        alg_name, path = _need_paths(paths, 2, f"compile {mode} ALGORITHM GRAPH")
        graph = read_graph(path)
        make, verify = _bundled(alg_name)
        algorithm = make()
        if algorithm.k != 1:
            raise InvalidArgument("compilers take single-phase algorithms; fold multi-phase ones first")
        beta = args.beta if args.beta is not None else 1.0
        if mode == "decomp":
            _, report = compile_via_decomposition(graph, algorithm, seed, beta=beta)
        else:
            if args.order is None:
                r = algorithm.phases[0].locality
                order = decomposition_to_ordering(ball_growing_decomposition(power_graph(graph, r)))
            else:
                order = _ordering(args, graph.n, seed)
            _, report = compile_via_ordering(graph, algorithm, order, seed)
        outputs = report.trace.outputs
        assertions = {"equality": report.equality, "rounds_within_bound": report.rounds_measured <= report.round_bound}
        return _report(args, f"compile-{mode}", verify(graph, outputs), {"outputs": outputs}, report.to_json(),
                       assertions, {"inner": alg_name, "beta": beta})

    return handler


CATALOG: dict[str, Callable[[argparse.Namespace, list[str], int], dict[str, Any]]] = {
    "ball-decomp": _run_ball_decomp,
    "slocal-decomp": _run_slocal_decomp,
    "greedy-mis": _run_bundled("greedy-mis"),
    "greedy-color": _run_bundled("greedy-color"),
    "degree-sum": _run_bundled("degree-sum"),
    "mis-pointer": _run_bundled("mis-pointer"),
    "fold-phases": _run_fold,
    "regularize": _run_regularize,
    "slocal-mis": _approx_runner("mis"),
    "slocal-mds": _approx_runner("mds"),
    "exact-mis": _exact_runner("mis"),
    "exact-mds": _exact_runner("mds"),
    "random-cf": _run_random_cf,
    "slocal-cf": _run_slocal_cf,
    "lowrank-cf": _run_lowrank_cf,
    "random-split": _run_random_split,
    "slocal-split": _run_slocal_split,
    "reduce-to-weak": _run_reduce_to_weak,
    "compile-decomp": _compile("decomp"),
    "compile-order": _compile("order"),
}


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------


class _Replay:
    """Oracle answers read back in call order from a recorded JSON list."""

    def __init__(self, path: str):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise OracleFailure(f"replay file unreadable: {exc}") from None
        if not isinstance(data, dict) or not isinstance(data.get("answers"), list):
            raise OracleFailure("replay file lacks an 'answers' list")
        self.answers = data["answers"]
        self.used = 0

    def next(self) -> Any:
        if self.used >= len(self.answers):
            raise OracleFailure("replay file ran out of answers")
        self.used += 1
        return self.answers[self.used - 1]


def _cf_oracle(spec: str, args, seed: int, q: int, log: list):
    if spec.startswith("replay:"):
        replay = _Replay(spec[7:])

        def oracle(h: Hypergraph) -> MultiColoring:
            try:
                return MultiColoring.from_json(replay.next(), h.n)
            except (KeyError, TypeError, ValueError) as exc:
                raise OracleFailure(f"replayed coloring is malformed: {exc}") from None

        return oracle
    if spec == "slocal-cf":
        theta = args.theta if args.theta is not None else 1 / 20
        solve = lambda h: slocal_cf_run(h, theta=theta, seed=seed).coloring  # noqa: E731
    elif spec == "random-cf":
        solve = lambda h: random_cf(h, q, seed, args.k)  # noqa: E731
    elif spec == "lowrank-cf":
        def solve(h):
            res = lowrank_cf_run(h)
            default = res.colors_used + 1
            return MultiColoring.from_sets([s or [default] for s in res.sets], default)
    else:
        raise InvalidArgument(f"unknown coloring oracle {spec!r}")

    def recorded(h: Hypergraph) -> MultiColoring:
        out = solve(h)
        log.append(out.to_json())
        return out

    return recorded


def _split_oracle(spec: str, args, seed: int, delta: int, log: list):
    if spec.startswith("replay:"):
        replay = _Replay(spec[7:])

        def oracle(b: BipartiteGraph) -> SplitColoring:
            try:
                return SplitColoring.from_json(replay.next(), b.right)
            except (KeyError, TypeError, ValueError) as exc:
                raise OracleFailure(f"replayed split is malformed: {exc}") from None

        return oracle
    alpha = args.alpha if args.alpha is not None else 4.0
    if spec == "slocal-split":
        solve = lambda_split_oracle(delta, alpha=alpha, seed=seed)
    elif spec == "random-split":
        solve = lambda b: random_split(b, seed)  # noqa: E731
    else:
        raise InvalidArgument(f"unknown split oracle {spec!r}")

    def recorded(b: BipartiteGraph) -> SplitColoring:
        out = solve(b)
        log.append(out.to_json())
        return out

    return recorded


def _write_record(args, log: list) -> None:
    if args.record:
        Path(args.record).write_text(json.dumps({"answers": log}, sort_keys=True) + "\n")


def _pipeline_decomp_from_cf(args, paths, seed):
    (path,) = _need_paths(paths, 1, "pipeline decomp-from-cf GRAPH --oracle SPEC")
    graph = read_graph(path)
    eps = _fraction(args.epsilon, "epsilon", Fraction(1, 2))
    q = args.q if args.q is not None else 6
    log: list = []
    assignment, decomp = decomposition_from_cf(graph, eps, q, _cf_oracle(args.oracle, args, seed, q, log))
    _write_record(args, log)
    d_bound = 2 * max((r + q for r in assignment.radius_of), default=0)
    c_bound = q * len(set(ball_hypergraphs(graph, eps, q)[2]))
    check = verify_decomposition(graph, decomp, d_bound, c_bound)
    metrics = {"colors": decomp.num_colors, "clusters": decomp.num_clusters,
               "max_weak_diameter": decomp.max_weak_diameter, "oracle_calls": len(log), **check.to_json()}
    solution = {"assignment": assignment.to_json(), "decomposition": decomp.to_json()}
    return _report(args, "decomp-from-cf", check.valid, solution, metrics, None,
                   {"epsilon": str(eps), "q": q, "oracle": args.oracle})


def _pipeline_cf_from_split(args, paths, seed):
    (path,) = _need_paths(paths, 1, "pipeline cf-from-split HYPERGRAPH --oracle SPEC --delta D")
    h = read_hypergraph(path)
    if args.delta is None:
        lam = _fraction(args.lam, "delta")
        if lam.numerator != 1:
            raise InvalidArgument("--lambda must be 1/delta")
        delta = lam.denominator
    else:
        delta = args.delta
    log: list = []
    res = cf_from_split_run(h, delta, _split_oracle(args.oracle, args, seed, delta, log))
    _write_record(args, log)
    check = verify_cf(h, res.coloring)
    shrink = all(2 * delta * b <= (2 * delta - 1) * a for a, b in zip(res.ranks, res.ranks[1:]))
    metrics = {"ranks": res.ranks, "phases": res.phases, "colors_per_phase": res.colors_per_phase,
               "q": res.coloring.q, "violations": check.violations}
    return _report(args, "cf-from-split", check.valid, res.coloring.to_json(), metrics,
                   {"rank_shrinks": shrink}, {"delta": delta, "oracle": args.oracle})


PIPELINES = {"decomp-from-cf": _pipeline_decomp_from_cf, "cf-from-split": _pipeline_cf_from_split}


# ---------------------------------------------------------------------------
# Verification of stored solutions
# ---------------------------------------------------------------------------


def _load_solution(path: str) -> Any:
    try:
        data = json.loads(Path(path).read_text())
    except ValueError as exc:
        raise InvalidArgument(f"solution file is not JSON: {exc}") from None
    if isinstance(data, dict) and "schema" in data and "solution" in data:
        return data["solution"]
    return data


def _verify(args, paths, seed):
    instance, sol_path = _need_paths(paths, 2, "verify KIND INSTANCE SOLUTION")
    kind = args.kind
    sol = _load_solution(sol_path)
    metrics: dict[str, Any] = {}
    try:
        if kind in ("mis", "coloring"):
            graph = read_graph(instance)
            outputs = sol["outputs"]
            valid = verify_mis(graph, outputs) if kind == "mis" else verify_coloring(graph, outputs, args.q)
        elif kind in ("independent", "dominating"):
            graph = read_graph(instance)
            nodes = sol["nodes"]
            valid = verify_independent(graph, nodes) if kind == "independent" else verify_dominating(graph, nodes)
        elif kind == "decomposition":
            graph = read_graph(instance)
            decomp = NetworkDecomposition.from_json(graph, sol.get("decomposition", sol))
            d, c = _decomp_bounds(graph.n)
            d = args.d_bound if args.d_bound is not None else d
            c = args.c_bound if args.c_bound is not None else c
            check = verify_decomposition(graph, decomp, d, c)
            valid, metrics = check.valid, check.to_json()
        elif kind == "cf":
            h = read_hypergraph(instance)
            check = verify_cf(h, MultiColoring.from_json(sol, h.n))
            valid, metrics = check.valid, check.to_json()
        elif kind in ("split", "weak-split"):
            b = read_bipartite(instance)
            coloring = SplitColoring.from_json(sol, b.right)
            if kind == "split":
                check = verify_lambda_split(b, coloring, _fraction(args.lam, "lambda"))
            else:
                check = verify_weak_split(b, coloring)
            valid, metrics = check.valid, check.to_json()
        else:
            raise InvalidArgument(f"unknown verification kind {kind!r}")
    except (KeyError, TypeError, AttributeError) as exc:
        raise InvalidArgument(f"solution does not match kind {kind!r}: {exc}") from None
    return _report(args, f"verify-{kind}", valid, None, metrics)


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------


def _gen(args: argparse.Namespace) -> str:
    kind = args.kind
    if kind == "hypergraph":
        if None in (args.n, args.m, args.k):
            raise InvalidArgument("hypergraph needs --n, --m and --k")
        return format_hypergraph(random_hypergraph(args.n, args.m, args.k, args.seed, args.k_max))
    if kind == "bipartite":
        if None in (args.left, args.right, args.d_min):
            raise InvalidArgument("bipartite needs --left, --right and --d-min")
        return format_bipartite(random_bipartite(args.left, args.right, args.d_min, args.d_max, args.seed))
    params = {key: getattr(args, key) for key in ("n", "p", "rows", "cols", "d") if getattr(args, key) is not None}
    return format_graph(generate(kind, args.seed, **params))


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    p.add_argument("--order", default=None, help="processing order: id, random or file:PATH")
    p.add_argument("--epsilon", default=None, help="approximation / growth parameter, e.g. 1/2")
    p.add_argument("--lambda", dest="lam", default=None, help="splitting fraction, e.g. 1/8")
    p.add_argument("--q", type=int, default=None, help="palette size")
    p.add_argument("--k", type=int, default=None, help="minimum hyperedge size used by the coloring solvers")
    p.add_argument("--theta", type=float, default=None, help="fraction of edges a ball must resolve")
    p.add_argument("--alpha", type=float, default=None, help="discrepancy constant for splitting (default 4)")
    p.add_argument("--delta", type=int, default=None, help="splitting degree parameter")
    p.add_argument("--beta", type=float, default=None, help="round charge constant for decompositions")
    p.add_argument("--d", type=int, default=None, help="target degree for regularize")
    p.add_argument("--cap", type=int, default=None, help="node cap for exact subproblems")
    p.add_argument("--json", dest="json_out", default=None, help="write the report here instead of stdout")
    p.add_argument("--repeat", type=int, default=1, help="independent runs with seeds seed..seed+k-1")
    p.add_argument("--parallel", action="store_true", help=f"fan repeated runs out to processes (cap: ${THREADS_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slocal-lab", description="Sequential-local algorithms laboratory.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate an instance file")
    gen.add_argument("kind", choices=GRAPH_KINDS + ("hypergraph", "bipartite"))
    for flag in ("--n", "--rows", "--cols", "--d", "--m", "--k", "--k-max", "--left", "--right", "--d-min", "--d-max"):
        gen.add_argument(flag, type=int, default=None)
    gen.add_argument("--p", type=float, default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=None, help="output file (stdout if omitted)")

    run = sub.add_parser("run", help="run a solver and its verifier")
    run.add_argument("algorithm", choices=sorted(CATALOG))
    run.add_argument("paths", nargs="+", help="instance file (preceded by the inner algorithm for compile/fold)")
    _common(run)

    comp = sub.add_parser("compile", help="compile a bundled algorithm and compare with the direct run")
    comp.add_argument("mode", choices=("decomp", "order"))
    comp.add_argument("paths", nargs=2, metavar="ALGORITHM_OR_GRAPH")
    _common(comp)

    pipe = sub.add_parser("pipeline", help="run a reduction end to end with an oracle")
    pipe.add_argument("reduction", choices=sorted(PIPELINES))
    pipe.add_argument("paths", nargs=1, metavar="INSTANCE")
    pipe.add_argument("--oracle", required=True, help="solver name or replay:PATH")
    pipe.add_argument("--record", default=None, help="save oracle answers for later replay")
    _common(pipe)

    ver = sub.add_parser("verify", help="check a stored solution")
    ver.add_argument("kind", choices=("mis", "coloring", "independent", "dominating", "decomposition", "cf",
                                      "split", "weak-split"))
    ver.add_argument("paths", nargs=2, metavar="FILE")
    ver.add_argument("--d-bound", type=int, default=None)
    ver.add_argument("--c-bound", type=int, default=None)
    _common(ver)
    return parser


def _handler(args: argparse.Namespace):
    if args.command == "run":
        return CATALOG[args.algorithm]
    if args.command == "compile":
        return CATALOG[f"compile-{args.mode}"]
    if args.command == "pipeline":
        return PIPELINES[args.reduction]
    return _verify


def _error_report(args: argparse.Namespace, exc: LabError, seed: int) -> dict[str, Any]:
    return {
        "schema": SCHEMA,
        "command": args.command,
        "seed": seed,
        "valid": False,
        "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code},
    }


def _one(args: argparse.Namespace, seed: int) -> tuple[dict[str, Any], int]:
    try:
        report = _handler(args)(args, list(args.paths), seed)
    except LabError as exc:
        return _error_report(args, exc, seed), exc.exit_code
    except OSError as exc:
        err = InvalidArgument(f"cannot read input: {exc}")
        return _error_report(args, err, seed), err.exit_code
    report["seed"] = seed
    return report, 0 if report["valid"] else 1


def _workers(k: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise InvalidArgument(f"{THREADS_ENV} must be an integer") from None
    return max(1, min(k, limit))


def _execute(args: argparse.Namespace) -> tuple[dict[str, Any], int]:
    if args.repeat < 1:
        raise InvalidArgument("--repeat must be at least 1")
    if args.repeat == 1:
        return _one(args, args.seed)
    seeds = [args.seed + i for i in range(args.repeat)]
    workers = _workers(args.repeat) if args.parallel else 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, [args] * len(seeds), seeds))
    else:
        results = [_one(args, s) for s in seeds]
    codes = [code for _, code in results]
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "repeat": args.repeat,
        "runs": [r for r, _ in results],
        "valid_runs": sum(1 for c in codes if c == 0),
        "valid": all(c == 0 for c in codes),
    }
    return report, max(codes)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"slocal-lab: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "gen":
        try:
            text = _gen(args)
        except LabError as exc:
            print(f"slocal-lab: error: {exc}", file=sys.stderr)
            return exc.exit_code
        _emit(text, args.out)
        return 0
    try:
        report, code = _execute(args)
    except LabError as exc:
        print(f"slocal-lab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    if "error" in report:
        print(f"slocal-lab: error: {report['error']['message']}", file=sys.stderr)
    _emit(canonical_json(report) + "\n", args.json_out)
    return code


if __name__ == "__main__":
    sys.exit(main())
