"""Independent verification oracles: slow, obviously-correct reference
implementations used to cross-check the fast paths.

Nothing here shares code with what it checks: widest paths are verified by
exhaustive simple-path enumeration, the closed-form allocation by an LP,
LP optima by vertex enumeration, and whole schedules by brute force over
all route assignments.  Everything is exponential and meant for small
instances only.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .coflow import Coflow
from .lpcore import LinearProgram, solve_lp
from .netgraph import Network, Path, WidthSpec, _width_array
from .optba import InfeasibleAllocationError, RoutingPlan, optba_allocate


def enumerate_simple_paths(
    net: Network, src: int, dst: int, max_hops: int | None = None
) -> list[Path]:
    """Every simple path from src to dst, by depth-first search."""
    out: list[Path] = []
    stack: list[int] = [src]
    on_stack = {src}

    def walk(u: int) -> None:
        if max_hops is not None and len(stack) - 1 >= max_hops and u != dst:
            return
        if u == dst:
            out.append(net.path_between(stack))
            return
        for v, _ in net.neighbors(u):
            if v not in on_stack:
                stack.append(v)
                on_stack.add(v)
                walk(v)
                stack.pop()
                on_stack.remove(v)

    walk(src)
    return out


def widest_path_by_enumeration(
    net: Network, src: int, dst: int, width: WidthSpec = None
) -> Path | None:
    """Best path under (bottleneck desc, hops asc, lex nodes), brute force."""
    widths = _width_array(net, width)
    best: Path | None = None
    best_key = None
    for path in enumerate_simple_paths(net, src, dst):
        bn = net.bottleneck(path, widths)
        if bn <= 0.0:
            continue
        key = (-bn, path.hops, path.nodes)
        if best_key is None or key < best_key:
            best, best_key = path, key
    return best


def brute_force_schedule(
    net: Network, coflow: Coflow, max_hops: int | None = None
) -> tuple[float, dict[int, Path]]:
    """Minimum CCT over every assignment of simple paths to flows, each
    assignment rated with the closed-form optimal allocation.

    Returns (inf, {}) when no assignment is feasible.
    """
    choices = {
        f.id: enumerate_simple_paths(net, f.src, f.dst, max_hops)
        for f in coflow.flows
    }
    residuals = {f.id: f.residual for f in coflow.flows}
    fids = [f.id for f in coflow.flows]
    best_cct = math.inf
    best_routes: dict[int, Path] = {}
    for combo in itertools.product(*(choices[fid] for fid in fids)):
        routes = dict(zip(fids, combo))
        try:
            rates = optba_allocate(RoutingPlan(routes), residuals, net)
        except InfeasibleAllocationError:
            continue
        worst = max(residuals[fid] / rates[fid] for fid in fids)
        if worst < best_cct:
            best_cct = worst
            best_routes = routes
    return best_cct, best_routes


def lp_minimum_by_vertex_enumeration(lp: LinearProgram) -> float:
    """Optimal objective of a small LP by enumerating basic solutions.

    Candidate vertices come from every choice of n active constraints among
    the rows (as equalities) and the finite variable bounds.  Intended for
    n <= 6 or so; raises on unbounded-looking inputs (no finite vertex
    attains the minimum of an unbounded LP).
    """
    n = len(lp.variables)
    rows: list[tuple[np.ndarray, float]] = []
    for con in lp.constraints:
        a = np.zeros(n)
        for j, c in con.coefs.items():
            a[j] = c
        rows.append((a, con.rhs))
    for j, v in enumerate(lp.variables):
        if v.low != -math.inf:
            e = np.zeros(n)
            e[j] = 1.0
            rows.append((e, v.low))
        if v.up != math.inf:
            e = np.zeros(n)
            e[j] = 1.0
            rows.append((e, v.up))
    c = np.zeros(n)
    for j, coef in lp.objective.items():
        c[j] = coef

    def feasible(x: np.ndarray) -> bool:
        for v, xj in zip(lp.variables, x):
            if xj < v.low - 1e-7 or xj > v.up + 1e-7:
                return False
        for con in lp.constraints:
            lhs = sum(cc * x[j] for j, cc in con.coefs.items())
            if con.rel == "<=" and lhs > con.rhs + 1e-7:
                return False
            if con.rel == ">=" and lhs < con.rhs - 1e-7:
                return False
            if con.rel == "=" and abs(lhs - con.rhs) > 1e-7:
                return False
        return True

    best = math.inf
    any_feasible = False
    for subset in itertools.combinations(range(len(rows)), n):
        A = np.vstack([rows[i][0] for i in subset])
        b = np.array([rows[i][1] for i in subset])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        if feasible(x):
            any_feasible = True
            best = min(best, float(c @ x))
    if not any_feasible:
        return math.inf  # infeasible LP
    return best


def random_connected_network(
    rng: np.random.Generator,
    n_nodes: int,
    extra_links: int,
    cap_range: tuple[float, float] = (1.0, 10.0),
) -> Network:
    """Random connected graph: a random spanning tree plus extra links.

    All nodes are hosts so any pair can serve as flow endpoints.
    """
    from .netgraph import HOST, Link

    links: list[tuple[int, int]] = []
    present: set[tuple[int, int]] = set()
    for v in range(1, n_nodes):
        u = int(rng.integers(v))
        links.append((u, v))
        present.add((u, v))
    for _ in range(extra_links):
        u = int(rng.integers(n_nodes))
        v = int(rng.integers(n_nodes))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in present:
            continue
        present.add(key)
        links.append(key)
    caps = rng.uniform(*cap_range, size=len(links))
    return Network(
        [HOST] * n_nodes,
        [Link(u, v, float(c)) for (u, v), c in zip(links, caps)],
    )
