"""Candidate-path baselines: route each flow within K precomputed paths.

These schedulers mirror the optimization step of candidate-restricted
coflow scheduling: pick one of K candidate paths per flow and allocate
bandwidth to minimize the coflow completion time.  The original system's
exact optimization is not restated anywhere recoverable, so this module
reconstructs it in three deterministic steps:

1. a fractional LP that may split each flow's volume across its candidates,
2. rounding each flow to its largest-fraction candidate (ties: earlier
   candidate in list order),
3. re-rating the chosen routes with the same closed-form optimal allocator
   the main algorithms use.

Step 3 deliberately hands the baseline the strongest allocator available,
so comparisons measure the routing restriction, not the rate computation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coflow import Coflow, Schedule
from .errors import SchedulingError
from .lpcore import LinearProgram, solve_lp
from .netgraph import (
    Network,
    Path,
    k_max_capacity_paths,
    k_shortest_max_capacity_paths,
    k_shortest_paths,
)
from .optba import InfeasibleAllocationError, RoutingPlan, optba_allocate

#: Candidate-list size used throughout the evaluations.
DEFAULT_K = 5

VARIANTS = ("S", "M", "SM")


@dataclass
class CandidateSet:
    """Per-flow ordered candidate paths, at most K each."""

    variant: str
    paths: dict[int, list[Path]]


def generate_candidates(
    net: Network, coflow: Coflow, variant: str, K: int = DEFAULT_K
) -> CandidateSet:
    """Enumerate candidates per flow on the current availability snapshot.

    Variants: "S" = K fewest-hop paths, "M" = K widest paths,
    "SM" = K widest-then-fewest-hop paths.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    enumerate_paths = {
        "S": k_shortest_paths,
        "M": k_max_capacity_paths,
        "SM": k_shortest_max_capacity_paths,
    }[variant]
    paths = {f.id: enumerate_paths(net, f.src, f.dst, K) for f in coflow.flows}
    return CandidateSet(variant=variant, paths=paths)


def mincct(net: Network, coflow: Coflow, candidates: CandidateSet) -> Schedule:
    """Assign each flow one candidate path and a rate, minimizing the CCT.

    Raises SchedulingError when a flow has no candidates or the candidate
    LP is infeasible (every usable combination crosses an exhausted link).
    """
    residuals = {f.id: f.residual for f in coflow.flows}
    if any(v <= 0 for v in residuals.values()):
        raise ValueError("every flow must have positive residual volume")
    for f in coflow.flows:
        if not candidates.paths.get(f.id):
            raise SchedulingError(f"flow {f.id} has no candidate paths")

    lp = LinearProgram()
    t = lp.add_variable("T")
    frac: dict[tuple[int, int], int] = {}
    for f in coflow.flows:
        for j, _ in enumerate(candidates.paths[f.id]):
            frac[f.id, j] = lp.add_variable(f"f[{f.id},{j}]")
    for f in coflow.flows:
        lp.add_constraint(
            {frac[f.id, j]: 1.0 for j in range(len(candidates.paths[f.id]))}, "=", 1.0
        )
    link_terms: dict[int, dict[int, float]] = {}
    for f in coflow.flows:
        for j, path in enumerate(candidates.paths[f.id]):
            for lid in path.links:
                link_terms.setdefault(lid, {})[frac[f.id, j]] = residuals[f.id]
    for lid, coefs in sorted(link_terms.items()):
        row = dict(coefs)
        row[t] = -net.available_of(lid)
        lp.add_constraint(row, "<=", 0.0)
    lp.set_objective({t: 1.0})

    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise SchedulingError(f"candidate LP is {sol.status}; cannot schedule")

    routes: dict[int, Path] = {}
    for f in coflow.flows:
        best_j, best_frac = 0, -1.0
        for j in range(len(candidates.paths[f.id])):
            value = sol[f"f[{f.id},{j}]"]
            if value > best_frac + 1e-12:  # strict: ties keep the earlier candidate
                best_j, best_frac = j, value
        routes[f.id] = candidates.paths[f.id][best_j]
    try:
        rates = optba_allocate(RoutingPlan(routes), residuals, net)
    except InfeasibleAllocationError as exc:
        raise SchedulingError(str(exc)) from exc
    return Schedule(coflow, routes, rates)


def mincct_s(net: Network, coflow: Coflow, K: int = DEFAULT_K) -> Schedule:
    return mincct(net, coflow, generate_candidates(net, coflow, "S", K))


def mincct_m(net: Network, coflow: Coflow, K: int = DEFAULT_K) -> Schedule:
    return mincct(net, coflow, generate_candidates(net, coflow, "M", K))


def mincct_sm(net: Network, coflow: Coflow, K: int = DEFAULT_K) -> Schedule:
    return mincct(net, coflow, generate_candidates(net, coflow, "SM", K))
