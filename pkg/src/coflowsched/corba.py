"""Joint routing and bandwidth allocation for one coflow.

Three phases: solve the LP relaxation of the joint problem, round each
flow's fractional routing onto the widest path it supports, then locally
improve the schedule by rerouting completion-time-critical flows around
saturated links.  The fast variant skips the LP and starts from fewest-hop
widest paths instead; both share the identical local search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coflow import Coflow, Schedule
from .errors import SchedulingError
from .lpcore import RelaxedSolution, build_cos_relax_cvx, recover_relaxed, solve_lp
from .netgraph import (
    Network,
    RATE_TOL,
    allocate_along,
    max_capacity_path,
    release_along,
    shortest_max_capacity_path,
)
from .optba import InfeasibleAllocationError, RoutingPlan, optba_allocate

logger = logging.getLogger(__name__)

#: Relative tolerance for "equals the CCT" membership and for accepting an
#: improvement; exact float equality would make both tests vacuous.
CT_REL_TOL = 1e-9
#: Local search gives up after this many iterations per flow (safety valve).
ITER_CAP_FACTOR = 50


@dataclass
class SearchState:
    """Snapshot of one local-search iteration, for inspection and tests."""

    schedule: Schedule
    cct: float
    critical: list[int]  # flows whose completion time attains the CCT
    congested: dict[int, list[int]]  # per critical flow: saturated route links


@dataclass
class CorbaResult:
    """Schedule plus the intermediate artifacts the tests assert against."""

    schedule: Schedule
    initial: Schedule
    iterations: int
    lower_bound: Optional[float] = None  # relaxation optimum; None for the fast path
    relaxed: Optional[RelaxedSolution] = None


def _residuals(coflow: Coflow) -> dict[int, float]:
    vols = {f.id: f.residual for f in coflow.flows}
    if any(v <= 0 for v in vols.values()):
        raise ValueError("every flow must have positive residual volume")
    return vols


def round_routes(relaxed: RelaxedSolution, net: Network, coflow: Coflow) -> RoutingPlan:
    """Fix each flow's route to the widest path under its |x| fractions.

    The relaxation may split a flow across paths; the widest-path rounding
    keeps the route carrying the largest fraction.  A flow whose fractions
    are zero everywhere means the relaxation shipped nothing, which cannot
    happen for positive volumes; it is reported as a corrupt instance.
    """
    routes = {}
    for f in coflow.flows:
        widths = np.abs(relaxed.x[f.id])
        path = max_capacity_path(net, f.src, f.dst, widths)
        if path is None:
            raise SchedulingError(
                f"flow {f.id}: relaxed solution routes no volume on any path"
            )
        routes[f.id] = path
    return RoutingPlan(routes)


def initial_allocation(plan: RoutingPlan, coflow: Coflow, net: Network) -> Schedule:
    """Rate the fixed routes with the closed-form optimal allocation."""
    rates = optba_allocate(plan, _residuals(coflow), net)
    return Schedule(coflow, dict(plan.routes), rates)


def observe(schedule: Schedule, net: Network) -> SearchState:
    """Current CCT, critical-flow set, and per-flow saturated links."""
    cts = schedule.completion_times()
    top = max(cts.values())
    critical = [fid for fid, ct in cts.items() if ct >= top * (1 - CT_REL_TOL)]
    congested = {
        fid: [
            lid
            for lid in schedule.routes[fid].links
            if net.available_of(lid) <= RATE_TOL
        ]
        for fid in critical
    }
    return SearchState(schedule, top, critical, congested)


def _apply(net: Network, routes: dict, rates: dict) -> None:
    for fid, path in routes.items():
        allocate_along(net, path, rates[fid])


def _teardown(net: Network, routes: dict, rates: dict) -> None:
    for fid, path in routes.items():
        release_along(net, path, rates[fid])


def _local_search(
    schedule: Schedule, net: Network, coflow: Coflow, validate: bool = False
) -> tuple[Schedule, int]:
    """Improve a feasible schedule in place; ``net`` must already carry it.

    Each iteration scans the flows attaining the CCT.  A candidate move
    releases one such flow, masks the links it saturated, reroutes it on the
    widest remaining path, and re-derives every flow's rate (moving one flow
    changes the proportional shares on shared links).  The move is kept only
    if the flow's own completion time strictly drops; otherwise all claims
    are restored exactly.  First improvement restarts the scan; no
    improvement anywhere terminates the search.
    """
    residuals = _residuals(coflow)
    flows = {f.id: f for f in coflow.flows}
    order = [f.id for f in coflow.flows]
    routes = dict(schedule.routes)
    rates = dict(schedule.rates)
    cap = ITER_CAP_FACTOR * len(order)
    iters = 0
    while True:
        if iters >= cap:
            logger.warning(
                "local search stopped at the %d-iteration safety cap", cap
            )
            break
        iters += 1
        cts = {fid: residuals[fid] / rates[fid] for fid in order}
        top = max(cts.values())
        critical = [fid for fid in order if cts[fid] >= top * (1 - CT_REL_TOL)]
        improved = False
        for fid in critical:
            f = flows[fid]
            old_path = routes[fid]
            congested = [
                lid for lid in old_path.links if net.available_of(lid) <= RATE_TOL
            ]
            release_along(net, old_path, rates[fid])
            widths = net.available.copy()
            widths[congested] = 0.0
            new_path = max_capacity_path(net, f.src, f.dst, widths)
            if new_path is None or new_path == old_path:
                allocate_along(net, old_path, rates[fid])
                continue
            # Strip the rest of the coflow so rates are re-derived against
            # the same base availability the initial allocation saw.
            for gid in order:
                if gid != fid:
                    release_along(net, routes[gid], rates[gid])
            cand_routes = dict(routes)
            cand_routes[fid] = new_path
            try:
                cand_rates = optba_allocate(RoutingPlan(cand_routes), residuals, net)
            except InfeasibleAllocationError:
                cand_rates = None
            accept = (
                cand_rates is not None
                and residuals[fid] / cand_rates[fid] < cts[fid] * (1 - CT_REL_TOL)
            )
            if accept:
                routes, rates = cand_routes, cand_rates
                if validate:
                    Schedule(coflow, routes, rates).validate(net)
            _apply(net, routes, rates)
            if accept:
                improved = True
                break
        if not improved:
            break
    return Schedule(coflow, routes, rates), iters


def local_search(schedule: Schedule, net: Network, coflow: Coflow) -> Schedule:
    """Public wrapper around the search; see :func:`_local_search`."""
    return _local_search(schedule, net, coflow)[0]


def corba(
    net: Network, coflow: Coflow, details: bool = False, validate: bool = False
):
    """Schedule a coflow by LP relaxation, rounding, and local search.

    Operates on a private copy of the network state; the caller applies the
    returned schedule when (and if) it commits to it.  Raises
    SchedulingError when some flow has no route with positive bandwidth.
    """
    work = net.copy()
    lp = build_cos_relax_cvx(work, coflow)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise SchedulingError(f"relaxation is {sol.status}; cannot schedule")
    relaxed = recover_relaxed(sol, coflow, len(work.links))
    plan = round_routes(relaxed, work, coflow)
    return _finish(work, coflow, plan, details, validate, relaxed)


def corba_fast(
    net: Network, coflow: Coflow, details: bool = False, validate: bool = False
):
    """LP-free variant: start from fewest-hop widest paths, then local search."""
    work = net.copy()
    routes = {}
    for f in coflow.flows:
        path = shortest_max_capacity_path(work, f.src, f.dst)
        if path is None:
            raise SchedulingError(
                f"flow {f.id}: no route with positive available bandwidth"
            )
        routes[f.id] = path
    return _finish(work, coflow, RoutingPlan(routes), details, validate, None)


def _finish(
    work: Network,
    coflow: Coflow,
    plan: RoutingPlan,
    details: bool,
    validate: bool,
    relaxed: Optional[RelaxedSolution],
):
    try:
        initial = initial_allocation(plan, coflow, work)
    except InfeasibleAllocationError as exc:
        raise SchedulingError(str(exc)) from exc
    if validate:
        initial.validate(work)
    _apply(work, initial.routes, initial.rates)
    final, iters = _local_search(initial, work, coflow, validate=validate)
    if details:
        return CorbaResult(
            schedule=final,
            initial=initial,
            iterations=iters,
            lower_bound=relaxed.T if relaxed else None,
            relaxed=relaxed,
        )
    return final
