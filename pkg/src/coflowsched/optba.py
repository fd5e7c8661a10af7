"""Optimal bandwidth allocation for flows whose routes are already fixed.

With routes pinned, minimizing the coflow completion time has a closed-form
solution: on every link, split the available bandwidth across the flows
crossing it in proportion to their volumes; each flow then takes the
smallest share it receives on any link of its route.  The resulting
completion times equalize on the critical link, which is what makes the
point optimal, and computing it is a single pass over the routes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .netgraph import Network, Path, RATE_TOL


class InfeasibleAllocationError(ValueError):
    """A flow's route crosses a link with no available bandwidth."""

    def __init__(self, flow_id: int, link_id: int, link_desc: str):
        self.flow_id = flow_id
        self.link_id = link_id
        super().__init__(
            f"flow {flow_id} routed through exhausted link {link_id} ({link_desc})"
        )


@dataclass
class RoutingPlan:
    """One route per flow, keyed by flow id."""

    routes: dict[int, Path]

    def indicator(self, fid: int, lid: int) -> int:
        """1 when link ``lid`` lies on flow ``fid``'s route, else 0."""
        return 1 if lid in self.routes[fid].links else 0

    def replace(self, fid: int, path: Path) -> "RoutingPlan":
        routes = dict(self.routes)
        routes[fid] = path
        return RoutingPlan(routes)


def _positive_volumes(volumes: Mapping[int, float]) -> dict[int, float]:
    # Zero-volume flows complete instantly and must not enter the share
    # denominators.
    for fid, v in volumes.items():
        if v < 0:
            raise ValueError(f"flow {fid}: negative volume")
    return {fid: v for fid, v in volumes.items() if v > 0}


def proportional_share(
    plan: RoutingPlan, volumes: Mapping[int, float], net: Network
) -> dict[int, dict[int, float]]:
    """Volume-proportional split of every link's bandwidth among its users.

    Returns share[fid][lid] = V_fid * B_lid / (sum of volumes crossing lid),
    for every link on fid's route.
    """
    vols = _positive_volumes(volumes)
    link_load: dict[int, float] = {}
    for fid, vol in vols.items():
        for lid in plan.routes[fid].links:
            link_load[lid] = link_load.get(lid, 0.0) + vol
    shares: dict[int, dict[int, float]] = {}
    for fid, vol in vols.items():
        shares[fid] = {}
        for lid in plan.routes[fid].links:
            avail = net.available_of(lid)
            if avail <= RATE_TOL:
                lk = net.links[lid]
                raise InfeasibleAllocationError(fid, lid, f"{lk.u}-{lk.v}")
            shares[fid][lid] = vol * avail / link_load[lid]
    return shares


def optba_allocate(
    plan: RoutingPlan, volumes: Mapping[int, float], net: Network
) -> dict[int, float]:
    """Optimal per-flow rate for fixed routes: each flow's smallest
    proportional share over the links of its route.

    Flows with zero volume get rate 0 (they are already complete).
    """
    shares = proportional_share(plan, volumes, net)
    rates = {fid: 0.0 for fid in volumes}
    for fid, per_link in shares.items():
        rates[fid] = min(per_link.values())
    return rates


def optba_lp_oracle(
    plan: RoutingPlan, volumes: Mapping[int, float], net: Network
) -> float:
    """Optimal completion time of the fixed-route problem, via an LP.

    Linearized with q_i = T * b_i: minimize T subject to q_i >= V_i and,
    per link, sum of crossing q_i <= T * B.  Used in tests to check the
    closed form against an independent solution path.
    """
    from .lpcore import LinearProgram, solve_lp

    vols = _positive_volumes(volumes)
    if not vols:
        return 0.0
    lp = LinearProgram()
    t = lp.add_variable("T")
    q = {fid: lp.add_variable(f"q[{fid}]") for fid in vols}
    for fid, vol in vols.items():
        lp.add_constraint({q[fid]: 1.0}, ">=", vol)
    link_users: dict[int, list[int]] = {}
    for fid in vols:
        for lid in plan.routes[fid].links:
            link_users.setdefault(lid, []).append(fid)
    for lid, users in sorted(link_users.items()):
        coefs = {q[fid]: 1.0 for fid in users}
        coefs[t] = -net.available_of(lid)
        lp.add_constraint(coefs, "<=", 0.0)
    lp.set_objective({t: 1.0})
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise InfeasibleAllocationError(-1, -1, f"oracle LP status {sol.status}")
    return sol.objective
