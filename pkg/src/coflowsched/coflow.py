"""Workload model: flows, coflows, random generators, and schedule accounting.

A coflow is the unit of scheduling: a job's transfer finishes only when its
slowest flow does, so the figure of merit for a schedule is the completion
time of the last-finishing flow (CCT), not any per-flow average.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netgraph import HOST, Network, Path, RATE_TOL


@dataclass
class Flow:
    """One point-to-point transfer: move ``volume`` Gb from src to dst.

    ``residual`` is the data still outstanding; it equals ``volume`` until a
    simulation starts draining the flow, and supports preemptive
    rescheduling from partial progress.
    """

    id: int
    src: int
    dst: int
    volume: float
    residual: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.residual is None:
            self.residual = self.volume
        if self.volume <= 0:
            raise ValueError(f"flow {self.id}: volume must be positive")
        if not 0 <= self.residual <= self.volume:
            raise ValueError(f"flow {self.id}: residual outside [0, volume]")
        if self.src == self.dst:
            raise ValueError(f"flow {self.id}: src and dst must differ")


@dataclass
class Coflow:
    id: int
    flows: list[Flow]
    arrival_time: float = 0.0

    def __post_init__(self):
        if not self.flows:
            raise ValueError("a coflow needs at least one flow")
        ids = [f.id for f in self.flows]
        if len(set(ids)) != len(ids):
            raise ValueError("flow ids must be unique within a coflow")

    def flow(self, fid: int) -> Flow:
        return next(f for f in self.flows if f.id == fid)


@dataclass
class Schedule:
    """Routes and rates for every flow of one coflow.

    ``routes`` and ``rates`` are keyed by flow id.  Completion times are
    derived from the residual volume, so a schedule computed mid-simulation
    accounts for data already transferred.
    """

    coflow: Coflow
    routes: dict[int, Path]
    rates: dict[int, float]

    def completion_time(self, fid: int) -> float:
        return self.coflow.flow(fid).residual / self.rates[fid]

    def completion_times(self) -> dict[int, float]:
        return {f.id: f.residual / self.rates[f.id] for f in self.coflow.flows}

    def validate(self, net: Network) -> None:
        """Check endpoints, positive rates, and per-link capacity.

        Capacity is checked against the network's *current* availability,
        i.e. the snapshot this schedule is about to be applied to.
        """
        per_link: dict[int, list[float]] = {}
        for f in self.coflow.flows:
            if f.id not in self.routes or f.id not in self.rates:
                raise ValueError(f"flow {f.id} missing from schedule")
            route, rate = self.routes[f.id], self.rates[f.id]
            if rate <= 0:
                raise ValueError(f"flow {f.id}: nonpositive rate {rate}")
            if route.src != f.src or route.dst != f.dst:
                raise ValueError(f"flow {f.id}: route endpoints mismatch")
            for lid in route.links:
                per_link.setdefault(lid, []).append(rate)
        for lid, rates in per_link.items():
            total = sum(rates)
            if total > net.available_of(lid) + RATE_TOL:
                raise ValueError(
                    f"link {lid}: scheduled {total} Gb/s exceeds "
                    f"{net.available_of(lid)} available"
                )


def cct(schedule: Schedule) -> float:
    """Coflow completion time: the largest per-flow completion time."""
    return max(schedule.completion_times().values())


def allocated_bandwidth(schedule: Schedule) -> float:
    """Total bandwidth granted to the coflow (sum of flow rates)."""
    return sum(schedule.rates.values())


def avg_route_length(schedule: Schedule) -> float:
    """Mean hop count over the coflow's routes."""
    return sum(p.hops for p in schedule.routes.values()) / len(schedule.routes)


def random_coflow(
    net: Network,
    n_flows: int,
    beta: float,
    v_max: float,
    rng: np.random.Generator,
    coflow_id: int = 0,
    arrival_time: float = 0.0,
) -> Coflow:
    """Draw a coflow with uniformly random host endpoints and volumes.

    Volumes are uniform on [beta * v_max, v_max]; endpoints are host pairs
    sampled uniformly with src != dst (distinct flows may share a pair).
    """
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if n_flows < 1:
        raise ValueError("n_flows must be >= 1")
    hosts = net.hosts
    if len(hosts) < 2:
        raise ValueError("network needs at least two hosts")
    flows = []
    for i in range(n_flows):
        src = hosts[rng.integers(len(hosts))]
        dst = hosts[rng.integers(len(hosts))]
        while dst == src:
            dst = hosts[rng.integers(len(hosts))]
        volume = float(rng.uniform(beta * v_max, v_max))
        flows.append(Flow(id=i, src=src, dst=dst, volume=volume))
    return Coflow(id=coflow_id, flows=flows, arrival_time=arrival_time)


def coflow_to_json(cf: Coflow) -> dict:
    return {"flows": [{"src": f.src, "dst": f.dst, "volume": f.volume} for f in cf.flows]}


def coflow_from_json(data: dict, coflow_id: int = 0) -> Coflow:
    flows = [
        Flow(id=i, src=d["src"], dst=d["dst"], volume=d["volume"])
        for i, d in enumerate(data["flows"])
    ]
    return Coflow(id=coflow_id, flows=flows)
