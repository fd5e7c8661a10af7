"""Seeded experiment engines: offline single-coflow runs and an online
arrival-driven simulation of a preemptive coflow scheduler.

Everything stochastic is drawn from one numpy Generator per run, and the
event loop breaks ties by insertion order, so a (config, seed) pair pins the
whole trajectory.  Offline runs schedule one random coflow on a FatTree
pre-loaded with noise traffic.  Online runs replay the preemptive
ascending-CCT policy: every coflow arrival tears down and reschedules all
active coflows from their residual volumes, shortest-completion first; aged
coflows (waiting past a threshold) jump the queue; a coflow completion
redistributes its bandwidth by re-running the pass.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterator, Optional

import numpy as np

from .baselines import mincct_m, mincct_s, mincct_sm
from .coflow import (
    Coflow,
    Flow,
    Schedule,
    allocated_bandwidth,
    avg_route_length,
    cct,
    random_coflow,
)
from .corba import corba, corba_fast
from .errors import SchedulingError
from .netgraph import (
    Network,
    Path,
    RATE_TOL,
    allocate_along,
    fat_tree,
    random_shortest_path,
    release_along,
)

ALGORITHMS: dict[str, Callable[[Network, Coflow], Schedule]] = {
    "corba": corba,
    "corba-fast": corba_fast,
    "mincct-s": mincct_s,
    "mincct-m": mincct_m,
    "mincct-sm": mincct_sm,
}

#: Noise flows draw their rate uniformly from this interval (Gb/s), then
#: clamp to whatever their route still has available.
NOISE_RATE_RANGE = (0.5, 2.0)
NOISE_DURATION_RANGE = (1.0, 150.0)


class ConfigError(ValueError):
    """The experiment configuration itself is unusable."""


def _algorithm(name: str) -> Callable[[Network, Coflow], Schedule]:
    try:
        return ALGORITHMS[name]
    except KeyError:
        raise ConfigError(
            f"unknown algorithm {name!r}; expected one of {sorted(ALGORITHMS)}"
        ) from None


def _from_dict(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return cls(**data)


@dataclass
class OfflineConfig:
    """One offline run: schedule one random coflow on a noisy FatTree."""

    k: int = 4
    alpha_over: int = 2
    link_capacity: float = 10.0
    n_flows: int = 10
    beta: float = 0.7
    v_max: float = 1000.0
    noise_count: Optional[int] = None  # default: alpha_over * k**3
    algorithm: str = "corba"
    seed: int = 0

    def resolved_noise_count(self) -> int:
        if self.noise_count is None:
            return self.alpha_over * self.k**3
        return self.noise_count

    @classmethod
    def from_dict(cls, data: dict) -> "OfflineConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class OnlineConfig:
    """One online run: Poisson coflow arrivals on a FatTree with noise churn."""

    k: int = 10
    alpha_over: int = 2
    link_capacity: float = 10.0
    flows_per_coflow: int = 30
    beta: float = 0.7
    v_max: float = 1000.0
    coflow_rate: float = 0.01  # arrivals per second
    arrival_cutoff: float = 1800.0  # seconds; no coflows arrive afterwards
    noise_rate: Optional[float] = None  # default: 40/s scaled by (k/10)**3
    wait_threshold: float = 100.0  # seconds before a waiting coflow jumps the queue
    algorithm: str = "corba-fast"
    seed: int = 0

    def resolved_noise_rate(self) -> float:
        if self.noise_rate is None:
            return 40.0 * (self.k / 10.0) ** 3
        return self.noise_rate

    @classmethod
    def from_dict(cls, data: dict) -> "OnlineConfig":
        return _from_dict(cls, data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricsRecord:
    """One CSV row of experiment output.

    Offline: metrics of the single scheduled coflow.  Online: cct_s is the
    mean CCT over completed coflows, alloc_gbps / avg_hops are means over
    successful schedule placements, runtime_s is the mean scheduling-pass
    wall time.
    """

    seed: int
    algo: str
    k: int
    n_flows: int
    cct_s: float
    alloc_gbps: float
    avg_hops: float
    runtime_s: float

    CSV_HEADER = "seed,algo,k,n_flows,cct_s,alloc_gbps,avg_hops,runtime_s"

    def to_csv_row(self) -> str:
        return (
            f"{self.seed},{self.algo},{self.k},{self.n_flows},"
            f"{self.cct_s:.10g},{self.alloc_gbps:.10g},"
            f"{self.avg_hops:.10g},{self.runtime_s:.10g}"
        )

    @classmethod
    def from_csv_row(cls, row: str) -> "MetricsRecord":
        seed, algo, k, n_flows, cct_s, alloc, hops, runtime = row.split(",")
        return cls(
            seed=int(seed),
            algo=algo,
            k=int(k),
            n_flows=int(n_flows),
            cct_s=float(cct_s),
            alloc_gbps=float(alloc),
            avg_hops=float(hops),
            runtime_s=float(runtime),
        )


@dataclass
class NoiseFlow:
    src: int
    dst: int
    route: Path
    rate: float
    start: float
    duration: float


def _spawn_noise(net: Network, rng: np.random.Generator, start: float) -> NoiseFlow:
    """Draw one noise flow and claim its bandwidth on the network.

    Endpoints are random hosts, the route is a random fewest-hop path, and
    the rate is uniform on NOISE_RATE_RANGE clamped to what the route still
    has available (possibly zero, in which case nothing is claimed).
    """
    hosts = net.hosts
    src = hosts[rng.integers(len(hosts))]
    dst = hosts[rng.integers(len(hosts))]
    while dst == src:
        dst = hosts[rng.integers(len(hosts))]
    route = random_shortest_path(net, src, dst, rng)
    rate = float(rng.uniform(*NOISE_RATE_RANGE))
    rate = min(rate, max(net.bottleneck(route), 0.0))
    duration = float(rng.uniform(*NOISE_DURATION_RANGE))
    if rate > 0.0:
        allocate_along(net, route, rate)
    return NoiseFlow(src, dst, route, rate, start, duration)


def noise_process(
    config, rng: np.random.Generator
) -> Iterator[float]:
    """Start times of the noise traffic for a config.

    OfflineConfig: the configured number of flows, all active at time 0.
    OnlineConfig: an endless Poisson stream at the configured rate.
    """
    if isinstance(config, OfflineConfig):
        return iter([0.0] * config.resolved_noise_count())

    def poisson() -> Iterator[float]:
        rate = config.resolved_noise_rate()
        if rate <= 0:
            return
        t = 0.0
        while True:
            t += float(rng.exponential(1.0 / rate))
            yield t

    return poisson()


def run_offline(config: OfflineConfig) -> MetricsRecord:
    """Build the topology, load noise, schedule one random coflow, measure.

    Identical configs (same seed) produce identical records, except for the
    wall-clock runtime field.
    """
    algo = _algorithm(config.algorithm)
    rng = np.random.default_rng(config.seed)
    net = fat_tree(config.k, config.alpha_over, config.link_capacity)
    for start in noise_process(config, rng):
        _spawn_noise(net, rng, start)
    coflow = random_coflow(net, config.n_flows, config.beta, config.v_max, rng)
    t0 = time.perf_counter()
    schedule = algo(net, coflow)
    runtime = time.perf_counter() - t0
    schedule.validate(net)
    return MetricsRecord(
        seed=config.seed,
        algo=config.algorithm,
        k=config.k,
        n_flows=config.n_flows,
        cct_s=cct(schedule),
        alloc_gbps=allocated_bandwidth(schedule),
        avg_hops=avg_route_length(schedule),
        runtime_s=runtime,
    )


# -- online simulation --------------------------------------------------------


@dataclass
class _ActiveCoflow:
    coflow: Coflow
    residuals: dict[int, float]
    done: set[int] = field(default_factory=set)
    schedule: Optional[Schedule] = None
    generation: int = -1
    last_update: float = 0.0
    first_scheduled: Optional[float] = None
    forced: bool = False

    @property
    def arrival(self) -> float:
        return self.coflow.arrival_time

    def remaining(self) -> Coflow:
        """The unfinished part, with volumes reset to current residuals."""
        flows = [
            Flow(id=f.id, src=f.src, dst=f.dst, volume=self.residuals[f.id])
            for f in self.coflow.flows
            if f.id not in self.done
        ]
        return Coflow(self.coflow.id, flows, self.coflow.arrival_time)


@dataclass
class CoflowOutcome:
    coflow_id: int
    arrival: float
    completed: float
    first_scheduled: float
    forced: bool

    @property
    def cct(self) -> float:
        return self.completed - self.arrival

    @property
    def wait(self) -> float:
        return self.first_scheduled - self.arrival


@dataclass
class OnlineTrace:
    """Per-run diagnostics collected alongside the aggregate metrics."""

    outcomes: list[CoflowOutcome] = field(default_factory=list)
    pass_times: list[float] = field(default_factory=list)
    pass_clock: list[float] = field(default_factory=list)  # sim time of each pass
    events: int = 0
    max_overclaim: float = 0.0  # worst capacity violation seen (validate mode)


class _OnlineSim:
    ARRIVAL, NOISE_START, NOISE_END, FLOW_DONE = range(4)

    def __init__(self, config: OnlineConfig, validate: bool = False):
        self.cfg = config
        self.algo = _algorithm(config.algorithm)
        self.validate = validate
        self.rng = np.random.default_rng(config.seed)
        self.net = fat_tree(config.k, config.alpha_over, config.link_capacity)
        self.trace = OnlineTrace()
        self._seq = itertools.count()
        self.events: list[tuple] = []
        self.active: dict[int, _ActiveCoflow] = {}
        self.placements: list[Schedule] = []
        self.completed = 0
        self.generation = 0
        self.noise_active: dict[int, NoiseFlow] = {}
        self._noise_ids = itertools.count()
        self._noise_times = noise_process(config, self.rng)

        # All coflow arrivals are drawn up front so that lazy noise draws
        # cannot perturb the workload.
        arrivals: list[float] = []
        t = 0.0
        while True:
            t += float(self.rng.exponential(1.0 / config.coflow_rate))
            if t >= config.arrival_cutoff:
                break
            arrivals.append(t)
        self.coflows = [
            random_coflow(
                self.net,
                config.flows_per_coflow,
                config.beta,
                config.v_max,
                self.rng,
                coflow_id=i,
                arrival_time=at,
            )
            for i, at in enumerate(arrivals)
        ]
        for cf in self.coflows:
            self._push(cf.arrival_time, self.ARRIVAL, cf.id)
        self._push_next_noise()

    # -- event plumbing --

    def _push(self, when: float, kind: int, *payload) -> None:
        heapq.heappush(self.events, (when, next(self._seq), kind, payload))

    def _push_next_noise(self) -> None:
        start = next(self._noise_times, None)
        if start is not None:
            self._push(start, self.NOISE_START)

    def _check_conservation(self) -> None:
        worst = float(-(self.net.available.min(initial=0.0)))
        self.trace.max_overclaim = max(self.trace.max_overclaim, worst)
        if worst > RATE_TOL:
            raise AssertionError(f"link capacity violated by {worst} Gb/s")

    # -- residual accounting --

    def _advance(self, now: float) -> None:
        for act in self.active.values():
            if act.schedule is not None:
                dt = now - act.last_update
                if dt > 0:
                    for fid, rate in act.schedule.rates.items():
                        if fid not in act.done:
                            act.residuals[fid] = max(
                                0.0, act.residuals[fid] - rate * dt
                            )
            act.last_update = now

    # -- scheduling --

    def _try_schedule(self, act: _ActiveCoflow, now: float, forced: bool) -> bool:
        try:
            schedule = self.algo(self.net, act.remaining())
        except SchedulingError:
            if self.net.total_claims() == 0:
                raise ConfigError(
                    f"coflow {act.coflow.id} is unschedulable even on an idle "
                    f"network; the configuration cannot run"
                ) from None
            return False
        self._place(act, schedule, now, forced)
        return True

    def _place(
        self, act: _ActiveCoflow, schedule: Schedule, now: float, forced: bool
    ) -> None:
        for fid, route in schedule.routes.items():
            allocate_along(self.net, route, schedule.rates[fid])
        act.schedule = schedule
        act.generation = self.generation
        if act.first_scheduled is None:
            act.first_scheduled = now
            act.forced = forced
        self.placements.append(schedule)
        for fid, rate in schedule.rates.items():
            eta = now + act.residuals[fid] / rate
            self._push(eta, self.FLOW_DONE, act.coflow.id, fid, self.generation)

    def _reschedule_pass(self, now: float) -> None:
        """Tear down every active coflow and replace ascending by CCT."""
        t0 = time.perf_counter()
        self.generation += 1
        for act in self.active.values():
            if act.schedule is not None:
                for fid, route in act.schedule.routes.items():
                    if fid not in act.done:
                        release_along(self.net, route, act.schedule.rates[fid])
                act.schedule = None
        self._sweep_drained(now)
        self._schedule_waiting(now)
        self.trace.pass_times.append(time.perf_counter() - t0)
        self.trace.pass_clock.append(now)

    def _sweep_drained(self, now: float) -> None:
        """Retire flows whose residual hit zero between their completion
        event and this pass (coincident event timestamps)."""
        for cid in list(self.active):
            act = self.active[cid]
            for f in act.coflow.flows:
                if f.id not in act.done and act.residuals[f.id] <= 0.0:
                    act.done.add(f.id)
            if len(act.done) == len(act.coflow.flows):
                del self.active[cid]
                self.completed += 1
                self.trace.outcomes.append(
                    CoflowOutcome(
                        coflow_id=cid,
                        arrival=act.arrival,
                        completed=now,
                        first_scheduled=act.first_scheduled,
                        forced=act.forced,
                    )
                )

    def _schedule_waiting(self, now: float) -> None:
        """Schedule currently unscheduled coflows: aged first, then by CCT."""
        pending = [
            act
            for act in sorted(self.active.values(), key=lambda a: a.coflow.id)
            if act.schedule is None
        ]
        aged = [a for a in pending if now - a.arrival > self.cfg.wait_threshold]
        rest = [a for a in pending if now - a.arrival <= self.cfg.wait_threshold]
        for act in aged:  # arrival order; privilege overrides the CCT ordering
            self._try_schedule(act, now, forced=True)
        while rest:
            best = None
            best_key = None
            best_schedule = None
            for act in rest:
                try:
                    schedule = self.algo(self.net, act.remaining())
                except SchedulingError:
                    if self.net.total_claims() == 0:
                        raise ConfigError(
                            f"coflow {act.coflow.id} is unschedulable even on "
                            f"an idle network; the configuration cannot run"
                        ) from None
                    continue
                key = (cct(schedule), act.coflow.id)
                if best_key is None or key < best_key:
                    best, best_key, best_schedule = act, key, schedule
            if best is None:
                break  # everyone left is stuck; they wait for the next pass
            self._place(best, best_schedule, now, forced=False)
            rest.remove(best)

    # -- event handlers --

    def _on_arrival(self, now: float, cid: int) -> None:
        cf = self.coflows[cid]
        self.active[cid] = _ActiveCoflow(
            coflow=cf,
            residuals={f.id: f.volume for f in cf.flows},
            last_update=now,
        )
        self._reschedule_pass(now)

    def _on_noise_start(self, now: float) -> None:
        nid = next(self._noise_ids)
        noise = _spawn_noise(self.net, self.rng, now)
        self.noise_active[nid] = noise
        self._push(now + noise.duration, self.NOISE_END, nid)
        self._push_next_noise()

    def _on_noise_end(self, now: float, nid: int) -> None:
        noise = self.noise_active.pop(nid)
        if noise.rate > 0.0:
            release_along(self.net, noise.route, noise.rate)
        # Freed bandwidth is a chance for stuck coflows; scheduled ones are
        # left alone (noise churn does not preempt).
        if any(act.schedule is None for act in self.active.values()):
            self._schedule_waiting(now)

    def _on_flow_done(self, now: float, cid: int, fid: int, gen: int) -> None:
        act = self.active.get(cid)
        if act is None or act.generation != gen or fid in act.done:
            return  # stale event from a superseded schedule
        act.residuals[fid] = 0.0
        act.done.add(fid)
        release_along(self.net, act.schedule.routes[fid], act.schedule.rates[fid])
        if len(act.done) == len(act.coflow.flows):
            del self.active[cid]
            self.completed += 1
            self.trace.outcomes.append(
                CoflowOutcome(
                    coflow_id=cid,
                    arrival=act.arrival,
                    completed=now,
                    first_scheduled=act.first_scheduled,
                    forced=act.forced,
                )
            )
            if self.active:
                # A finished coflow's bandwidth goes back to the others.
                self._reschedule_pass(now)

    # -- main loop --

    def run(self) -> tuple[MetricsRecord, OnlineTrace]:
        if not self.coflows:
            raise ConfigError("no coflows arrive before the cutoff; nothing to run")
        last_t = 0.0
        while self.completed < len(self.coflows):
            if not self.events:
                raise RuntimeError("event queue drained with coflows unfinished")
            now, _, kind, payload = heapq.heappop(self.events)
            if now < last_t - 1e-9:
                raise AssertionError("event time went backwards")
            last_t = now
            self.trace.events += 1
            self._advance(now)
            if kind == self.ARRIVAL:
                self._on_arrival(now, *payload)
            elif kind == self.NOISE_START:
                self._on_noise_start(now)
            elif kind == self.NOISE_END:
                self._on_noise_end(now, *payload)
            else:
                self._on_flow_done(now, *payload)
            if self.validate:
                self._check_conservation()

        ccts = [o.cct for o in self.trace.outcomes]
        record = MetricsRecord(
            seed=self.cfg.seed,
            algo=self.cfg.algorithm,
            k=self.cfg.k,
            n_flows=self.cfg.flows_per_coflow,
            cct_s=float(np.mean(ccts)),
            alloc_gbps=float(
                np.mean([allocated_bandwidth(s) for s in self.placements])
            ),
            avg_hops=float(np.mean([avg_route_length(s) for s in self.placements])),
            runtime_s=float(np.mean(self.trace.pass_times)),
        )
        return record, self.trace


def run_online(
    config: OnlineConfig, validate: bool = False, details: bool = False
):
    """Run the online simulation to completion.

    Returns a MetricsRecord, or (MetricsRecord, OnlineTrace) with
    ``details=True``.  ``validate=True`` checks link conservation at every
    event (slower; meant for tests).
    """
    record, trace = _OnlineSim(config, validate=validate).run()
    if details:
        return record, trace
    return record
