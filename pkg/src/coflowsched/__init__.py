"""Coflow scheduling toolkit: joint routing and bandwidth allocation.

Schedulers for a single coflow (a set of flows that must all finish before a
job can proceed), plus the simulation harnesses used to compare them:

- ``optba``: closed-form optimal rate allocation once routes are fixed.
- ``lpcore``: LP relaxation of the joint routing/allocation problem and a
  self-contained simplex solver.
- ``corba``: relaxation -> widest-path rounding -> local search, and the
  LP-free fast variant.
- ``baselines``: candidate-path schedulers used for comparison.
- ``sim``: seeded offline (one coflow) and online (arrival process)
  experiment engines.
"""

from .coflow import (
    Coflow,
    Flow,
    Schedule,
    allocated_bandwidth,
    avg_route_length,
    cct,
    random_coflow,
)
from .errors import SchedulingError
from .netgraph import (
    Link,
    Network,
    Path,
    allocate_along,
    fat_tree,
    k_max_capacity_paths,
    k_shortest_max_capacity_paths,
    k_shortest_paths,
    max_capacity_path,
    release_along,
    shortest_max_capacity_path,
)
from .optba import RoutingPlan, optba_allocate, optba_lp_oracle, proportional_share

__all__ = [
    "Coflow",
    "Flow",
    "Link",
    "Network",
    "Path",
    "RoutingPlan",
    "Schedule",
    "SchedulingError",
    "allocate_along",
    "allocated_bandwidth",
    "avg_route_length",
    "cct",
    "fat_tree",
    "k_max_capacity_paths",
    "k_shortest_max_capacity_paths",
    "k_shortest_paths",
    "max_capacity_path",
    "optba_allocate",
    "optba_lp_oracle",
    "proportional_share",
    "random_coflow",
    "release_along",
    "shortest_max_capacity_path",
]

__version__ = "0.1.0"
