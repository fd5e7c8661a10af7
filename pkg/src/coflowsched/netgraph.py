"""Capacitated network graphs, FatTree topology generation, and path finding.

The graph model is deliberately fluid-level: a link is a capacity plus the
bandwidth currently available on it, nothing more (no queues, no packets).
Every physical link is stored once, in a canonical orientation; traffic may
traverse it in either direction and shares the same available bandwidth.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

HOST = "host"
TOR = "tor"
AGGREGATION = "aggregation"
CORE = "core"

#: Absolute tolerance (Gb/s) for all bandwidth feasibility comparisons.
RATE_TOL = 1e-9

WidthSpec = Union[None, Sequence[float], np.ndarray, Callable[["Link"], float]]


class CapacityError(ValueError):
    """Raised when an allocation would exceed a link's available bandwidth."""


@dataclass(frozen=True)
class Link:
    """One physical link in canonical orientation (u, v)."""

    u: int
    v: int
    capacity: float

    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class Path:
    """A simple path: ordered node ids plus the link ids joining them."""

    nodes: tuple[int, ...]
    links: tuple[int, ...]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def src(self) -> int:
        return self.nodes[0]

    @property
    def dst(self) -> int:
        return self.nodes[-1]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError(f"path revisits a node: {self.nodes}")
        if len(self.links) != len(self.nodes) - 1:
            raise ValueError("link list inconsistent with node list")


class Network:
    """Undirected capacitated graph with mutable available-bandwidth state.

    Available bandwidth is tracked as the link capacity minus the exact sum
    (math.fsum) of all active claims on the link.  Claims are added by
    :func:`allocate_along` and removed by :func:`release_along`; because the
    sum is order-independent and correctly rounded, an allocate/release pair
    restores the previous availability bit for bit.

    Mutation is single-writer: concurrent readers must work on a `copy()`.
    """

    def __init__(self, roles: Sequence[str], links: Iterable[Link]):
        self.roles: tuple[str, ...] = tuple(roles)
        self.links: tuple[Link, ...] = tuple(links)
        n = len(self.roles)
        self._adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self._link_index: dict[tuple[int, int], int] = {}
        for lid, lk in enumerate(self.links):
            if lk.u == lk.v:
                raise ValueError(f"self-loop on node {lk.u}")
            if not (0 <= lk.u < n and 0 <= lk.v < n):
                raise ValueError(f"link {lk} references unknown node")
            if (lk.u, lk.v) in self._link_index or (lk.v, lk.u) in self._link_index:
                raise ValueError(f"parallel link between {lk.u} and {lk.v}")
            if lk.capacity <= 0:
                raise ValueError(f"nonpositive capacity on link {lk.u}-{lk.v}")
            self._link_index[(lk.u, lk.v)] = lid
            self._link_index[(lk.v, lk.u)] = lid
            self._adj[lk.u].append((lk.v, lid))
            self._adj[lk.v].append((lk.u, lid))
        for nbrs in self._adj:
            nbrs.sort()
        self._claims: list[list[float]] = [[] for _ in self.links]
        self._capacity = np.array([lk.capacity for lk in self.links], dtype=np.float64)
        self._avail = self._capacity.copy()

    # -- basic queries ------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.roles)

    @property
    def hosts(self) -> list[int]:
        return [i for i, r in enumerate(self.roles) if r == HOST]

    def neighbors(self, u: int) -> list[tuple[int, int]]:
        """(neighbor, link id) pairs of ``u``, ascending by neighbor id."""
        return self._adj[u]

    def link_id(self, u: int, v: int) -> int:
        return self._link_index[(u, v)]

    def capacity_of(self, lid: int) -> float:
        return float(self._capacity[lid])

    def available_of(self, lid: int) -> float:
        return float(self._avail[lid])

    @property
    def available(self) -> np.ndarray:
        """Live per-link availability array; treat as read-only."""
        return self._avail

    def path_between(self, nodes: Sequence[int]) -> Path:
        """Build a Path from a node sequence, validating adjacency."""
        nodes = tuple(nodes)
        links = tuple(self.link_id(a, b) for a, b in zip(nodes, nodes[1:]))
        return Path(nodes, links)

    def bottleneck(self, path: Path, widths: Optional[np.ndarray] = None) -> float:
        arr = self._avail if widths is None else widths
        return float(min(arr[lid] for lid in path.links))

    # -- mutation -----------------------------------------------------------

    def _set_avail(self, lid: int) -> None:
        self._avail[lid] = self._capacity[lid] - math.fsum(self._claims[lid])

    def claim(self, lid: int, rate: float) -> None:
        self._claims[lid].append(rate)
        self._set_avail(lid)

    def unclaim(self, lid: int, rate: float) -> None:
        try:
            self._claims[lid].remove(rate)
        except ValueError:
            raise CapacityError(
                f"no active claim of {rate} Gb/s on link {lid} to release"
            ) from None
        self._set_avail(lid)

    def copy(self) -> "Network":
        dup = Network.__new__(Network)
        dup.roles = self.roles
        dup.links = self.links
        dup._adj = self._adj
        dup._link_index = self._link_index
        dup._capacity = self._capacity
        dup._claims = [list(c) for c in self._claims]
        dup._avail = self._avail.copy()
        return dup

    def total_claims(self) -> int:
        """Number of active bandwidth claims across all links."""
        return sum(len(c) for c in self._claims)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": i, "role": r} for i, r in enumerate(self.roles)],
            "links": [
                {
                    "u": lk.u,
                    "v": lk.v,
                    "capacity": lk.capacity,
                    "available": float(self._avail[lid]),
                }
                for lid, lk in enumerate(self.links)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Network":
        nodes = sorted(data["nodes"], key=lambda d: d["id"])
        if [d["id"] for d in nodes] != list(range(len(nodes))):
            raise ValueError("node ids must be dense 0..n-1")
        roles = [d["role"] for d in nodes]
        links = [Link(d["u"], d["v"], d["capacity"]) for d in data["links"]]
        net = cls(roles, links)
        for lid, d in enumerate(data["links"]):
            used = d["capacity"] - d["available"]
            if used < -RATE_TOL or d["available"] < -RATE_TOL:
                raise ValueError(f"link {lid}: available outside [0, capacity]")
            if used > 0:
                net.claim(lid, used)
        return net


def fat_tree(k: int, alpha_over: int = 1, link_capacity: float = 10.0) -> Network:
    """Build a k-pod FatTree whose racks hold ``alpha_over * k/2`` hosts each.

    Layout: k pods, each with k/2 ToR and k/2 aggregation switches; (k/2)^2
    core switches, where core c attaches to aggregation switch c // (k/2) of
    every pod.  Multiplying rack size by ``alpha_over`` raises the
    oversubscription ratio without touching the switch fabric.  Node ids are
    dense: hosts first, then ToR, aggregation, core.
    """
    if k < 2 or k % 2 != 0:
        raise ValueError(f"k must be even and >= 2, got {k}")
    if alpha_over < 1:
        raise ValueError(f"alpha_over must be >= 1, got {alpha_over}")
    if link_capacity <= 0:
        raise ValueError("link_capacity must be positive")

    half = k // 2
    hosts_per_tor = alpha_over * half
    n_tor = k * half
    n_agg = k * half
    n_core = half * half
    n_host = n_tor * hosts_per_tor

    host0, tor0, agg0, core0 = 0, n_host, n_host + n_tor, n_host + n_tor + n_agg
    roles = [HOST] * n_host + [TOR] * n_tor + [AGGREGATION] * n_agg + [CORE] * n_core

    links: list[Link] = []
    for t in range(n_tor):
        for h in range(hosts_per_tor):
            links.append(Link(host0 + t * hosts_per_tor + h, tor0 + t, link_capacity))
    for pod in range(k):
        for t in range(half):
            for a in range(half):
                links.append(
                    Link(tor0 + pod * half + t, agg0 + pod * half + a, link_capacity)
                )
    for c in range(n_core):
        a = c // half
        for pod in range(k):
            links.append(Link(agg0 + pod * half + a, core0 + c, link_capacity))
    return Network(roles, links)


# -- path search ------------------------------------------------------------


def _width_array(net: Network, width: WidthSpec) -> np.ndarray:
    if width is None:
        return net._avail
    if callable(width):
        return np.array([width(lk) for lk in net.links], dtype=np.float64)
    arr = np.asarray(width, dtype=np.float64)
    if arr.shape != (len(net.links),):
        raise ValueError("width vector length must equal the number of links")
    return arr


def _max_bottleneck(
    net: Network,
    src: int,
    dst: int,
    widths: np.ndarray,
    banned_links: frozenset[int] = frozenset(),
    banned_nodes: frozenset[int] = frozenset(),
) -> float:
    """Maximum over paths of the minimum link width (0.0 if disconnected)."""
    best = np.zeros(net.node_count)
    best[src] = math.inf
    heap = [(-math.inf, src)]
    while heap:
        negw, u = heapq.heappop(heap)
        w = -negw
        if w < best[u]:
            continue
        if u == dst:
            return w
        for v, lid in net._adj[u]:
            if lid in banned_links or v in banned_nodes:
                continue
            cand = min(w, widths[lid])
            if cand > best[v] and cand > 0.0:
                best[v] = cand
                heapq.heappush(heap, (-cand, v))
    return 0.0


def _lex_min_hop_path(
    net: Network,
    src: int,
    dst: int,
    allowed: Callable[[int], bool],
    banned_nodes: frozenset[int] = frozenset(),
) -> Optional[Path]:
    """Fewest-hop path over links passing ``allowed``, lexicographically
    smallest node sequence among ties."""
    INF = -1
    dist = [INF] * net.node_count
    dist[dst] = 0
    dq = deque([dst])
    while dq:
        u = dq.popleft()
        for v, lid in net._adj[u]:
            if dist[v] == INF and allowed(lid) and v not in banned_nodes:
                dist[v] = dist[u] + 1
                dq.append(v)
    if dist[src] == INF:
        return None
    nodes = [src]
    cur = src
    while cur != dst:
        for v, lid in net._adj[cur]:  # ascending neighbor id => lex-min walk
            if dist[v] == dist[cur] - 1 and allowed(lid) and v not in banned_nodes:
                nodes.append(v)
                cur = v
                break
        else:  # pragma: no cover - dist guarantees a successor exists
            raise AssertionError("broken BFS walk")
    return net.path_between(nodes)


def max_capacity_path(
    net: Network,
    src: int,
    dst: int,
    width: WidthSpec = None,
    _banned_links: frozenset[int] = frozenset(),
    _banned_nodes: frozenset[int] = frozenset(),
) -> Optional[Path]:
    """Widest path from src to dst: maximize the minimum link width.

    Ties are broken by fewer hops, then by lexicographically smallest node
    sequence, so the result is deterministic.  ``width`` defaults to the
    current available bandwidth; links with width <= 0 are impassable.
    Returns None when src and dst are disconnected under positive widths.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    widths = _width_array(net, width)
    wstar = _max_bottleneck(net, src, dst, widths, _banned_links, _banned_nodes)
    if wstar <= 0.0:
        return None
    return _lex_min_hop_path(
        net,
        src,
        dst,
        lambda lid: widths[lid] >= wstar and lid not in _banned_links,
        _banned_nodes,
    )


def shortest_max_capacity_path(net: Network, src: int, dst: int) -> Optional[Path]:
    """Fewest-hop path among those of maximum available bandwidth."""
    return max_capacity_path(net, src, dst, width=None)


def shortest_path(
    net: Network,
    src: int,
    dst: int,
    _banned_links: frozenset[int] = frozenset(),
    _banned_nodes: frozenset[int] = frozenset(),
) -> Optional[Path]:
    """Fewest-hop path regardless of bandwidth, lex-min among ties."""
    if src == dst:
        raise ValueError("src and dst must differ")
    return _lex_min_hop_path(
        net, src, dst, lambda lid: lid not in _banned_links, _banned_nodes
    )


def random_shortest_path(
    net: Network, src: int, dst: int, rng: np.random.Generator
) -> Optional[Path]:
    """A fewest-hop path chosen at random (uniform successor at each step)."""
    if src == dst:
        raise ValueError("src and dst must differ")
    INF = -1
    dist = [INF] * net.node_count
    dist[dst] = 0
    dq = deque([dst])
    while dq:
        u = dq.popleft()
        for v, _ in net._adj[u]:
            if dist[v] == INF:
                dist[v] = dist[u] + 1
                dq.append(v)
    if dist[src] == INF:
        return None
    nodes = [src]
    cur = src
    while cur != dst:
        options = [v for v, _ in net._adj[cur] if dist[v] == dist[cur] - 1]
        cur = options[rng.integers(len(options))]
        nodes.append(cur)
    return net.path_between(nodes)


def _yen(
    net: Network,
    src: int,
    dst: int,
    K: int,
    solver: Callable[[int, frozenset[int], frozenset[int]], Optional[Path]],
    sort_key: Callable[[Path], tuple],
) -> list[Path]:
    """Yen's deviation scheme generalized to any optimal-path subroutine.

    ``solver(spur, banned_links, banned_nodes)`` must return the best
    spur->dst path under the same ordering the final list is sorted by.
    """
    if K < 1:
        return []
    first = solver(src, frozenset(), frozenset())
    if first is None:
        return []
    accepted = [first]
    seen = {first.nodes}
    pool: list[Path] = []
    while len(accepted) < K:
        base = accepted[-1]
        for i in range(len(base.nodes) - 1):
            root = base.nodes[: i + 1]
            banned_links = set()
            for p in accepted:
                if p.nodes[: i + 1] == root and len(p.nodes) > i + 1:
                    banned_links.add(p.links[i])
            banned_nodes = frozenset(root[:-1])
            spur = solver(root[-1], frozenset(banned_links), banned_nodes)
            if spur is None:
                continue
            nodes = root[:-1] + spur.nodes
            if len(set(nodes)) != len(nodes) or nodes in seen:
                continue
            seen.add(nodes)
            pool.append(net.path_between(nodes))
        if not pool:
            break
        pool.sort(key=sort_key)
        accepted.append(pool.pop(0))
    accepted.sort(key=sort_key)
    return accepted


def k_shortest_paths(net: Network, src: int, dst: int, K: int) -> list[Path]:
    """Up to K loopless paths in nondecreasing hop count (Yen enumeration)."""

    def solver(s, banned_links, banned_nodes):
        if s == dst:
            return None
        return _lex_min_hop_path(
            net, s, dst, lambda lid: lid not in banned_links, banned_nodes
        )

    return _yen(net, src, dst, K, solver, lambda p: (p.hops, p.nodes))


def _k_widest(net: Network, src: int, dst: int, K: int, width: WidthSpec) -> list[Path]:
    widths = _width_array(net, width)

    def solver(s, banned_links, banned_nodes):
        if s == dst:
            return None
        return max_capacity_path(net, s, dst, widths, banned_links, banned_nodes)

    def key(p: Path) -> tuple:
        return (-net.bottleneck(p, widths), p.hops, p.nodes)

    return _yen(net, src, dst, K, solver, key)


def k_max_capacity_paths(
    net: Network, src: int, dst: int, K: int, width: WidthSpec = None
) -> list[Path]:
    """Up to K loopless paths in nonincreasing bottleneck-width order."""
    return _k_widest(net, src, dst, K, width)


def k_shortest_max_capacity_paths(
    net: Network, src: int, dst: int, K: int, width: WidthSpec = None
) -> list[Path]:
    """Up to K loopless paths ordered by (bottleneck width desc, hops asc)."""
    return _k_widest(net, src, dst, K, width)


# -- bandwidth bookkeeping ---------------------------------------------------


def allocate_along(net: Network, path: Path, rate: float) -> None:
    """Claim ``rate`` Gb/s on every link of ``path``.

    Rejects (leaving the network untouched) if any link lacks the bandwidth,
    within RATE_TOL.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    for lid in path.links:
        if rate > net._avail[lid] + RATE_TOL:
            raise CapacityError(
                f"link {lid} ({net.links[lid].u}-{net.links[lid].v}): "
                f"requested {rate} Gb/s, only {net._avail[lid]} available"
            )
    for lid in path.links:
        net.claim(lid, rate)


def release_along(net: Network, path: Path, rate: float) -> None:
    """Return a claim previously made with the same path and rate."""
    for lid in path.links:
        net.unclaim(lid, rate)
