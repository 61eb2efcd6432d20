"""Directed road-network model and the graph primitives everything else uses.

Nodes are population centers (origins), healthcare facilities (destinations)
or plain intersections (transshipment nodes).  Arcs carry travel times in
minutes; flood-vulnerable arcs additionally carry a mitigation cost and are
unusable unless upgraded.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Mapping

#: absolute tolerance for travel-time / distance comparisons
DIST_TOL = 1e-9


class NetworkError(ValueError):
    """Structural problem in network data."""


class NodeKind(str, Enum):
    ORIGIN = "origin"
    TRANSSHIPMENT = "transshipment"
    DESTINATION = "destination"


@dataclass(frozen=True)
class RoadNode:
    """A network node.

    ``residents`` and ``weight`` are only meaningful on origins; ``capacity``
    only on destinations (infinite means uncapacitated).  Raw file attributes
    (beds, coordinates, pre-selection resident counts) live in ``meta``.
    """

    id: str
    kind: NodeKind = NodeKind.TRANSSHIPMENT
    residents: float = 0.0
    capacity: float = math.inf
    weight: float = 0.0
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise NetworkError("node with empty id")
        if self.residents < 0:
            raise NetworkError(f"node {self.id!r}: negative residents")
        if self.weight < 0:
            raise NetworkError(f"node {self.id!r}: negative weight")
        if self.capacity < 0:
            raise NetworkError(f"node {self.id!r}: negative capacity")
        if self.residents > 0 and self.kind is not NodeKind.ORIGIN:
            raise NetworkError(f"node {self.id!r}: residents on non-origin")
        if self.weight > 0 and self.kind is not NodeKind.ORIGIN:
            raise NetworkError(f"node {self.id!r}: weight on non-origin")
        if math.isfinite(self.capacity) and self.kind is not NodeKind.DESTINATION:
            raise NetworkError(f"node {self.id!r}: finite capacity on non-destination")


@dataclass(frozen=True)
class RoadArc:
    """A directed arc.  ``travel_time`` is in minutes.

    Vulnerable arcs are flooded out unless bought at ``mitigation_cost``
    dollars; non-vulnerable arcs must carry cost 0.  ``segment_id`` groups the
    two directions of a two-way road (defaults to the arc's own id).
    """

    id: str
    tail: str
    head: str
    travel_time: float
    vulnerable: bool = False
    mitigation_cost: float = 0.0
    segment_id: str | None = None
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise NetworkError("arc with empty id")
        if self.travel_time < 0 or not math.isfinite(self.travel_time):
            raise NetworkError(f"arc {self.id!r}: bad travel time {self.travel_time!r}")
        if self.mitigation_cost < 0:
            raise NetworkError(f"arc {self.id!r}: negative mitigation cost")
        if not self.vulnerable and self.mitigation_cost != 0:
            raise NetworkError(f"arc {self.id!r}: cost on non-vulnerable arc")

    @property
    def segment(self) -> str:
        return self.segment_id if self.segment_id is not None else self.id


class Network:
    """Immutable directed multigraph with deterministic (sorted-id) iteration."""

    __slots__ = ("nodes", "arcs", "_out", "_in")

    def __init__(self, nodes: Iterable[RoadNode], arcs: Iterable[RoadArc]):
        self.nodes: dict[str, RoadNode] = {}
        for n in sorted(nodes, key=lambda n: n.id):
            if n.id in self.nodes:
                raise NetworkError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.arcs: dict[str, RoadArc] = {}
        out: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        inc: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for a in sorted(arcs, key=lambda a: a.id):
            if a.id in self.arcs:
                raise NetworkError(f"duplicate arc id {a.id!r}")
            if a.tail not in self.nodes or a.head not in self.nodes:
                raise NetworkError(f"arc {a.id!r}: unknown endpoint")
            self.arcs[a.id] = a
            out[a.tail].append(a.id)
            inc[a.head].append(a.id)
        self._out = {nid: tuple(ids) for nid, ids in out.items()}
        self._in = {nid: tuple(ids) for nid, ids in inc.items()}

    # -- deterministic accessors -------------------------------------------

    def node(self, node_id: str) -> RoadNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NetworkError(f"unknown node {node_id!r}") from None

    def out_arcs(self, node_id: str) -> tuple[str, ...]:
        if node_id not in self._out:
            raise NetworkError(f"unknown node {node_id!r}")
        return self._out[node_id]

    def in_arcs(self, node_id: str) -> tuple[str, ...]:
        if node_id not in self._in:
            raise NetworkError(f"unknown node {node_id!r}")
        return self._in[node_id]

    def origins(self) -> list[RoadNode]:
        return [n for n in self.nodes.values() if n.kind is NodeKind.ORIGIN]

    def destinations(self) -> list[RoadNode]:
        return [n for n in self.nodes.values() if n.kind is NodeKind.DESTINATION]

    def transshipments(self) -> list[RoadNode]:
        return [n for n in self.nodes.values() if n.kind is NodeKind.TRANSSHIPMENT]

    def vulnerable_arcs(self) -> list[RoadArc]:
        return [a for a in self.arcs.values() if a.vulnerable]

    def undirected_neighbors(self, node_id: str) -> set[str]:
        """Distinct neighbors over both arc directions, self excluded."""
        nbrs: set[str] = set()
        for aid in self.out_arcs(node_id):
            nbrs.add(self.arcs[aid].head)
        for aid in self.in_arcs(node_id):
            nbrs.add(self.arcs[aid].tail)
        nbrs.discard(node_id)
        return nbrs

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __repr__(self) -> str:
        return (f"Network({len(self.nodes)} nodes, {len(self.arcs)} arcs, "
                f"{len(self.vulnerable_arcs())} vulnerable)")


# -- arc admissibility ------------------------------------------------------


@dataclass(frozen=True)
class ArcFilter:
    """Which arcs a route may use.

    ``non_vulnerable`` models the flooded network, ``all_arcs`` the fully
    upgraded one, and ``upgraded_set`` a partially mitigated one (the given
    vulnerable arcs are passable, the rest are washed out).
    """

    mode: str
    upgraded: frozenset[str] = frozenset()

    @classmethod
    def non_vulnerable(cls) -> "ArcFilter":
        return cls("non_vulnerable")

    @classmethod
    def all_arcs(cls) -> "ArcFilter":
        return cls("all")

    @classmethod
    def upgraded_set(cls, arc_ids: Iterable[str]) -> "ArcFilter":
        return cls("upgraded", frozenset(arc_ids))

    def admits(self, arc: RoadArc) -> bool:
        if not arc.vulnerable:
            return True
        if self.mode == "all":
            return True
        if self.mode == "upgraded":
            return arc.id in self.upgraded
        return False


NON_VULNERABLE = ArcFilter.non_vulnerable()
ALL_ARCS = ArcFilter.all_arcs()

Admit = Callable[[RoadArc], bool]


def _admit_fn(net: Network, filt: ArcFilter | Admit) -> Admit:
    if callable(filt):
        return filt
    if filt.mode == "upgraded":
        for aid in filt.upgraded:
            arc = net.arcs.get(aid)
            if arc is None:
                raise NetworkError(f"filter names unknown arc {aid!r}")
            if not arc.vulnerable:
                raise NetworkError(f"filter upgrades non-vulnerable arc {aid!r}")
    return filt.admits


# -- shortest paths ---------------------------------------------------------


def shortest_paths(net: Network, source: str,
                   filt: ArcFilter | Admit = ALL_ARCS) -> dict[str, float]:
    """Dijkstra travel times from ``source`` over admitted arcs.

    Returns ``{node_id: minutes}``; unreachable nodes are absent.
    """
    if source not in net:
        raise NetworkError(f"unknown node {source!r}")
    admit = _admit_fn(net, filt)
    dist: dict[str, float] = {source: 0.0}
    done: set[str] = set()
    heap: list[tuple[float, str]] = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for aid in net.out_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            nd = d + arc.travel_time
            if nd < dist.get(arc.head, math.inf) - DIST_TOL:
                dist[arc.head] = nd
                heapq.heappush(heap, (nd, arc.head))
    return dist


def reverse_shortest_paths(net: Network, target: str,
                           filt: ArcFilter | Admit = ALL_ARCS) -> dict[str, float]:
    """Travel times from every node *to* ``target`` over admitted arcs."""
    if target not in net:
        raise NetworkError(f"unknown node {target!r}")
    admit = _admit_fn(net, filt)
    dist: dict[str, float] = {target: 0.0}
    done: set[str] = set()
    heap: list[tuple[float, str]] = [(0.0, target)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for aid in net.in_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            nd = d + arc.travel_time
            if nd < dist.get(arc.tail, math.inf) - DIST_TOL:
                dist[arc.tail] = nd
                heapq.heappush(heap, (nd, arc.tail))
    return dist


def multi_target_distance(net: Network, targets: Iterable[str],
                          filt: ArcFilter | Admit = ALL_ARCS) -> dict[str, float]:
    """Travel time from every node to its nearest member of ``targets``."""
    admit = _admit_fn(net, filt)
    heap: list[tuple[float, str]] = []
    dist: dict[str, float] = {}
    for t in sorted(set(targets)):
        if t not in net:
            raise NetworkError(f"unknown node {t!r}")
        dist[t] = 0.0
        heap.append((0.0, t))
    heapq.heapify(heap)
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for aid in net.in_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            nd = d + arc.travel_time
            if nd < dist.get(arc.tail, math.inf) - DIST_TOL:
                dist[arc.tail] = nd
                heapq.heappush(heap, (nd, arc.tail))
    return dist


def canonical_shortest_path(net: Network, source: str, target: str,
                            filt: ArcFilter | Admit = ALL_ARCS,
                            dist_to_target: dict[str, float] | None = None,
                            ) -> tuple[float, tuple[str, ...]] | None:
    """Deterministic shortest path from ``source`` to ``target``.

    Among equally short paths, returns the lexicographically smallest arc-id
    sequence: walk forward from the source, always taking the smallest-id arc
    that stays on some shortest path.  Returns (minutes, arc ids) or None if
    unreachable.  ``dist_to_target`` lets callers reuse one reverse Dijkstra
    for many sources.
    """
    admit = _admit_fn(net, filt)
    if dist_to_target is None:
        dist_to_target = reverse_shortest_paths(net, target, admit)
    if source not in dist_to_target:
        return None
    total = dist_to_target[source]
    path: list[str] = []
    u = source
    visited = {source}
    while u != target:
        remaining = dist_to_target[u]
        for aid in net.out_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            dv = dist_to_target.get(arc.head)
            if dv is None or arc.head in visited:
                continue
            if abs(arc.travel_time + dv - remaining) <= DIST_TOL:
                path.append(aid)
                u = arc.head
                visited.add(u)
                break
        else:  # pragma: no cover - defensive; unreachable for t >= 0
            raise NetworkError(f"no tight arc out of {u!r} toward {target!r}")
    return total, tuple(path)


# -- connectivity structure -------------------------------------------------


def _undirected_adjacency(net: Network) -> dict[str, list[str]]:
    adj: dict[str, set[str]] = {nid: set() for nid in net.nodes}
    for arc in net.arcs.values():
        if arc.tail != arc.head:
            adj[arc.tail].add(arc.head)
            adj[arc.head].add(arc.tail)
    return {nid: sorted(nbrs) for nid, nbrs in adj.items()}


def articulation_points(net: Network) -> set[str]:
    """Cut nodes of the underlying undirected graph (iterative Tarjan)."""
    adj = _undirected_adjacency(net)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    parent: dict[str, str | None] = {}
    aps: set[str] = set()
    counter = 0
    for root in sorted(net.nodes):
        if root in index:
            continue
        parent[root] = None
        stack: list[tuple[str, Iterator[str]]] = []
        index[root] = low[root] = counter
        counter += 1
        stack.append((root, iter(adj[root])))
        root_children = 0
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if v not in index:
                    parent[v] = u
                    if u == root:
                        root_children += 1
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append((v, iter(adj[v])))
                    advanced = True
                    break
                elif v != parent[u]:
                    low[u] = min(low[u], index[v])
            if not advanced:
                stack.pop()
                if stack:
                    p = stack[-1][0]
                    low[p] = min(low[p], low[u])
                    if p != root and low[u] >= index[p]:
                        aps.add(p)
        if root_children >= 2:
            aps.add(root)
    return aps


@dataclass(frozen=True)
class Component:
    """A connected piece of the network after removing one node.

    ``arcs`` are the induced arcs: both endpoints inside the component.
    """

    nodes: frozenset[str]
    arcs: frozenset[str]

    def min_id(self) -> str:
        return min(self.nodes)


def components_without(net: Network, removed: str) -> list[Component]:
    """Undirected connected components of the network minus one node.

    Components come back sorted by their smallest node id.
    """
    if removed not in net:
        raise NetworkError(f"unknown node {removed!r}")
    adj = _undirected_adjacency(net)
    seen = {removed}
    comps: list[Component] = []
    for start in sorted(net.nodes):
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        members = {start}
        while queue:
            u = queue.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    members.add(v)
                    queue.append(v)
        induced = frozenset(a.id for a in net.arcs.values()
                            if a.tail in members and a.head in members)
        comps.append(Component(frozenset(members), induced))
    comps.sort(key=lambda c: c.min_id())
    return comps


def reachable_destinations(net: Network, origin: str,
                           filt: ArcFilter | Admit = ALL_ARCS) -> set[str]:
    """Destination ids an origin can reach over admitted arcs."""
    node = net.node(origin)
    if node.kind is not NodeKind.ORIGIN:
        raise NetworkError(f"node {origin!r} is not an origin")
    dist = shortest_paths(net, origin, filt)
    return {d.id for d in net.destinations() if d.id in dist}
