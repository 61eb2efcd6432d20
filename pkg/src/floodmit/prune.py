"""Exact network reductions.

Eight techniques shrink an instance without changing its optimal objective:

1. drop articulation-point side components holding no origin/destination
2. drop transshipment nodes with no inflow or no outflow (cascading)
3. fold pendant origins into their single non-vulnerable neighbor,
   crediting the hop's weighted travel time to a constant offset
4. drop a two-neighbor transshipment node whose through-paths are no better
   than the direct triangle arcs
5. keep only the fastest of parallel non-vulnerable arcs
6. drop self-loops
7. contract non-vulnerable two-neighbor transshipment chains
8. drop a clique arc dominated by a two-arc detour; when instead the direct
   arc is strictly faster, record the triple as a route-choice cut

`prune_all` runs them round-robin (6, 5, 2, 1, 3, 4, 7, 8) to a fixpoint and
returns the pruned network plus a replayable log; `expand_solution` lifts a
solution on the pruned network back to the original one.
"""
from __future__ import annotations

import dataclasses
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

from .net import (DIST_TOL, Network, NetworkError, NodeKind, RoadArc, RoadNode,
                  articulation_points)

TECHNIQUE_ORDER = (6, 5, 2, 1, 3, 4, 7, 8)

TECHNIQUE_LABELS = {
    1: "isolated side components",
    2: "dead-end transshipment nodes",
    3: "pendant origin folding",
    4: "bypassed triangle nodes",
    5: "parallel arc dominance",
    6: "self loops",
    7: "through-node contraction",
    8: "dominated clique arcs",
}


@dataclass(frozen=True)
class MergeRecord:
    """A pendant origin folded into its host node (technique 3)."""

    origin_id: str
    host_id: str
    exit_arc_id: str     # origin -> host
    entry_arc_id: str    # host -> origin
    travel_time: float   # of the exit arc
    residents: float
    weight: float
    offset: float        # weight * travel_time


@dataclass(frozen=True)
class ContractionRecord:
    """A chain replaced by one arc (technique 7); chain ids are pre-pruning arcs."""

    new_arc_id: str
    tail: str
    head: str
    travel_time: float
    chain: tuple[str, ...]


@dataclass(frozen=True)
class PruneAction:
    technique: int
    removed_nodes: tuple[str, ...] = ()
    removed_arcs: tuple[str, ...] = ()
    added_arcs: tuple[tuple[str, str, str, float], ...] = ()  # (id, tail, head, t)
    merges: tuple[MergeRecord, ...] = ()
    contractions: tuple[ContractionRecord, ...] = ()


@dataclass
class PruneLog:
    actions: list[PruneAction] = field(default_factory=list)
    objective_offset: float = 0.0
    triangle_vis: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def merge_records(self) -> list[MergeRecord]:
        return [m for act in self.actions for m in act.merges]

    @property
    def contraction_map(self) -> dict[str, tuple[str, ...]]:
        return {c.new_arc_id: c.chain
                for act in self.actions for c in act.contractions}

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective_offset": self.objective_offset,
            "triangle_vis": [list(t) for t in self.triangle_vis],
            "actions": [
                {
                    "technique": a.technique,
                    "removed_nodes": list(a.removed_nodes),
                    "removed_arcs": list(a.removed_arcs),
                    "added_arcs": [list(x) for x in a.added_arcs],
                    "merges": [dataclasses.asdict(m) for m in a.merges],
                    "contractions": [
                        {**dataclasses.asdict(c), "chain": list(c.chain)}
                        for c in a.contractions],
                }
                for a in self.actions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass
class PruneStats:
    """Per-technique elimination accounting (x vars = |origins| * |arcs|, y = |vulnerable|)."""

    original: dict[str, int]
    final: dict[str, int]
    by_technique: dict[int, dict[str, int]]
    rounds: int

    def total(self, key: str) -> int:
        return sum(d[key] for d in self.by_technique.values())

    def rows(self) -> list[dict[str, Any]]:
        rows = []
        for tech in sorted(self.by_technique):
            d = self.by_technique[tech]
            row: dict[str, Any] = {"technique": tech,
                                   "label": TECHNIQUE_LABELS[tech]}
            for key in ("variables", "nodes", "arcs"):
                base = self.original[key]
                row[key] = d[key]
                row[f"{key}_pct"] = (100.0 * d[key] / base) if base else 0.0
            rows.append(row)
        return rows


@dataclass
class PrunedNetwork:
    network: Network
    log: PruneLog
    stats: PruneStats


# -- mutable working graph ----------------------------------------------------


class _Work:
    """Mutable node/arc dicts with incremental adjacency."""

    def __init__(self, net: Network):
        self.nodes: dict[str, RoadNode] = dict(net.nodes)
        self.arcs: dict[str, RoadArc] = dict(net.arcs)
        self.out: dict[str, set[str]] = {nid: set() for nid in self.nodes}
        self.inn: dict[str, set[str]] = {nid: set() for nid in self.nodes}
        for a in self.arcs.values():
            self.out[a.tail].add(a.id)
            self.inn[a.head].add(a.id)

    def to_network(self) -> Network:
        return Network(self.nodes.values(), self.arcs.values())

    def remove_arc(self, aid: str) -> None:
        a = self.arcs.pop(aid)
        self.out[a.tail].discard(aid)
        self.inn[a.head].discard(aid)

    def remove_node(self, nid: str) -> list[str]:
        """Remove a node and all incident arcs; returns removed arc ids sorted."""
        incident = sorted(self.out[nid] | self.inn[nid])
        for aid in incident:
            self.remove_arc(aid)
        del self.nodes[nid]
        del self.out[nid]
        del self.inn[nid]
        return incident

    def add_arc(self, arc: RoadArc) -> None:
        if arc.id in self.arcs:
            raise NetworkError(f"arc id collision {arc.id!r}")
        self.arcs[arc.id] = arc
        self.out[arc.tail].add(arc.id)
        self.inn[arc.head].add(arc.id)

    def set_node(self, node: RoadNode) -> None:
        self.nodes[node.id] = node

    def neighbors(self, nid: str) -> set[str]:
        nbrs = {self.arcs[a].head for a in self.out[nid]}
        nbrs |= {self.arcs[a].tail for a in self.inn[nid]}
        nbrs.discard(nid)
        return nbrs

    def undirected_adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {nid: set() for nid in self.nodes}
        for a in self.arcs.values():
            if a.tail != a.head:
                adj[a.tail].add(a.head)
                adj[a.head].add(a.tail)
        return adj

    def counts(self) -> dict[str, int]:
        n_origins = sum(1 for n in self.nodes.values()
                        if n.kind is NodeKind.ORIGIN)
        n_vuln = sum(1 for a in self.arcs.values() if a.vulnerable)
        return {
            "nodes": len(self.nodes),
            "arcs": len(self.arcs),
            "variables": n_origins * len(self.arcs) + n_vuln,
        }


def _min_arc(work: _Work, ids: Iterable[str], tail: str, head: str,
             ) -> RoadArc | None:
    """Cheapest non-vulnerable arc tail->head among ids ((t, id) order)."""
    best: RoadArc | None = None
    for aid in sorted(ids):
        a = work.arcs[aid]
        if a.vulnerable or a.tail != tail or a.head != head:
            continue
        if best is None or (a.travel_time, a.id) < (best.travel_time, best.id):
            best = a
    return best


# -- individual techniques ----------------------------------------------------


def _t6_self_loops(work: _Work) -> list[PruneAction]:
    loops = sorted(aid for aid, a in work.arcs.items() if a.tail == a.head)
    for aid in loops:
        work.remove_arc(aid)
    return [PruneAction(6, removed_arcs=tuple(loops))] if loops else []


def _t5_parallel(work: _Work) -> list[PruneAction]:
    groups: dict[tuple[str, str], list[RoadArc]] = {}
    for a in work.arcs.values():
        if not a.vulnerable and a.tail != a.head:
            groups.setdefault((a.tail, a.head), []).append(a)
    removed: list[str] = []
    for key in sorted(groups):
        group = groups[key]
        if len(group) < 2:
            continue
        group.sort(key=lambda a: (a.travel_time, a.id))
        for a in group[1:]:
            work.remove_arc(a.id)
            removed.append(a.id)
    return [PruneAction(5, removed_arcs=tuple(sorted(removed)))] if removed else []


def _t2_dead_transshipment(work: _Work) -> list[PruneAction]:
    def dead(nid: str) -> bool:
        return (work.nodes[nid].kind is NodeKind.TRANSSHIPMENT
                and (not work.inn[nid] or not work.out[nid]))

    heap = sorted(nid for nid in work.nodes if dead(nid))
    heapq.heapify(heap)
    removed_nodes: list[str] = []
    removed_arcs: list[str] = []
    enqueued = set(heap)
    while heap:
        nid = heapq.heappop(heap)
        if nid not in work.nodes or not dead(nid):
            continue
        nbrs = work.neighbors(nid)
        removed_arcs.extend(work.remove_node(nid))
        removed_nodes.append(nid)
        for nbr in sorted(nbrs):
            if nbr in work.nodes and nbr not in enqueued and dead(nbr):
                heapq.heappush(heap, nbr)
                enqueued.add(nbr)
    if not removed_nodes:
        return []
    return [PruneAction(2, removed_nodes=tuple(removed_nodes),
                        removed_arcs=tuple(sorted(removed_arcs)))]


def _components_without(work: _Work, removed: str) -> list[set[str]]:
    adj = work.undirected_adjacency()
    seen = {removed}
    comps: list[set[str]] = []
    for start in sorted(work.nodes):
        if start in seen:
            continue
        stack, members = [start], {start}
        seen.add(start)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    members.add(v)
                    stack.append(v)
        comps.append(members)
    comps.sort(key=min)
    return comps


def _t1_side_components(work: _Work) -> list[PruneAction]:
    actions: list[PruneAction] = []
    aps = sorted(articulation_points(work.to_network()))
    for ap in aps:
        if ap not in work.nodes:
            continue
        for comp in _components_without(work, ap):
            if any(work.nodes[n].kind is not NodeKind.TRANSSHIPMENT
                   for n in comp):
                continue
            removed_arcs: list[str] = []
            removed_nodes = sorted(comp)
            for nid in removed_nodes:
                removed_arcs.extend(work.remove_node(nid))
            actions.append(PruneAction(1, removed_nodes=tuple(removed_nodes),
                                       removed_arcs=tuple(sorted(removed_arcs))))
    return actions


def _t3_pendant_origins(work: _Work) -> list[PruneAction]:
    actions: list[PruneAction] = []
    for oid in sorted(work.nodes):
        node = work.nodes.get(oid)
        if node is None or node.kind is not NodeKind.ORIGIN:
            continue
        if len(work.out[oid]) != 1 or len(work.inn[oid]) != 1:
            continue
        exit_arc = work.arcs[next(iter(work.out[oid]))]
        entry_arc = work.arcs[next(iter(work.inn[oid]))]
        if exit_arc.vulnerable or entry_arc.vulnerable:
            continue
        host_id = exit_arc.head
        if entry_arc.tail != host_id or host_id == oid:
            continue
        host = work.nodes[host_id]
        if host.kind is not NodeKind.TRANSSHIPMENT:
            continue
        rec = MergeRecord(
            origin_id=oid, host_id=host_id,
            exit_arc_id=exit_arc.id, entry_arc_id=entry_arc.id,
            travel_time=exit_arc.travel_time,
            residents=node.residents, weight=node.weight,
            offset=node.weight * exit_arc.travel_time)
        removed = work.remove_node(oid)
        work.set_node(dataclasses.replace(
            host, kind=NodeKind.ORIGIN,
            residents=host.residents + node.residents,
            weight=host.weight + node.weight))
        actions.append(PruneAction(3, removed_nodes=(oid,),
                                   removed_arcs=tuple(sorted(removed)),
                                   merges=(rec,)))
    return actions


def _t4_bypassed_triangles(work: _Work) -> list[PruneAction]:
    actions: list[PruneAction] = []
    for nid in sorted(work.nodes):
        node = work.nodes.get(nid)
        if node is None or node.kind is not NodeKind.TRANSSHIPMENT:
            continue
        incident = work.out[nid] | work.inn[nid]
        if any(work.arcs[a].vulnerable for a in incident):
            continue
        nbrs = work.neighbors(nid)
        if len(nbrs) != 2:
            continue
        j, k = sorted(nbrs)
        through = 0
        ok = True
        for x, y in ((j, k), (k, j)):
            arc_in = _min_arc(work, work.inn[nid], x, nid)
            arc_out = _min_arc(work, work.out[nid], nid, y)
            if arc_in is None or arc_out is None:
                continue
            through += 1
            direct = _min_arc(work, work.out[x], x, y)
            if direct is None or (arc_in.travel_time + arc_out.travel_time
                                  < direct.travel_time - DIST_TOL):
                ok = False
                break
        if not ok or through == 0:
            continue
        removed = work.remove_node(nid)
        actions.append(PruneAction(4, removed_nodes=(nid,),
                                   removed_arcs=tuple(sorted(removed))))
    return actions


def _t7_contract(work: _Work, chain_map: dict[str, tuple[str, ...]],
                 ) -> list[PruneAction]:
    actions: list[PruneAction] = []
    for nid in sorted(work.nodes):
        node = work.nodes.get(nid)
        if node is None or node.kind is not NodeKind.TRANSSHIPMENT:
            continue
        incident = work.out[nid] | work.inn[nid]
        if not incident or any(work.arcs[a].vulnerable for a in incident):
            continue
        nbrs = work.neighbors(nid)
        if len(nbrs) == 1:  # cul-de-sac middle: i = k, nothing to bridge
            removed = work.remove_node(nid)
            actions.append(PruneAction(7, removed_nodes=(nid,),
                                       removed_arcs=tuple(sorted(removed))))
            continue
        if len(nbrs) != 2:
            continue
        i, k = sorted(nbrs)
        new_arcs: list[RoadArc] = []
        contractions: list[ContractionRecord] = []
        for x, y in ((i, k), (k, i)):
            arc_in = _min_arc(work, work.inn[nid], x, nid)
            arc_out = _min_arc(work, work.out[nid], nid, y)
            if arc_in is None or arc_out is None:
                continue
            chain = (chain_map.get(arc_in.id, (arc_in.id,))
                     + chain_map.get(arc_out.id, (arc_out.id,)))
            new_id = f"__c_{x}__{nid}__{y}"
            t = arc_in.travel_time + arc_out.travel_time
            new_arcs.append(RoadArc(new_id, x, y, t, meta={"contracted": True}))
            contractions.append(ContractionRecord(new_id, x, y, t, chain))
        if not new_arcs:
            continue
        removed = work.remove_node(nid)
        for arc in new_arcs:
            work.add_arc(arc)
            chain_map[arc.id] = contractions[new_arcs.index(arc)].chain
        actions.append(PruneAction(
            7, removed_nodes=(nid,), removed_arcs=tuple(sorted(removed)),
            added_arcs=tuple((a.id, a.tail, a.head, a.travel_time)
                             for a in new_arcs),
            contractions=tuple(contractions)))
    return actions


def _t8_clique_dominance(work: _Work) -> list[PruneAction]:
    removed: list[str] = []
    for j in sorted(work.nodes):
        for in_id in sorted(work.inn[j]):
            a1 = work.arcs.get(in_id)
            if a1 is None or a1.vulnerable or a1.tail == j:
                continue
            i = a1.tail
            for out_id in sorted(work.out[j]):
                a2 = work.arcs.get(out_id)
                if a2 is None or a2.vulnerable or a2.head in (j, i):
                    continue
                h = a2.head
                detour = a1.travel_time + a2.travel_time
                for did in sorted(work.out[i]):
                    d = work.arcs.get(did)
                    if (d is None or d.vulnerable or d.head != h
                            or d.travel_time < detour - DIST_TOL):
                        continue
                    work.remove_arc(did)
                    removed.append(did)
    if not removed:
        return []
    return [PruneAction(8, removed_arcs=tuple(sorted(removed)))]


def harvest_triangle_vis(net: Network) -> list[tuple[str, str, str]]:
    """Clique triples where the direct arc is strictly faster than the detour.

    In any optimal routing, a single origin uses at most one of the three arcs
    (arc i->j, arc i->h, arc j->h); the solver may add that as a cut.
    """
    vis: set[tuple[str, str, str]] = set()
    for j in sorted(net.nodes):
        for in_id in net.in_arcs(j):
            a1 = net.arcs[in_id]
            if a1.vulnerable or a1.tail == j:
                continue
            i = a1.tail
            for out_id in net.out_arcs(j):
                a2 = net.arcs[out_id]
                if a2.vulnerable or a2.head in (j, i):
                    continue
                h = a2.head
                detour = a1.travel_time + a2.travel_time
                for did in net.out_arcs(i):
                    d = net.arcs[did]
                    if d.vulnerable or d.head != h:
                        continue
                    if d.travel_time < detour - DIST_TOL:
                        vis.add((a1.id, d.id, a2.id))
    return sorted(vis)


_TECHNIQUES = {
    1: _t1_side_components,
    2: _t2_dead_transshipment,
    3: _t3_pendant_origins,
    4: _t4_bypassed_triangles,
    5: _t5_parallel,
    6: _t6_self_loops,
    8: _t8_clique_dominance,
}


def _run_technique(tech: int, work: _Work,
                   chain_map: dict[str, tuple[str, ...]]) -> list[PruneAction]:
    if tech == 7:
        return _t7_contract(work, chain_map)
    return _TECHNIQUES[tech](work)


def _single(net: Network, tech: int) -> tuple[Network, list[PruneAction]]:
    work = _Work(net)
    actions = _run_technique(tech, work, {})
    return work.to_network(), actions


def technique1(net: Network) -> tuple[Network, list[PruneAction]]:
    """Drop articulation side components without origins or destinations."""
    return _single(net, 1)


def technique2(net: Network) -> tuple[Network, list[PruneAction]]:
    """Drop transshipment nodes lacking inflow or outflow (cascades)."""
    return _single(net, 2)


def technique3(net: Network) -> tuple[Network, list[PruneAction]]:
    """Fold pendant origins into their only neighbor, crediting the hop."""
    return _single(net, 3)


def technique4(net: Network) -> tuple[Network, list[PruneAction]]:
    """Drop triangle middles whose through-paths never beat the direct arcs."""
    return _single(net, 4)


def technique5(net: Network) -> tuple[Network, list[PruneAction]]:
    """Keep only the fastest arc of each parallel non-vulnerable bundle."""
    return _single(net, 5)


def technique6(net: Network) -> tuple[Network, list[PruneAction]]:
    """Remove self-loops."""
    return _single(net, 6)


def technique7(net: Network) -> tuple[Network, list[PruneAction]]:
    """Contract two-neighbor non-vulnerable transshipment middles."""
    return _single(net, 7)


def technique8(net: Network) -> tuple[Network, list[PruneAction]]:
    """Remove clique arcs dominated by a two-arc detour."""
    return _single(net, 8)


def prune_all(net: Network) -> PrunedNetwork:
    """Round-robin all techniques to a fixpoint; returns net', log and stats."""
    work = _Work(net)
    log = PruneLog()
    chain_map: dict[str, tuple[str, ...]] = {}
    original = work.counts()
    by_tech = {t: {"variables": 0, "nodes": 0, "arcs": 0}
               for t in TECHNIQUE_ORDER}
    rounds = 0
    while True:
        rounds += 1
        changed = False
        for tech in TECHNIQUE_ORDER:
            before = work.counts()
            actions = _run_technique(tech, work, chain_map)
            if not actions:
                continue
            changed = True
            after = work.counts()
            for key in by_tech[tech]:
                by_tech[tech][key] += before[key] - after[key]
            log.actions.extend(actions)
            for act in actions:
                for m in act.merges:
                    log.objective_offset += m.offset
        if not changed:
            break
    pruned = work.to_network()
    log.triangle_vis = harvest_triangle_vis(pruned)
    stats = PruneStats(original=original, final=work.counts(),
                       by_technique=by_tech, rounds=rounds)
    return PrunedNetwork(network=pruned, log=log, stats=stats)


def replay_log(net: Network, log: PruneLog) -> Network:
    """Re-apply a prune log to its original network (testing hook)."""
    work = _Work(net)
    for act in log.actions:
        for aid in act.removed_arcs:
            if aid in work.arcs:  # node removal below also drops incident arcs
                work.remove_arc(aid)
        for nid in act.removed_nodes:
            work.remove_node(nid)
        for aid, tail, head, t in act.added_arcs:
            work.add_arc(RoadArc(aid, tail, head, t, meta={"contracted": True}))
        for m in act.merges:
            host = work.nodes[m.host_id]
            work.set_node(dataclasses.replace(
                host, kind=NodeKind.ORIGIN,
                residents=host.residents + m.residents,
                weight=host.weight + m.weight))
    return work.to_network()


# -- lifting solutions back ---------------------------------------------------


def expand_path(path: Iterable[str], contraction_map: dict[str, tuple[str, ...]],
                ) -> tuple[str, ...]:
    out: list[str] = []
    for aid in path:
        out.extend(contraction_map.get(aid, (aid,)))
    return tuple(out)


def expand_solution(solution, log: PruneLog):
    """Lift a solver solution on the pruned network to the original network.

    Contracted arcs re-expand to their chains, folded origins re-appear with
    their pendant hop prepended, and the folded-away weighted travel time
    rejoins the objective (and bound).
    """
    records = log.merge_records
    cmap = log.contraction_map
    assignment = dict(solution.assignment)
    paths = {k: list(v) for k, v in solution.paths.items()}
    if assignment:  # unsolved results carry no routes to lift
        for rec in reversed(records):
            if rec.host_id not in assignment:
                raise ValueError(
                    f"prune log and solution disagree: merge host "
                    f"{rec.host_id!r} has no assignment")
            assignment[rec.origin_id] = assignment[rec.host_id]
            paths[rec.origin_id] = [rec.exit_arc_id] + paths[rec.host_id]
        hosts = {rec.host_id for rec in records}
        for host in hosts:
            assignment.pop(host, None)
            paths.pop(host, None)
    expanded_paths = {k: expand_path(v, cmap) for k, v in paths.items()}
    objective = solution.objective
    if objective is not None:
        objective += log.objective_offset
    bound = solution.best_bound
    if bound is not None and math.isfinite(bound):
        bound += log.objective_offset
    return dataclasses.replace(
        solution, assignment=assignment, paths=expanded_paths,
        objective=objective, best_bound=bound)
