"""Exact optimization: which vulnerable roads to upgrade, and who goes where.

The solver enumerates upgrade decisions in a best-first branch-and-bound:

* branch on purchase units (one vulnerable arc, or one two-way segment when
  segment costs are coupled), picking at each node the unit that carries the
  most resident weight on the relaxed shortest paths;
* bound a node by solving the capacitated assignment exactly under relaxed
  distances — every undecided unit that still fits the remaining budget is
  treated as purchased — so the bound stays tight when capacities bind;
* probe for incumbents by solving the same assignment over the arcs
  committed so far (depth-first with suffix lower bounds).

`brute_force_oracle` independently enumerates every affordable upgrade set
and every capacity-feasible assignment — slower, but nothing to get wrong —
and is what the solver is tested against.  `build_model`/`export_lp` emit the
equivalent 0-1 program for external solvers, and `gap_to_rnfmp` embeds a
generalized assignment problem as a zero-budget instance.
"""
from __future__ import annotations

import dataclasses
import heapq
import itertools
import json
import math
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .ingest import (InstanceSpec, ProblemInstance, PurchaseUnit,
                     capacity_fits, cents, purchase_units, upgrade_cost_cents)
from .net import (ALL_ARCS, DIST_TOL, Network, NodeKind, RoadArc, RoadNode,
                  canonical_shortest_path, reverse_shortest_paths)
from .reductions import Cuts, FixedUpgrades, VariableMask


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    BUDGET_DISCONNECTED = "BudgetDisconnected"
    TIME_LIMIT = "TimeLimit"


#: statuses that carry a usable plan
SOLVED = (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)


class ModelError(ValueError):
    """Contradictory masks/fixings or malformed model input."""


class OracleScaleError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SolveOptions:
    time_limit_s: float = 300.0
    gap_tol: float = 0.0
    warm_start: Any = None               # anything Solution-shaped
    use_triangle_cuts: bool = True
    use_exit_cuts: bool = True
    collect_nodes: bool = False          # debug: keep (committed, banned, bound)

    def __post_init__(self) -> None:
        if self.time_limit_s <= 0:
            raise ModelError("time_limit_s must be positive")
        if self.gap_tol < 0:
            raise ModelError("gap_tol must be nonnegative")


@dataclass
class Solution:
    status: SolveStatus
    objective: float | None = None
    best_bound: float | None = None
    gap: float | None = None
    upgrades: tuple[str, ...] = ()
    assignment: dict[str, str] = field(default_factory=dict)
    paths: dict[str, tuple[str, ...]] = field(default_factory=dict)
    stats: dict[str, Any] = field(default_factory=dict)

    def exit_code(self) -> int:
        if self.status in SOLVED:
            return 0
        if self.status is SolveStatus.TIME_LIMIT:
            return 3
        return 2

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        stats = {k: v for k, v in self.stats.items()
                 if include_timing or not k.startswith("wall_time")}
        return {
            "status": self.status.value,
            "objective": self.objective,
            "bound": self.best_bound,
            "gap": self.gap,
            "upgrades": list(self.upgrades),
            "assignment": dict(sorted(self.assignment.items())),
            "paths": {k: list(v) for k, v in sorted(self.paths.items())},
            "stats": stats,
        }

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True,
                          indent=2) + "\n"


# -- shared routing helpers -----------------------------------------------


def _blocked_by_origin(net: Network, mask: VariableMask | None,
                       ) -> dict[str, frozenset[str]]:
    if mask is None or not len(mask):
        return {o.id: frozenset() for o in net.origins()}
    return {o.id: frozenset(mask.arcs_blocked_for(o.id)) for o in net.origins()}


def _admit(blocked: frozenset[str], open_vulnerable: frozenset[str]):
    def admit(arc: RoadArc) -> bool:
        if arc.id in blocked:
            return False
        return not arc.vulnerable or arc.id in open_vulnerable
    return admit


def _dists_to_dests(net: Network, source: str, admit, dest_ids: Sequence[str],
                    nearest_only: bool = False) -> dict[str, float]:
    """Dijkstra from ``source``, stopping once the needed destinations settle."""
    remaining = set(dest_ids)
    found: dict[str, float] = {}
    dist = {source: 0.0}
    done: set[str] = set()
    heap = [(0.0, source)]
    while heap and remaining:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in remaining:
            found[u] = d
            remaining.discard(u)
            if nearest_only:
                break
        for aid in net.out_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            nd = d + arc.travel_time
            if nd < dist.get(arc.head, math.inf) - DIST_TOL:
                dist[arc.head] = nd
                heapq.heappush(heap, (nd, arc.head))
    return found


# -- exact capacitated assignment ------------------------------------------


def _assignment_exact(items: list[tuple[str, float, float, list[tuple[float, str]]]],
                      capacities: Mapping[str, float],
                      ) -> tuple[float, dict[str, str]] | None:
    """Min-cost assignment of origins to destinations under capacities.

    ``items``: (origin, residents, weight, [(minutes, dest), ...] sorted).
    Exact depth-first search with a capacity-relaxed suffix bound.  Returns
    (weighted minutes, assignment) or None if capacities cannot host everyone.
    """
    n = len(items)
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        _, _, w, cands = items[i]
        if not cands:
            return None
        suffix[i] = suffix[i + 1] + w * cands[0][0]
    residual = dict(capacities)
    best_obj = math.inf
    best_assign: dict[str, str] | None = None
    chosen: list[str] = []

    def dfs(i: int, partial: float) -> None:
        nonlocal best_obj, best_assign
        if partial + suffix[i] >= best_obj - 1e-12:
            return
        if i == n:
            best_obj = partial
            best_assign = {items[j][0]: chosen[j] for j in range(n)}
            return
        origin, h, w, cands = items[i]
        for minutes, dest in cands:
            if not capacity_fits(h, residual[dest]):
                continue
            residual[dest] -= h
            chosen.append(dest)
            dfs(i + 1, partial + w * minutes)
            chosen.pop()
            residual[dest] += h
    dfs(0, 0.0)
    if best_assign is None:
        return None
    return best_obj, best_assign


def _candidate_lists(net: Network, origins: Sequence[RoadNode],
                     dest_ids: Sequence[str],
                     blocked: Mapping[str, frozenset[str]],
                     open_vulnerable: frozenset[str],
                     ) -> dict[str, list[tuple[float, str]]] | None:
    """Per-origin reachable (minutes, dest) lists; None if someone is cut off."""
    out: dict[str, list[tuple[float, str]]] = {}
    for o in origins:
        dists = _dists_to_dests(net, o.id, _admit(blocked[o.id], open_vulnerable),
                                dest_ids)
        if not dists:
            return None
        out[o.id] = sorted((d, did) for did, d in dists.items())
    return out


def _used_vulnerable(net: Network, paths: Mapping[str, Sequence[str]],
                     ) -> tuple[str, ...]:
    used = {aid for path in paths.values() for aid in path
            if net.arcs[aid].vulnerable}
    return tuple(sorted(used))


def _paths_for(net: Network, assignment: Mapping[str, str],
               blocked: Mapping[str, frozenset[str]],
               open_vulnerable: frozenset[str]) -> dict[str, tuple[str, ...]]:
    paths: dict[str, tuple[str, ...]] = {}
    for k in sorted(assignment):
        admit = _admit(blocked[k], open_vulnerable)
        found = canonical_shortest_path(net, k, assignment[k], admit)
        if found is None:  # pragma: no cover - assignment implies reachability
            raise ModelError(f"no route from {k!r} to {assignment[k]!r}")
        paths[k] = found[1]
    return paths


# -- brute-force oracle -------------------------------------------------------


@dataclass(frozen=True)
class OracleLimits:
    max_vulnerable: int = 20
    max_origins: int = 8
    max_destinations: int = 4


def brute_force_oracle(instance: ProblemInstance,
                       limits: OracleLimits | None = None,
                       mask: VariableMask | None = None,
                       fixings: FixedUpgrades | None = None) -> Solution:
    """Exhaustive reference solve: every affordable upgrade set, every
    capacity-feasible assignment.  Exact and deterministic, exponential."""
    limits = limits or OracleLimits()
    net = instance.network
    origins = net.origins()
    dests = net.destinations()
    dest_ids = [d.id for d in dests]
    caps = {d.id: d.capacity for d in dests}
    units = purchase_units(net, instance.spec.segment_coupling)
    if len(units) > limits.max_vulnerable:
        raise OracleScaleError(
            f"oracle scale: {len(units)} purchase units > {limits.max_vulnerable}")
    if len(origins) > limits.max_origins:
        raise OracleScaleError(
            f"oracle scale: {len(origins)} origins > {limits.max_origins}")
    if len(dests) > limits.max_destinations:
        raise OracleScaleError(
            f"oracle scale: {len(dests)} destinations > {limits.max_destinations}")

    blocked = _blocked_by_origin(net, mask)
    budget_cents = cents(instance.budget)
    forced_arcs = frozenset(fixings.forced_y) if fixings else frozenset()
    forced_units = [u for u in units
                    if any(a in forced_arcs for a in u.arc_ids)]
    free_units = [u for u in units if u not in forced_units]
    forced_cost = sum(u.cost_cents for u in forced_units)
    forced_arc_ids = frozenset(a for u in forced_units for a in u.arc_ids)

    best: tuple[float, tuple[str, ...], tuple[tuple[str, str], ...]] | None = None
    best_assignment: dict[str, str] | None = None
    best_open: frozenset[str] | None = None
    saw_connected = False
    evaluated = 0

    origin_order = list(origins)  # id order
    for r in range(len(free_units) + 1):
        for combo in itertools.combinations(range(len(free_units)), r):
            cost = forced_cost + sum(free_units[i].cost_cents for i in combo)
            if cost > budget_cents:
                continue
            evaluated += 1
            open_arcs = frozenset(
                a for i in combo for a in free_units[i].arc_ids) | forced_arc_ids
            unit_key = tuple(sorted([free_units[i].id for i in combo]
                                    + [u.id for u in forced_units]))
            cands = _candidate_lists(net, origin_order, dest_ids, blocked,
                                     open_arcs)
            if cands is None:
                continue
            saw_connected = True
            per_origin = [cands[o.id] for o in origin_order]
            for picks in itertools.product(*per_origin):
                load: dict[str, float] = {}
                for o, (_, did) in zip(origin_order, picks):
                    load[did] = load.get(did, 0.0) + o.residents
                if any(not capacity_fits(v, caps[d]) for d, v in load.items()):
                    continue
                obj = sum(o.weight * d for o, (d, _) in zip(origin_order, picks))
                assign_key = tuple((o.id, did) for o, (_, did)
                                   in zip(origin_order, picks))
                key = (obj, unit_key, assign_key)
                if (best is None or obj < best[0] - DIST_TOL
                        or (abs(obj - best[0]) <= DIST_TOL
                            and key[1:] < best[1:])):
                    best = key
                    best_assignment = dict(assign_key)
                    best_open = open_arcs
    if best is None or best_assignment is None or best_open is None:
        status = (SolveStatus.INFEASIBLE if saw_connected
                  else SolveStatus.BUDGET_DISCONNECTED)
        return Solution(status=status, stats={"subsets_evaluated": evaluated})
    paths = _paths_for(net, best_assignment, blocked, best_open)
    return Solution(
        status=SolveStatus.OPTIMAL, objective=best[0], best_bound=best[0],
        gap=0.0, upgrades=_used_vulnerable(net, paths),
        assignment=best_assignment, paths=paths,
        stats={"subsets_evaluated": evaluated})


# -- branch and bound ---------------------------------------------------------


def _dijkstra_all(net: Network, source: str, admit) -> dict[str, float]:
    """Final distance labels from ``source`` over the whole admitted component."""
    dist = {source: 0.0}
    final: dict[str, float] = {}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in final:
            continue
        final[u] = d
        for aid in net.out_arcs(u):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            nd = d + arc.travel_time
            if nd < dist.get(arc.head, math.inf) - DIST_TOL:
                dist[arc.head] = nd
                heapq.heappush(heap, (nd, arc.head))
    return final


def _shortest_path_arcs(net: Network, dist: Mapping[str, float], origin: str,
                        dest: str, admit) -> list[str]:
    """Arc ids along one shortest origin->dest path, read off final labels.

    Walks backward from ``dest``, picking the smallest admitted arc id whose
    tail label is tight.  Zero-time cycles are cut by a step guard; a partial
    list is acceptable because callers use it only to score branch choices.
    """
    arcs: list[str] = []
    v = dest
    steps = 0
    while v != origin and steps <= len(net.arcs):
        steps += 1
        dv = dist.get(v)
        if dv is None:
            break
        best: str | None = None
        best_tail = ""
        for aid in net.in_arcs(v):
            arc = net.arcs[aid]
            if not admit(arc):
                continue
            du = dist.get(arc.tail)
            if du is None:
                continue
            if abs(du + arc.travel_time - dv) <= DIST_TOL and (
                    best is None or aid < best):
                best = aid
                best_tail = arc.tail
        if best is None:
            break
        arcs.append(best)
        v = best_tail
    return arcs


def _affordable_connectivity(net: Network,
                             blocked: Mapping[str, frozenset[str]],
                             dest_ids: Sequence[str],
                             units: Sequence[PurchaseUnit],
                             base_arcs: frozenset[str], base_cost: int,
                             budget_cents: int,
                             deadline: float) -> bool | None:
    """Decide whether any affordable purchase set reconnects every origin.

    Distinguishes capacity infeasibility from budget disconnection when the
    main search ends without an incumbent.  Include/exclude recursion over
    units, pruned by connectivity of the affordability-filtered relaxation
    (a superset of every completion, so a disconnected relaxation kills the
    subtree).  Returns None if ``deadline`` passes first.
    """
    origin_ids = [o.id for o in net.origins()]
    by_id = {u.id: u for u in units}
    order = sorted(by_id)

    def arcs_for(uids: Iterable[str]) -> frozenset[str]:
        s = set(base_arcs)
        for uid in uids:
            s.update(by_id[uid].arc_ids)
        return frozenset(s)

    def connected(open_arcs: frozenset[str]) -> bool:
        for k in origin_ids:
            if not _dists_to_dests(net, k, _admit(blocked[k], open_arcs),
                                   dest_ids, nearest_only=True):
                return False
        return True

    def walk(committed: frozenset[str], banned: frozenset[str],
             cost: int) -> bool | None:
        if time.perf_counter() > deadline:
            return None
        if connected(arcs_for(committed)):
            return True
        remaining = budget_cents - cost
        afford = [uid for uid in order
                  if uid not in committed and uid not in banned
                  and by_id[uid].cost_cents <= remaining]
        if not afford or not connected(arcs_for(
                itertools.chain(committed, afford))):
            return False
        uid = afford[0]
        took = walk(committed | {uid}, banned, cost + by_id[uid].cost_cents)
        if took is not False:
            return took
        return walk(committed, banned | {uid}, cost)

    return walk(frozenset(), frozenset(), base_cost)


def solve_exact(instance: ProblemInstance,
                mask: VariableMask | None = None,
                fixings: FixedUpgrades | None = None,
                cuts: Cuts | None = None,
                options: SolveOptions | None = None) -> Solution:
    """Exact best-first branch-and-bound over purchase units.

    A node fixes some units in (committed) and some out (banned).  Its bound
    is the capacity-feasible assignment cost when every undecided unit that
    still fits the remaining budget is optimistically treated as purchased:
    distances are relaxed, capacities are not, so the bound stays tight on
    capacity-bound instances.  Branching picks the undecided unit carrying
    the most resident weight on the relaxed shortest paths; a node whose
    relaxed optimum rides committed or flood-free arcs only is solved
    exactly and closed on the spot.

    Cuts are accepted for interface parity with the 0-1 model; a path-based
    search satisfies them implicitly, so toggling them cannot change the
    optimum.  Determinism: nodes are numbered in creation order and the heap
    is keyed (bound, number); incumbent ties prefer the lexicographically
    smaller used-upgrade set.
    """
    del cuts  # enforced implicitly by shortest-path routing; kept in signature
    options = options or SolveOptions()
    start = time.perf_counter()
    net = instance.network
    origins = net.origins()
    dest_ids = [d.id for d in net.destinations()]
    caps = {d: net.nodes[d].capacity for d in dest_ids}
    budget_cents = cents(instance.budget)
    blocked = _blocked_by_origin(net, mask)
    if fixings:
        for (k, aid) in fixings.forced_x:
            if mask is not None and mask.blocks(k, aid):
                raise ModelError(
                    f"inconsistent fixing: forced route ({k!r}, {aid!r}) is masked")
    forced_arcs = frozenset(fixings.forced_y) if fixings else frozenset()
    units = purchase_units(net, instance.spec.segment_coupling)
    committed_units = [u for u in units
                       if any(a in forced_arcs for a in u.arc_ids)]
    base_cost = sum(u.cost_cents for u in committed_units)
    base_arcs = frozenset(a for u in committed_units for a in u.arc_ids)
    stats: dict[str, Any] = {"nodes_explored": 0, "incumbent_updates": 0}
    nodes_debug: list[dict[str, Any]] = []
    if options.collect_nodes:
        stats["nodes"] = nodes_debug

    def finish(sol: Solution) -> Solution:
        sol.stats.setdefault("nodes_explored", stats["nodes_explored"])
        sol.stats["wall_time_s"] = time.perf_counter() - start
        if options.collect_nodes:
            sol.stats["nodes"] = nodes_debug
        return sol

    if base_cost > budget_cents:
        # the forced exits alone blow the budget: no affordable set connects
        return finish(Solution(status=SolveStatus.BUDGET_DISCONNECTED,
                               stats=dict(stats)))

    undecided = {u.id: u for u in units if u not in committed_units}
    unit_ids = sorted(undecided)
    arc_unit = {a: uid for uid, u in undecided.items() for a in u.arc_ids}
    gap_items_order = sorted(origins, key=lambda o: (-o.residents, o.id))
    origin_order = sorted(origins, key=lambda o: o.id)

    incumbent: Solution | None = None
    saw_assignment_attempt = False

    def arcs_for(uids: Iterable[str]) -> frozenset[str]:
        s = set(base_arcs)
        for uid in uids:
            s.update(undecided[uid].arc_ids)
        return frozenset(s)

    def try_incumbent(committed_arcs: frozenset[str]) -> None:
        nonlocal incumbent, saw_assignment_attempt
        cands = _candidate_lists(net, gap_items_order, dest_ids, blocked,
                                 committed_arcs)
        if cands is None:
            return
        saw_assignment_attempt = True
        items = [(o.id, o.residents, o.weight, cands[o.id])
                 for o in gap_items_order]
        solved = _assignment_exact(items, caps)
        if solved is None:
            return
        obj, assignment = solved
        if incumbent is not None and obj > incumbent.objective + DIST_TOL:
            return
        paths = _paths_for(net, assignment, blocked, committed_arcs)
        upgrades = _used_vulnerable(net, paths)
        if incumbent is not None and abs(obj - incumbent.objective) <= DIST_TOL \
                and upgrades >= incumbent.upgrades:
            return
        incumbent = Solution(status=SolveStatus.FEASIBLE, objective=obj,
                             upgrades=upgrades, assignment=assignment,
                             paths=paths)
        stats["incumbent_updates"] += 1

    # warm start: accept anything Solution-shaped that validates cleanly
    if options.warm_start is not None:
        ws = options.warm_start
        report = validate_solution(instance, ws, mask=mask)
        if report.ok:
            incumbent = Solution(
                status=SolveStatus.FEASIBLE, objective=report.objective,
                upgrades=tuple(sorted(ws.upgrades)),
                assignment=dict(ws.assignment),
                paths={k: tuple(v) for k, v in ws.paths.items()})
            stats["warm_start"] = True

    def beats_incumbent(bound: float) -> bool:
        if incumbent is None:
            return True
        gap_allow = options.gap_tol * max(abs(incumbent.objective), 1e-12)
        return bound < incumbent.objective - max(DIST_TOL, gap_allow)

    def evaluate(committed: frozenset[str], banned: frozenset[str],
                 cost: int, probe: bool) -> tuple[float, str | None] | None:
        """Bound one node; returns (bound, branch unit id) or None if dead.

        A None branch id means the relaxed optimum needs no undecided unit,
        so the committed-only probe already attains the bound and the node
        is closed.  ``probe`` is False for exclude children, whose committed
        set (and hence probe) is identical to the parent's.
        """
        remaining = budget_cents - cost
        afford = [uid for uid in unit_ids
                  if uid not in committed and uid not in banned
                  and undecided[uid].cost_cents <= remaining]
        open_arcs = arcs_for(itertools.chain(committed, afford))
        dist_maps: dict[str, dict[str, float]] = {}
        lists: dict[str, list[tuple[float, str]]] = {}
        for o in origin_order:
            dmap = _dijkstra_all(net, o.id, _admit(blocked[o.id], open_arcs))
            reach = sorted((dmap[t], t) for t in dest_ids if t in dmap)
            if not reach:
                return None  # some origin is cut off even in the relaxation
            dist_maps[o.id] = dmap
            lists[o.id] = reach
        if probe:
            try_incumbent(arcs_for(committed))
        items = [(o.id, o.residents, o.weight, lists[o.id])
                 for o in gap_items_order]
        solved = _assignment_exact(items, caps)
        if solved is None:
            return None  # capacities cannot host even the relaxation
        bound, relaxed_assign = solved
        score: dict[str, float] = {}
        for o in origin_order:
            admit = _admit(blocked[o.id], open_arcs)
            for aid in _shortest_path_arcs(net, dist_maps[o.id], o.id,
                                           relaxed_assign[o.id], admit):
                uid = arc_unit.get(aid)
                if uid is not None and uid not in committed:
                    score[uid] = score.get(uid, 0.0) + o.weight
        if not score:
            return bound, None
        return bound, min(score, key=lambda uid: (-score[uid], uid))

    counter = itertools.count()
    heap: list[tuple[float, int, frozenset[str], frozenset[str], int, str]] = []
    cut_floor: float | None = None   # weakest bound discarded under gap_tol

    def push(committed: frozenset[str], banned: frozenset[str],
             cost: int, probe: bool) -> None:
        nonlocal cut_floor
        ev = evaluate(committed, banned, cost, probe)
        entry: dict[str, Any] = {"committed": sorted(committed),
                                 "banned": sorted(banned)}
        if ev is None:
            entry["fate"] = "dead"
        else:
            bound, branch = ev
            entry["bound"] = bound
            if branch is None:
                entry["fate"] = "closed"
            elif not beats_incumbent(bound):
                entry["fate"] = "cut"
                cut_floor = bound if cut_floor is None else min(cut_floor, bound)
            else:
                entry["fate"] = "open"
                heapq.heappush(heap, (bound, next(counter), committed,
                                      banned, cost, branch))
        if options.collect_nodes:
            nodes_debug.append(entry)

    push(frozenset(), frozenset(), base_cost, probe=True)
    timed_out = False
    proven_bound: float | None = None

    while heap:
        if time.perf_counter() - start > options.time_limit_s:
            timed_out = True
            break
        bound, _, committed, banned, cost, branch = heapq.heappop(heap)
        stats["nodes_explored"] += 1
        if not beats_incumbent(bound):
            proven_bound = bound  # best-first: every open node is >= this
            break
        unit = undecided[branch]
        push(committed | {branch}, banned, cost + unit.cost_cents, probe=True)
        push(committed, banned | {branch}, cost, probe=False)

    if timed_out:
        open_bounds = [h[0] for h in heap]
        if incumbent is None:
            lb = min(open_bounds) if open_bounds else None
            return finish(Solution(status=SolveStatus.TIME_LIMIT,
                                   best_bound=lb, stats=dict(stats)))
        lb = min(open_bounds + [incumbent.objective])
        sol = dataclasses.replace(incumbent)
        sol.status = SolveStatus.TIME_LIMIT
        sol.best_bound = lb
        sol.gap = (sol.objective - lb) / max(abs(sol.objective), 1e-12)
        sol.stats = dict(stats)
        return finish(sol)
    if incumbent is None:
        if saw_assignment_attempt:
            status = SolveStatus.INFEASIBLE
        else:
            # No probe ever saw full connectivity, but pruned subtrees might
            # hide an affordable connecting set; decide it exactly so the
            # Infeasible / BudgetDisconnected split matches the oracle.
            can = _affordable_connectivity(
                net, blocked, dest_ids, list(undecided.values()), base_arcs,
                base_cost, budget_cents, start + options.time_limit_s)
            if can is None:
                return finish(Solution(status=SolveStatus.TIME_LIMIT,
                                       stats=dict(stats)))
            status = (SolveStatus.INFEASIBLE if can
                      else SolveStatus.BUDGET_DISCONNECTED)
        return finish(Solution(status=status, stats=dict(stats)))
    sol = dataclasses.replace(incumbent)
    sol.status = SolveStatus.OPTIMAL
    floors = [b for b in (proven_bound, cut_floor) if b is not None]
    if floors and options.gap_tol > 0:
        # subtrees were discarded on tolerance, so only this much is proven
        sol.best_bound = min(min(floors), sol.objective)
        sol.gap = max(0.0, (sol.objective - sol.best_bound)
                      / max(abs(sol.objective), 1e-12))
    else:
        sol.best_bound = sol.objective
        sol.gap = 0.0
    sol.stats = dict(stats)
    return finish(sol)


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    tag: str
    message: str


@dataclass
class ValidationReport:
    ok: bool
    violations: list[Violation]
    objective: float | None

    def __str__(self) -> str:
        if self.ok:
            return f"valid (objective {self.objective})"
        return "; ".join(f"[{v.tag}] {v.message}" for v in self.violations)


def validate_solution(instance: ProblemInstance, solution,
                      mask: VariableMask | None = None) -> ValidationReport:
    """Check a Solution-shaped object against the instance's constraints.

    Tags mirror the model rows: budget knapsack (5), origin dispatch (2),
    arrival (3), path contiguity (4), vulnerable usage needs upgrade (6),
    no idle upgrades (7), facility capacity (8), plus objective recomputation.
    """
    net = instance.network
    violations: list[Violation] = []
    upgrades = set(getattr(solution, "upgrades", ()) or ())
    for aid in sorted(upgrades):
        arc = net.arcs.get(aid)
        if arc is None:
            violations.append(Violation("upgrade", f"unknown arc {aid!r}"))
        elif not arc.vulnerable:
            violations.append(Violation("upgrade",
                                        f"arc {aid!r} is not vulnerable"))
    spend = upgrade_cost_cents(net, (a for a in upgrades if a in net.arcs),
                               instance.spec.segment_coupling)
    if spend > cents(instance.budget):
        violations.append(Violation(
            "budget(5)", f"spent {spend / 100:.2f} > budget {instance.budget:.2f}"))

    assignment = dict(getattr(solution, "assignment", {}) or {})
    paths = {k: tuple(v) for k, v in (getattr(solution, "paths", {}) or {}).items()}
    recomputed = 0.0
    used: set[str] = set()
    load: dict[str, float] = {}
    for origin in net.origins():
        k = origin.id
        dest = assignment.get(k)
        if dest is None:
            violations.append(Violation("flow(2)", f"origin {k!r} unassigned"))
            continue
        if dest not in net.nodes or net.nodes[dest].kind is not NodeKind.DESTINATION:
            violations.append(Violation("flow(3)",
                                        f"{k!r} assigned to non-facility {dest!r}"))
            continue
        path = paths.get(k)
        if not path:
            violations.append(Violation("flow(2)", f"origin {k!r} has no route"))
            continue
        pos = k
        minutes = 0.0
        broken = False
        for aid in path:
            arc = net.arcs.get(aid)
            if arc is None or arc.tail != pos:
                violations.append(Violation(
                    "flow(4)", f"route of {k!r} breaks at {aid!r}"))
                broken = True
                break
            if arc.vulnerable:
                used.add(aid)
                if aid not in upgrades:
                    violations.append(Violation(
                        "link(6)", f"{k!r} rides vulnerable {aid!r} without upgrade"))
            minutes += arc.travel_time
            pos = arc.head
        if broken:
            continue
        if pos != dest:
            violations.append(Violation(
                "flow(3)", f"route of {k!r} ends at {pos!r}, not {dest!r}"))
            continue
        recomputed += origin.weight * minutes
        load[dest] = load.get(dest, 0.0) + origin.residents
        if mask is not None:
            for aid in path:
                if mask.blocks(k, aid):
                    violations.append(Violation(
                        "mask", f"route of {k!r} uses masked arc {aid!r}"))
    for dest, v in sorted(load.items()):
        cap = net.nodes[dest].capacity
        if not capacity_fits(v, cap):
            violations.append(Violation(
                "capacity(8)", f"facility {dest!r} load {v:g} > capacity {cap:g}"))
    idle = upgrades - used
    for aid in sorted(idle):
        violations.append(Violation("use(7)", f"upgrade {aid!r} unused"))
    declared = getattr(solution, "objective", None)
    if declared is not None and not violations:
        if abs(declared - recomputed) > 1e-9 * max(1.0, abs(recomputed)):
            violations.append(Violation(
                "objective",
                f"declared {declared!r} != recomputed {recomputed!r}"))
    ok = not violations
    return ValidationReport(ok=ok, violations=violations,
                            objective=recomputed if ok else None)


# -- 0-1 model / LP export ------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[float, str], ...]
    sense: str                   # "<=", ">=", "="
    rhs: float


@dataclass
class MipModel:
    name: str
    objective: tuple[tuple[float, str], ...]
    objective_constant: float
    constraints: list[Constraint]
    binaries: tuple[str, ...]
    x_var: dict[tuple[str, str], str]       # (origin, arc) -> var name
    y_var: dict[str, str]                   # purchase unit -> var name

    def counts(self) -> dict[str, int]:
        return {"x": len(self.x_var), "y": len(self.y_var),
                "constraints": len(self.constraints)}


_SANITIZE = re.compile(r"[^A-Za-z0-9_]")


def _clean(s: str) -> str:
    return _SANITIZE.sub("_", s)


def build_model(instance: ProblemInstance,
                mask: VariableMask | None = None,
                fixings: FixedUpgrades | None = None,
                cuts: Cuts | None = None) -> MipModel:
    """Materialize the 0-1 program (route vars per origin/arc, buy vars per
    purchase unit, dispatch/arrival/conservation rows, budget knapsack,
    ride-needs-upgrade links, no-idle-upgrade rows, capacities, plus optional
    cuts).  Forced variables are substituted out into constants."""
    net = instance.network
    origins = net.origins()
    dests = {d.id for d in net.destinations()}
    mask = mask or VariableMask({})
    fixings = fixings or FixedUpgrades()
    units = purchase_units(net, instance.spec.segment_coupling)
    unit_of_arc = {aid: u for u in units for aid in u.arc_ids}
    forced_units = {unit_of_arc[a].id for a in fixings.forced_y}
    forced_x = set(fixings.forced_x)
    for (k, aid) in forced_x:
        if mask.blocks(k, aid):
            raise ModelError(
                f"inconsistent fixing: forced route ({k!r}, {aid!r}) is masked")

    # variable names: x_{origin}_{tail}_{head}; parallel arcs get __2 suffixes
    x_var: dict[tuple[str, str], str] = {}
    arc_ids = list(net.arcs)
    arc_name: dict[str, str] = {}
    seen: dict[str, int] = {}
    for aid in arc_ids:
        a = net.arcs[aid]
        base = f"{_clean(a.tail)}_{_clean(a.head)}"
        n = seen.get(base, 0) + 1
        seen[base] = n
        arc_name[aid] = base if n == 1 else f"{base}__{n}"

    for o in origins:
        for aid in arc_ids:
            if mask.blocks(o.id, aid) or (o.id, aid) in forced_x:
                continue
            x_var[(o.id, aid)] = f"x_{_clean(o.id)}_{arc_name[aid]}"

    y_var: dict[str, str] = {}
    seen_y: dict[str, int] = {}
    for u in units:
        if u.id in forced_units:
            continue
        if instance.spec.segment_coupling:
            base = f"y_s_{_clean(u.id)}"
        else:
            arc = net.arcs[u.arc_ids[0]]
            base = f"y_{_clean(arc.tail)}_{_clean(arc.head)}"
        n = seen_y.get(base, 0) + 1
        seen_y[base] = n
        y_var[u.id] = base if n == 1 else f"{base}__{n}"

    weights = {o.id: o.weight for o in origins}
    residents = {o.id: o.residents for o in origins}

    objective: list[tuple[float, str]] = []
    constant = 0.0
    for o in origins:
        for aid in arc_ids:
            t = net.arcs[aid].travel_time
            if (o.id, aid) in forced_x:
                constant += weights[o.id] * t
            elif (o.id, aid) in x_var:
                objective.append((weights[o.id] * t, x_var[(o.id, aid)]))

    constraints: list[Constraint] = []

    def add_row(name: str, terms: tuple[tuple[float, str], ...], sense: str,
                rhs: float) -> None:
        """Append a row; substitution can empty one out, then it must hold."""
        if terms:
            constraints.append(Constraint(name, terms, sense, rhs))
            return
        satisfied = (abs(rhs) <= 1e-9 if sense == "=" else
                     rhs >= -1e-9 if sense == "<=" else rhs <= 1e-9)
        if not satisfied:
            raise ModelError(
                f"fixings make row {name!r} unsatisfiable: 0 {sense} {rhs:g}")

    def flow_terms(k: str, node: str) -> tuple[list[tuple[float, str]], float]:
        """(in - out) terms for commodity k at node; returns (terms, fixed part)."""
        terms: list[tuple[float, str]] = []
        fixed = 0.0
        for aid in net.in_arcs(node):
            if (k, aid) in forced_x:
                fixed += 1.0
            elif (k, aid) in x_var:
                terms.append((1.0, x_var[(k, aid)]))
        for aid in net.out_arcs(node):
            if (k, aid) in forced_x:
                fixed -= 1.0
            elif (k, aid) in x_var:
                terms.append((-1.0, x_var[(k, aid)]))
        return terms, fixed

    for o in origins:
        k = o.id
        terms, fixed = flow_terms(k, k)
        add_row(f"flow2_{_clean(k)}", tuple(terms), "=", -1.0 - fixed)
        for j in sorted(dests):
            terms, fixed = flow_terms(k, j)
            add_row(f"flow3_{_clean(k)}_{_clean(j)}", tuple(terms), ">=",
                    0.0 - fixed)
        for j in sorted(net.nodes):
            if j in dests or j == k:
                continue
            terms, fixed = flow_terms(k, j)
            add_row(f"flow4_{_clean(k)}_{_clean(j)}", tuple(terms), "=",
                    0.0 - fixed)

    knap_terms = tuple((u.cost_cents / 100.0, y_var[u.id])
                       for u in units if u.id in y_var)
    knap_rhs = instance.budget - sum(u.cost_cents for u in units
                                     if u.id in forced_units) / 100.0
    add_row("knap5", knap_terms, "<=", knap_rhs)

    for o in origins:
        k = o.id
        for u in units:
            for aid in u.arc_ids:
                if (k, aid) not in x_var:
                    continue
                if u.id in forced_units:
                    continue  # y == 1: link row is vacuous
                constraints.append(Constraint(
                    f"link6_{_clean(k)}_{arc_name[aid]}",
                    ((1.0, x_var[(k, aid)]), (-1.0, y_var[u.id])), "<=", 0.0))

    for u in units:
        if u.id in forced_units:
            continue  # a forced unit always has its forced route using it
        name = (f"use7_s_{_clean(u.id)}" if instance.spec.segment_coupling
                else f"use7_{arc_name[u.arc_ids[0]]}")
        terms: list[tuple[float, str]] = [(1.0, y_var[u.id])]
        fixed = 0.0
        for aid in u.arc_ids:
            for o in origins:
                if (o.id, aid) in forced_x:
                    fixed += 1.0
                elif (o.id, aid) in x_var:
                    terms.append((-1.0, x_var[(o.id, aid)]))
        add_row(name, tuple(terms), "<=", 0.0 + fixed)

    for j in sorted(dests):
        terms = []
        fixed = 0.0
        for o in origins:
            k = o.id
            h = residents[k]
            for aid in net.in_arcs(j):
                if (k, aid) in forced_x:
                    fixed += h
                elif (k, aid) in x_var:
                    terms.append((h, x_var[(k, aid)]))
            for aid in net.out_arcs(j):
                if (k, aid) in forced_x:
                    fixed -= h
                elif (k, aid) in x_var:
                    terms.append((-h, x_var[(k, aid)]))
        add_row(f"cap8_{_clean(j)}", tuple(terms), "<=",
                net.nodes[j].capacity - fixed)

    if cuts is not None:
        for idx, (a_ij, a_ih, a_jh) in enumerate(cuts.triangle):
            if not all(a in net.arcs for a in (a_ij, a_ih, a_jh)):
                continue  # harvested before a later prune removed one
            for o in origins:
                terms = tuple((1.0, x_var[(o.id, a)])
                              for a in (a_ij, a_ih, a_jh)
                              if (o.id, a) in x_var)
                if len(terms) < 2:
                    continue
                constraints.append(Constraint(
                    f"tri11_{_clean(o.id)}_{idx}", terms, "<=", 1.0))
        for k in cuts.exit_origins:
            if k not in net.nodes:
                continue
            unit_ids = {unit_of_arc[aid].id for aid in net.out_arcs(k)
                        if net.arcs[aid].vulnerable}
            if unit_ids & forced_units:
                continue  # already satisfied by a forced purchase
            terms = tuple((1.0, y_var[uid]) for uid in sorted(unit_ids)
                          if uid in y_var)
            if terms:
                constraints.append(Constraint(f"exit12_{_clean(k)}", terms,
                                              ">=", 1.0))

    binaries = tuple(sorted(x_var.values())) + tuple(
        y_var[u.id] for u in units if u.id in y_var)
    return MipModel(
        name=f"floodmit_{len(origins)}o_{len(units)}u",
        objective=tuple(objective), objective_constant=constant,
        constraints=constraints, binaries=binaries, x_var=x_var, y_var=y_var)


def _coef(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return format(value, ".12g")


def _terms_str(terms: Iterable[tuple[float, str]]) -> str:
    parts: list[str] = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_coef(mag)} {var}"
        if not parts:
            parts.append(body if sign == "+" else f"- {body}")
        else:
            parts.append(f"{sign} {body}")
    return " ".join(parts)


def export_lp(model: MipModel, path: str | Path | None = None) -> str:
    """Serialize the model in LP format (deterministic bytes)."""
    lines = [f"\\ {model.name}", "Minimize"]
    obj = _terms_str(model.objective)
    if model.objective_constant:
        obj = f"{obj} + {_coef(model.objective_constant)}" if obj \
            else _coef(model.objective_constant)
    lines.append(f" obj: {obj or '0'}")
    lines.append("Subject To")
    for c in model.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        lines.append(f" {c.name}: {_terms_str(c.terms)} {sense} {_coef(c.rhs)}")
    lines.append("Binary")
    for var in model.binaries:
        lines.append(f" {var}")
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_lp(source: str | Path) -> dict[str, Any]:
    """Parse an LP file written by `export_lp` (round-trip checking)."""
    if isinstance(source, Path):
        text = source.read_text()
    elif "\n" not in source and Path(source).exists():
        text = Path(source).read_text()
    else:
        text = str(source)
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("\\")]
    section = None
    objective: list[tuple[float, str]] = []
    constant = 0.0
    constraints: list[dict[str, Any]] = []
    binaries: list[str] = []

    def parse_terms(expr: str) -> tuple[list[tuple[float, str]], float]:
        # token stream over export_lp's strictly space-separated syntax
        terms: list[tuple[float, str]] = []
        const = 0.0
        sign = 1.0
        coef: float | None = None
        tokens = expr.split()
        for i, tok in enumerate(tokens):
            if tok == "+":
                sign, coef = 1.0, None
                continue
            if tok == "-":
                sign, coef = -1.0, None
                continue
            if tok[0] in "+-" and len(tok) > 1:
                sign = -1.0 if tok[0] == "-" else 1.0
                tok = tok[1:]
            if tok[0].isdigit() or tok[0] == ".":
                value = float(tok)
                if i + 1 < len(tokens) and (tokens[i + 1][0].isalpha()
                                            or tokens[i + 1][0] == "_"):
                    coef = value          # coefficient of the next variable
                else:
                    const += sign * value
                    sign, coef = 1.0, None
                continue
            terms.append((sign * (coef if coef is not None else 1.0), tok))
            sign, coef = 1.0, None
        return terms, const

    for ln in lines:
        low = ln.lower()
        if low in ("minimize", "maximize"):
            section = "obj"
            continue
        if low == "subject to":
            section = "cons"
            continue
        if low == "binary":
            section = "bin"
            continue
        if low == "end":
            break
        if section == "obj":
            expr = ln.split(":", 1)[1] if ":" in ln else ln
            terms, const = parse_terms(expr)
            objective.extend(terms)
            constant += const
        elif section == "cons":
            name, rest = ln.split(":", 1)
            m = re.search(r"(<=|>=|=)\s*([-+0-9.eE]+)\s*$", rest)
            if not m:
                raise ModelError(f"unparseable constraint line: {ln!r}")
            terms, _ = parse_terms(rest[:m.start()])
            constraints.append({"name": name.strip(), "terms": terms,
                                "sense": m.group(1), "rhs": float(m.group(2))})
        elif section == "bin":
            binaries.append(ln)
    return {"objective": objective, "objective_constant": constant,
            "constraints": constraints, "binaries": binaries}


# -- generalized assignment embedding ---------------------------------------


def gap_to_rnfmp(sizes: Sequence[float], capacities: Sequence[float],
                 costs: Sequence[Sequence[float]]) -> ProblemInstance:
    """Embed a generalized assignment problem as a zero-budget instance.

    Job i becomes an origin with that many residents (weight 1), agent j a
    facility with its capacity, and each (i, j) pair a direct never-flooded
    road whose travel time is the assignment cost.  With no vulnerable roads
    and budget 0, solving the instance solves the GAP.
    """
    if not sizes or not capacities:
        raise ModelError("GAP needs at least one job and one agent")
    if len(costs) != len(sizes) or any(len(row) != len(capacities)
                                       for row in costs):
        raise ModelError("cost matrix shape mismatch")
    if any(c < 0 for row in costs for c in row):
        raise ModelError("negative assignment cost")
    nodes = []
    width_j = len(str(len(sizes) - 1))
    width_a = len(str(len(capacities) - 1))
    for i, h in enumerate(sizes):
        nodes.append(RoadNode(f"j{i:0{width_j}d}", NodeKind.ORIGIN,
                              residents=float(h), weight=1.0))
    for j, cap in enumerate(capacities):
        nodes.append(RoadNode(f"a{j:0{width_a}d}", NodeKind.DESTINATION,
                              capacity=float(cap)))
    arcs = []
    for i in range(len(sizes)):
        for j in range(len(capacities)):
            arcs.append(RoadArc(f"g{i:0{width_j}d}_{j:0{width_a}d}",
                                f"j{i:0{width_j}d}", f"a{j:0{width_a}d}",
                                float(costs[i][j])))
    net = Network(nodes, arcs)
    spec = InstanceSpec(p=0.0, budget_fraction=0.0, weight_policy="uniform")
    return ProblemInstance(network=net, budget=0.0, b_hat=0.0, spec=spec,
                           provenance={"source": "gap", "log": []})
