"""Variable fixing and masking that provably keeps the optimum.

Three reductions, all derived from path structure:

* ``forced_exits`` — an origin whose every outgoing road is vulnerable must
  upgrade one of them; with a single exit the purchase is forced outright
  (budget charged, weighted hop time folded into the objective constant),
  otherwise the disjunction becomes a cut over the exit upgrades.
* ``distance_dominated`` — for an origin that can already reach every
  facility on never-flooded roads, any arc lying beyond its worst-case
  non-flooded trip can never appear on one of its optimal routes.
* ``component_mask`` — arcs inside an articulation-point side pocket that
  contains no facility are unusable for any origin outside the pocket.

Masks and fixings feed both the model builder and the exact solver; applying
them never changes the optimal objective (tested against brute force).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .ingest import ProblemInstance, cents
from .net import (ALL_ARCS, DIST_TOL, NON_VULNERABLE, Network, NodeKind,
                  articulation_points, components_without, shortest_paths)

REASON_SP_BOUND = "sp_bound"
REASON_COMPONENT = "component"


@dataclass(frozen=True)
class SpTables:
    """Per-origin shortest-path tables.

    ``flooded`` uses only never-vulnerable arcs; ``upgraded`` assumes every
    vulnerable arc is passable.  ``worst_served`` is the origin's worst-case
    flooded trip over all destinations (infinite unless it reaches them all).
    """

    flooded: Mapping[str, Mapping[str, float]]
    upgraded: Mapping[str, Mapping[str, float]]
    worst_served: Mapping[str, float]


def compute_sp_tables(instance: ProblemInstance) -> SpTables:
    net = instance.network
    dests = [d.id for d in net.destinations()]
    flooded: dict[str, dict[str, float]] = {}
    upgraded: dict[str, dict[str, float]] = {}
    worst: dict[str, float] = {}
    for origin in net.origins():
        k = origin.id
        flooded[k] = shortest_paths(net, k, NON_VULNERABLE)
        upgraded[k] = shortest_paths(net, k, ALL_ARCS)
        worst[k] = max((flooded[k].get(d, math.inf) for d in dests),
                       default=math.inf)
    return SpTables(flooded=flooded, upgraded=upgraded, worst_served=worst)


@dataclass(frozen=True)
class FixedUpgrades:
    """Output of the forced-exit reduction."""

    forced_y: frozenset[str] = frozenset()
    forced_x: frozenset[tuple[str, str]] = frozenset()  # (origin, arc)
    budget_delta: float = 0.0
    offset_delta: float = 0.0
    exit_vi_origins: tuple[str, ...] = ()
    infeasible: bool = False              # forced purchases alone exceed B


@dataclass(frozen=True)
class VariableMask:
    """Route variables proven useless: (origin id, arc id) -> reason."""

    eliminated: Mapping[tuple[str, str], str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eliminated)

    def blocks(self, origin: str, arc: str) -> bool:
        return (origin, arc) in self.eliminated

    def arcs_blocked_for(self, origin: str) -> set[str]:
        return {a for (k, a) in self.eliminated if k == origin}


def merge_masks(*masks: VariableMask | None) -> VariableMask:
    """Union of masks; the first reason recorded for a pair wins."""
    merged: dict[tuple[str, str], str] = {}
    for m in masks:
        if m is None:
            continue
        for key, reason in m.eliminated.items():
            merged.setdefault(key, reason)
    return VariableMask(merged)


@dataclass(frozen=True)
class Cuts:
    """Optional valid inequalities handed to the model builder."""

    triangle: tuple[tuple[str, str, str], ...] = ()   # (arc ij, arc ih, arc jh)
    exit_origins: tuple[str, ...] = ()


def forced_exits(instance: ProblemInstance) -> FixedUpgrades:
    """Origins whose every exit is vulnerable: fix single exits, cut the rest."""
    net = instance.network
    forced_y: set[str] = set()
    forced_x: set[tuple[str, str]] = set()
    budget_delta = 0.0
    offset_delta = 0.0
    exit_origins: list[str] = []
    for origin in net.origins():
        out_ids = net.out_arcs(origin.id)
        if not out_ids:
            continue
        arcs = [net.arcs[a] for a in out_ids]
        if not all(a.vulnerable for a in arcs):
            continue
        if len(arcs) == 1:
            arc = arcs[0]
            forced_y.add(arc.id)
            forced_x.add((origin.id, arc.id))
            budget_delta += arc.mitigation_cost
            offset_delta += origin.weight * arc.travel_time
        else:
            exit_origins.append(origin.id)
    infeasible = cents(budget_delta) > cents(instance.budget)
    return FixedUpgrades(
        forced_y=frozenset(forced_y), forced_x=frozenset(forced_x),
        budget_delta=budget_delta, offset_delta=offset_delta,
        exit_vi_origins=tuple(exit_origins), infeasible=infeasible)


def distance_dominated(instance: ProblemInstance,
                       tables: SpTables | None = None) -> VariableMask:
    """Mask (origin, arc) pairs beyond the origin's worst flooded trip.

    Only applies to origins that reach *every* destination without upgrades;
    for those, an optimal route never grows past that guaranteed bound, so an
    arc whose entry already exceeds it (strictly) is unusable.
    """
    if tables is None:
        tables = compute_sp_tables(instance)
    net = instance.network
    eliminated: dict[tuple[str, str], str] = {}
    for origin in net.origins():
        k = origin.id
        bound = tables.worst_served[k]
        if not math.isfinite(bound):
            continue
        reach = tables.upgraded[k]
        for aid in net.arcs:
            arc = net.arcs[aid]
            entry = reach.get(arc.tail, math.inf)
            if entry + arc.travel_time > bound + DIST_TOL:
                eliminated[(k, aid)] = REASON_SP_BOUND
    return VariableMask(eliminated)


def component_mask(instance: ProblemInstance) -> VariableMask:
    """Mask side-pocket arcs for origins outside the pocket.

    For an articulation point v and a component of the network minus v that
    holds no destination, a route starting outside the pocket would have to
    re-cross v to leave it — never optimal, so those route variables go.
    """
    net = instance.network
    origin_ids = [o.id for o in net.origins()]
    eliminated: dict[tuple[str, str], str] = {}
    for v in sorted(articulation_points(net)):
        for comp in components_without(net, v):
            if any(net.nodes[n].kind is NodeKind.DESTINATION
                   for n in comp.nodes):
                continue
            outside = [k for k in origin_ids if k not in comp.nodes]
            for aid in sorted(comp.arcs):
                for k in outside:
                    eliminated.setdefault((k, aid), REASON_COMPONENT)
    return VariableMask(eliminated)


def standard_reductions(instance: ProblemInstance,
                        tables: SpTables | None = None,
                        ) -> tuple[FixedUpgrades, VariableMask]:
    """The full reduction bundle: forced exits + both masks, merged."""
    fixed = forced_exits(instance)
    mask = merge_masks(distance_dominated(instance, tables),
                       component_mask(instance))
    return fixed, mask
