"""Shared fixtures: small hand-checkable instances used across the suite."""
from __future__ import annotations

from floodmit.ingest import InstanceSpec, ProblemInstance
from floodmit.net import Network, NodeKind, RoadArc, RoadNode


def build_instance(nodes, arcs, budget, b_hat, **spec_kw):
    spec_kw.setdefault("p", 1.0)
    spec_kw.setdefault("budget_fraction", budget / b_hat if b_hat else 0.0)
    spec = InstanceSpec(**spec_kw)
    return ProblemInstance(network=Network(nodes, arcs), budget=float(budget),
                           b_hat=float(b_hat), spec=spec,
                           provenance={"source": "test", "log": []})


def f1_instance(budget: float) -> ProblemInstance:
    """Two origins, two capacity-limited shelters, one shared transfer node.

    o1 (10 residents) -> t1 -> {d1 via washed-out a2, d2 dry};
    o2 (5 residents)  -> {d1 via washed-out a4, d2 dry}.
    d1 holds 12, so both origins never fit there together.
    """
    nodes = [
        RoadNode("o1", NodeKind.ORIGIN, residents=10.0, weight=10.0),
        RoadNode("o2", NodeKind.ORIGIN, residents=5.0, weight=5.0),
        RoadNode("t1", NodeKind.TRANSSHIPMENT),
        RoadNode("d1", NodeKind.DESTINATION, capacity=12.0),
        RoadNode("d2", NodeKind.DESTINATION, capacity=20.0),
    ]
    arcs = [
        RoadArc("a1", "o1", "t1", 2.0),
        RoadArc("a2", "t1", "d1", 3.0, vulnerable=True, mitigation_cost=4.0),
        RoadArc("a3", "t1", "d2", 5.0),
        RoadArc("a4", "o2", "d1", 1.0, vulnerable=True, mitigation_cost=5.0),
        RoadArc("a5", "o2", "d2", 6.0),
    ]
    return build_instance(nodes, arcs, budget, 9.0)


def bridge_instance(coupled: bool) -> ProblemInstance:
    """Two origins that must cross the same bridge in opposite directions.

    Separately the crossings cost 6 + 4 > budget 6; as one coupled segment
    they cost max(6, 4) = 6.  Capacities pin the assignment: dw (5 beds)
    only fits o2, de (7 beds) only fits o1.
    """
    nodes = [RoadNode("o1", NodeKind.ORIGIN, residents=7.0, weight=7.0),
             RoadNode("o2", NodeKind.ORIGIN, residents=5.0, weight=5.0),
             RoadNode("m", NodeKind.TRANSSHIPMENT),
             RoadNode("dw", NodeKind.DESTINATION, capacity=5.0),
             RoadNode("de", NodeKind.DESTINATION, capacity=7.0)]
    arcs = [RoadArc("w1", "o1", "m", 2.0),
            RoadArc("w2", "m", "dw", 1.0),
            RoadArc("w3", "o2", "de", 1.0),
            RoadArc("e", "m", "de", 2.0, vulnerable=True, mitigation_cost=6.0,
                    segment_id="bridge"),
            RoadArc("er", "de", "m", 2.0, vulnerable=True, mitigation_cost=4.0,
                    segment_id="bridge")]
    return build_instance(nodes, arcs, 6.0, 10.0, budget_fraction=0.6,
                          segment_coupling=coupled)


def forced_exit_instance() -> ProblemInstance:
    """One origin whose only way out is a single washed-out arc."""
    nodes = [RoadNode("k", NodeKind.ORIGIN, residents=3.0, weight=3.0),
             RoadNode("v", NodeKind.TRANSSHIPMENT),
             RoadNode("t", NodeKind.TRANSSHIPMENT),
             RoadNode("n", NodeKind.TRANSSHIPMENT),
             RoadNode("d", NodeKind.DESTINATION, capacity=5.0)]
    arcs = [RoadArc("kv", "k", "v", 1.0, vulnerable=True, mitigation_cost=4.0),
            RoadArc("vt", "v", "t", 1.0),
            RoadArc("tn", "t", "n", 1.0),
            RoadArc("nd", "n", "d", 1.0)]
    return build_instance(nodes, arcs, 4.0, 4.0, budget_fraction=1.0)


def stranded_instance(budget: float = 0.0) -> ProblemInstance:
    """Origin behind a washed-out arc it cannot afford to repair."""
    nodes = [RoadNode("o", NodeKind.ORIGIN, residents=2.0, weight=2.0),
             RoadNode("d", NodeKind.DESTINATION, capacity=9.0)]
    arcs = [RoadArc("v", "o", "d", 1.0, vulnerable=True, mitigation_cost=7.0)]
    return build_instance(nodes, arcs, budget, 7.0)


def overfull_instance() -> ProblemInstance:
    """Connectivity is fine; the only shelter is simply too small."""
    nodes = [RoadNode("o", NodeKind.ORIGIN, residents=10.0, weight=10.0),
             RoadNode("d", NodeKind.DESTINATION, capacity=4.0)]
    arcs = [RoadArc("od", "o", "d", 1.0)]
    return build_instance(nodes, arcs, 0.0, 0.0, budget_fraction=0.0)
