"""Variable fixing/masking must never move the optimum."""
from __future__ import annotations

import math

import pytest

from floodmit.net import NodeKind, RoadArc, RoadNode
from floodmit.reductions import (REASON_COMPONENT, REASON_SP_BOUND, Cuts,
                                 FixedUpgrades, VariableMask, component_mask,
                                 compute_sp_tables, distance_dominated,
                                 forced_exits, merge_masks,
                                 standard_reductions)
from floodmit.solver import SolveStatus, brute_force_oracle, solve_exact
from floodmit import synth

from conftest import build_instance, f1_instance, forced_exit_instance


def O(nid, h):
    return RoadNode(nid, NodeKind.ORIGIN, residents=float(h), weight=float(h))


def T(nid):
    return RoadNode(nid, NodeKind.TRANSSHIPMENT)


def D(nid, cap):
    return RoadNode(nid, NodeKind.DESTINATION, capacity=float(cap))


def test_sp_tables_on_known_instance():
    tables = compute_sp_tables(f1_instance(9.0))
    assert tables.upgraded["o1"] == pytest.approx({"o1": 0.0, "t1": 2.0,
                                                   "d1": 5.0, "d2": 7.0})
    assert tables.upgraded["o2"]["d1"] == pytest.approx(1.0)
    assert tables.upgraded["o2"]["d2"] == pytest.approx(6.0)
    # without upgrades d1 is unreachable from both origins
    assert "d1" not in tables.flooded["o1"]
    assert tables.flooded["o1"]["d2"] == pytest.approx(7.0)
    assert tables.flooded["o2"]["d2"] == pytest.approx(6.0)
    assert math.isinf(tables.worst_served["o1"])
    assert math.isinf(tables.worst_served["o2"])


def test_forced_exits_single_exit_fixed():
    fixed = forced_exits(forced_exit_instance())
    assert fixed.forced_y == frozenset({"kv"})
    assert fixed.forced_x == frozenset({("k", "kv")})
    assert fixed.budget_delta == pytest.approx(4.0)
    assert fixed.offset_delta == pytest.approx(3.0)  # 3 residents x 1 minute
    assert fixed.exit_vi_origins == ()
    assert not fixed.infeasible


def test_forced_exits_flags_unaffordable_fix():
    inst = build_instance(
        [O("k", 3), D("d", 5)],
        [RoadArc("kd", "k", "d", 1.0, vulnerable=True, mitigation_cost=4.0)],
        3.0, 4.0)
    fixed = forced_exits(inst)
    assert fixed.infeasible
    assert solve_exact(inst).status is SolveStatus.BUDGET_DISCONNECTED


def test_forced_exits_multi_exit_becomes_cut():
    inst = build_instance(
        [O("o", 2), T("t"), D("d", 5)],
        [RoadArc("v1", "o", "d", 1.0, vulnerable=True, mitigation_cost=1.0),
         RoadArc("v2", "o", "t", 2.0, vulnerable=True, mitigation_cost=1.0),
         RoadArc("td", "t", "d", 1.0)],
        2.0, 2.0)
    fixed = forced_exits(inst)
    assert fixed.forced_y == frozenset()
    assert fixed.exit_vi_origins == ("o",)
    assert not fixed.infeasible


def test_forced_exits_skips_mixed_exits():
    fixed = forced_exits(f1_instance(9.0))
    assert fixed.forced_y == frozenset() and fixed.exit_vi_origins == ()


def test_distance_dominated_masks_beyond_bound():
    inst = build_instance(
        [O("o", 2), T("t"), D("d", 5)],
        [RoadArc("od", "o", "d", 1.0), RoadArc("oe", "o", "d", 1.0),
         RoadArc("ot", "o", "t", 5.0), RoadArc("td", "t", "d", 1.0)],
        0.0, 0.0, budget_fraction=0.0)
    mask = distance_dominated(inst)
    assert mask.eliminated == {("o", "ot"): REASON_SP_BOUND,
                               ("o", "td"): REASON_SP_BOUND}
    assert mask.blocks("o", "ot") and not mask.blocks("o", "od")
    assert mask.arcs_blocked_for("o") == {"ot", "td"}
    # an arc landing exactly on the bound survives (strict comparison)
    assert not mask.blocks("o", "oe")


def test_distance_dominated_needs_full_flooded_reach():
    assert len(distance_dominated(f1_instance(9.0))) == 0


def test_component_mask_blocks_dead_pockets():
    inst = build_instance(
        [O("o", 2), T("c"), T("p1"), T("p2"), D("d", 5)],
        [RoadArc("oc", "o", "c", 1.0), RoadArc("cd", "c", "d", 1.0),
         RoadArc("cp", "c", "p1", 1.0), RoadArc("pc", "p1", "c", 1.0),
         RoadArc("pp", "p1", "p2", 1.0), RoadArc("pp2", "p2", "p1", 1.0)],
        0.0, 0.0, budget_fraction=0.0)
    mask = component_mask(inst)
    assert mask.eliminated == {("o", "pp"): REASON_COMPONENT,
                               ("o", "pp2"): REASON_COMPONENT}


def test_merge_masks_first_reason_wins():
    a = VariableMask({("o", "x"): "alpha"})
    b = VariableMask({("o", "x"): "beta", ("o", "y"): "beta"})
    merged = merge_masks(a, None, b)
    assert merged.eliminated == {("o", "x"): "alpha", ("o", "y"): "beta"}
    assert len(merge_masks()) == 0


def test_standard_reductions_bundle():
    fixed, mask = standard_reductions(forced_exit_instance())
    assert fixed.forced_y == frozenset({"kv"})
    assert isinstance(mask, VariableMask)


def test_reductions_never_move_the_optimum():
    agree = 0
    for seed in range(60):
        inst = synth.random_instance(seed)
        fixed, mask = standard_reductions(inst)
        cuts = Cuts(exit_origins=fixed.exit_vi_origins)
        plain = brute_force_oracle(inst)
        reduced = solve_exact(inst, mask=mask, fixings=fixed, cuts=cuts)
        assert plain.status == reduced.status, (seed, plain.status, reduced.status)
        if plain.status is SolveStatus.OPTIMAL:
            assert abs(plain.objective - reduced.objective) <= 1e-9, seed
            agree += 1
    assert agree >= 15
