"""Planning-layer reports: sweeps, criticality rankings, scenario grids."""
from __future__ import annotations

import pytest

from floodmit.analysis import (EwttRow, budget_sweep, connectivity_critical,
                               ewtt_csv, ewtt_ranking, frequency_csv,
                               grid_csv, lower_bound, scenario_grid,
                               segment_csv, segment_rollup, sweep_csv,
                               upgrade_frequency)
from floodmit.ingest import InstanceSpec
from floodmit.net import NodeKind, RoadArc, RoadNode
from floodmit.solver import SolveStatus
from floodmit import synth

from conftest import bridge_instance, build_instance, f1_instance


def grid_file():
    """A direct washed-out road with a slow dry backup, as a file payload."""
    return {
        "schema_version": 1,
        "nodes": [{"id": "n1", "residents": 8},
                  {"id": "n2", "residents": 0},
                  {"id": "n3", "residents": 0, "facility_beds": 20}],
        "arcs": [
            {"id": "r1", "from": "n1", "to": "n3", "length_miles": 1.0,
             "speed_mph": 60, "lanes": 2, "oneway": True, "vulnerable": True},
            {"id": "r2", "from": "n1", "to": "n2", "length_miles": 2.0,
             "speed_mph": 30, "lanes": 1, "oneway": True},
            {"id": "r3", "from": "n2", "to": "n3", "length_miles": 2.0,
             "speed_mph": 30, "lanes": 1, "oneway": True}],
        "facilities": ["n3"],
    }


def detour_instance():
    """One washed-out shortcut whose closure costs 3 extra minutes."""
    nodes = [RoadNode("o", NodeKind.ORIGIN, residents=4.0, weight=4.0),
             RoadNode("d", NodeKind.DESTINATION, capacity=9.0)]
    arcs = [RoadArc("v1", "o", "d", 2.0, vulnerable=True, mitigation_cost=3.0,
                    segment_id="s1"),
            RoadArc("v1r", "d", "o", 2.0, vulnerable=True, mitigation_cost=3.0,
                    segment_id="s1"),
            RoadArc("b", "o", "d", 5.0)]
    return build_instance(nodes, arcs, 6.0, 6.0)


def test_lower_bound_is_full_budget_optimum():
    lb, result = lower_bound(f1_instance(0.0))
    assert lb == pytest.approx(75.0)
    assert result.solution.status is SolveStatus.OPTIMAL


def test_budget_sweep_known_curve():
    rows = budget_sweep(f1_instance(9.0), [0.0, 4 / 9, 5 / 9, 1.0])
    assert [r.objective for r in rows] == pytest.approx([100.0, 80.0, 75.0, 75.0])
    assert [r.excess for r in rows] == pytest.approx([25.0, 5.0, 0.0, 0.0])
    assert [r.budget for r in rows] == pytest.approx([0.0, 4.0, 5.0, 9.0])
    assert rows[0].upgrades == () and rows[-1].upgrades == ("a4",)
    assert rows[-1].spent == pytest.approx(5.0)


def test_budget_sweep_dedupes_and_validates():
    rows = budget_sweep(f1_instance(9.0), [1.0, 0.0, 1.0])
    assert [r.fraction for r in rows] == [0.0, 1.0]
    with pytest.raises(ValueError):
        budget_sweep(f1_instance(9.0), [-0.1])


def test_sweep_monotone_on_random_instances():
    fractions = [0.0, 0.25, 0.5, 0.75, 1.0]
    solved_curves = 0
    for seed in range(30):
        inst = synth.random_instance(seed)
        rows = budget_sweep(inst, fractions)
        objs = [r.objective for r in rows if r.objective is not None]
        if len(objs) < 2:
            continue
        solved_curves += 1
        assert all(a >= b - 1e-9 for a, b in zip(objs, objs[1:])), seed
        for r in rows:
            if r.excess is not None:
                assert r.excess >= -1e-9
        if rows[-1].excess is not None:
            assert rows[-1].excess == pytest.approx(0.0, abs=1e-9)
    assert solved_curves >= 8


def test_ewtt_weighs_detours():
    rows = ewtt_ranking(detour_instance())
    assert [r.arc for r in rows] == ["v1", "v1r"]
    top = rows[0]
    assert top.ewtt == pytest.approx(12.0)   # 4 residents x 3 extra minutes
    assert top.pairs == 1 and not top.disconnects
    assert rows[1].ewtt == 0.0               # reverse leg carries no pair
    with pytest.raises(KeyError):
        ewtt_ranking(detour_instance(), arcs=["nope"])


def test_ewtt_marks_disconnections():
    rows = ewtt_ranking(f1_instance(9.0))
    assert [(r.arc, r.ewtt, r.disconnected_pairs, r.disconnects)
            for r in rows] == [("a2", 0.0, 1, True), ("a4", 0.0, 1, True)]


def test_ewtt_explicit_arcs_cover_safe_roads():
    rows = ewtt_ranking(detour_instance(), arcs=["b", "v1"])
    by_arc = {r.arc: r for r in rows}
    assert by_arc["b"].ewtt == 0.0 and by_arc["b"].pairs == 0
    assert by_arc["v1"].ewtt == pytest.approx(12.0)


def test_segment_rollup_takes_worst_member():
    segs = segment_rollup(ewtt_ranking(detour_instance()))
    (row,) = segs
    assert row.segment == "s1"
    assert row.ewtt == pytest.approx(12.0)
    assert row.arcs == ("v1", "v1r")
    assert not row.disconnects


def test_connectivity_critical_bridge():
    assert connectivity_critical(bridge_instance(coupled=True)) == ("w1", "w3")
    # brute force must agree arc by arc
    inst = bridge_instance(coupled=True)
    net = inst.network
    from floodmit.net import shortest_paths
    dests = {d.id for d in net.destinations()}
    for aid in net.arcs:
        cut = any(not (shortest_paths(net, o.id,
                                      lambda a: a.id != aid).keys() & dests)
                  for o in net.origins())
        assert cut == (aid in ("w1", "w3")), aid


def test_upgrade_frequency_counts_and_shares():
    rows = budget_sweep(f1_instance(9.0), [0.0, 4 / 9, 5 / 9, 1.0])
    freq = upgrade_frequency(rows)
    assert [(r.arc, r.count, r.share) for r in freq] == [
        ("a4", 2, 0.5), ("a2", 1, 0.25)]
    with pytest.raises(TypeError):
        upgrade_frequency([object()])


def test_scenario_grid_shares_group_floor():
    specs = [InstanceSpec(p=1.0, alpha=0.5, budget_fraction=0.0),
             InstanceSpec(p=1.0, alpha=0.5, budget_fraction=1.0),
             InstanceSpec(p=1.0, alpha=0.5, budget_fraction=0.5)]
    rows = scenario_grid(grid_file(), specs)
    assert [r.status for r in rows] == [SolveStatus.OPTIMAL] * 3
    assert [r.objective for r in rows] == pytest.approx([64.0, 8.0, 64.0])
    assert [r.excess for r in rows] == pytest.approx([56.0, 0.0, 56.0])


def test_csv_writers_exact_and_stable(tmp_path):
    rows = budget_sweep(f1_instance(9.0), [0.0, 4 / 9, 5 / 9, 1.0])
    text = sweep_csv(rows)
    assert text.splitlines()[0] == \
        "fraction,budget,status,objective,excess,spent,upgrades"
    assert text.splitlines()[1] == "0,0,Optimal,100,25,0,"
    assert text.splitlines()[2] == "0.4444444444,4,Optimal,80,5,4,a2"
    assert text == sweep_csv(rows)
    p = tmp_path / "sweep.csv"
    sweep_csv(rows, p)
    assert p.read_text() == text

    e_text = ewtt_csv(ewtt_ranking(detour_instance()))
    assert e_text.splitlines()[1] == "v1,s1,12,1,0,0"
    s_text = segment_csv(segment_rollup(ewtt_ranking(detour_instance())))
    assert s_text.splitlines()[1] == "s1,12,v1|v1r,0"
    f_text = frequency_csv(upgrade_frequency(rows))
    assert f_text.splitlines()[1] == "a4,2,0.5"
    g_text = grid_csv(scenario_grid(
        grid_file(), [InstanceSpec(p=1.0, alpha=0.5, budget_fraction=1.0)]))
    assert g_text.splitlines()[0] == ("p,alpha,capacity_policy,weight_policy,"
                                      "budget_fraction,facilities,status,"
                                      "objective,excess")
    assert "Optimal,8,0" in g_text.splitlines()[1]
