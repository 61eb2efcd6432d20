"""What-if analytics on top of the exact solver.

* ``lower_bound`` / ``excess_travel_time`` — the full-budget optimum is the
  best any plan can do; the gap between a budget-limited optimum and that
  floor is the travel time the missing dollars cost.
* ``budget_sweep`` — re-solve across budget fractions; objectives are
  nonincreasing in budget and the excess hits zero at full budget.
* ``ewtt_ranking`` — criticality of individual roads: weighted extra minutes
  summed over every origin/facility pair when one road is closed (pairs a
  closure disconnects are flagged and excluded from the sum).
* ``connectivity_critical`` — roads whose closure strands some origin
  entirely.
* ``upgrade_frequency`` — how often each road is bought across a set of
  plans (e.g. a sweep), a robustness signal.
* ``scenario_grid`` — cross products of derivation parameters, each group
  anchored to its own full-budget floor.

Everything here is deterministic; CSV writers emit stable bytes.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .ingest import InstanceSpec, ProblemInstance, instance_from_file
from .net import shortest_paths
from .pipeline import PipelineResult, solve_pipeline
from .solver import SOLVED, SolveOptions, SolveStatus


def _with_budget(instance: ProblemInstance, fraction: float) -> ProblemInstance:
    spec = dataclasses.replace(instance.spec, budget_fraction=fraction)
    return dataclasses.replace(instance, spec=spec,
                               budget=fraction * instance.b_hat)


def lower_bound(instance: ProblemInstance,
                options: SolveOptions | None = None,
                **pipeline_flags: bool) -> tuple[float | None, PipelineResult]:
    """Optimum with the budget raised to the full repair bill.

    Returns (objective, full pipeline result); the objective is None when
    even the fully repaired network cannot host everyone.
    """
    result = solve_pipeline(_with_budget(instance, 1.0), options=options,
                            **pipeline_flags)
    sol = result.solution
    return (sol.objective if sol.status in SOLVED else None), result


def excess_travel_time(objective: float | None,
                       floor: float | None) -> float | None:
    if objective is None or floor is None:
        return None
    return objective - floor


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    budget: float
    status: SolveStatus
    objective: float | None
    excess: float | None
    spent: float
    upgrades: tuple[str, ...]


def budget_sweep(instance: ProblemInstance, fractions: Sequence[float],
                 options: SolveOptions | None = None,
                 **pipeline_flags: bool) -> list[SweepRow]:
    """Solve the instance at each budget fraction (deduplicated, ascending)."""
    net = instance.network
    todo = sorted({float(f) for f in fractions})
    if any(f < 0 for f in todo):
        raise ValueError("budget fractions must be nonnegative")
    floor, _ = lower_bound(instance, options=options, **pipeline_flags)
    rows: list[SweepRow] = []
    for f in todo:
        result = solve_pipeline(_with_budget(instance, f), options=options,
                                **pipeline_flags)
        sol = result.solution
        spent = sum(net.arcs[a].mitigation_cost for a in sol.upgrades)
        rows.append(SweepRow(
            fraction=f, budget=f * instance.b_hat, status=sol.status,
            objective=sol.objective,
            excess=excess_travel_time(sol.objective, floor),
            spent=spent, upgrades=sol.upgrades))
    return rows


# -- road criticality ---------------------------------------------------------


@dataclass(frozen=True)
class EwttRow:
    arc: str
    segment: str
    ewtt: float
    pairs: int                 # origin/facility pairs that detoured
    disconnected_pairs: int    # pairs the closure cuts apart (not summed)
    disconnects: bool


def _pair_distances(net, origins, dest_ids, admit=None) -> dict[str, dict[str, float]]:
    table: dict[str, dict[str, float]] = {}
    for o in origins:
        dist = shortest_paths(net, o.id) if admit is None else \
            shortest_paths(net, o.id, admit)
        table[o.id] = {d: dist[d] for d in dest_ids if d in dist}
    return table


def ewtt_ranking(instance: ProblemInstance,
                 arcs: Iterable[str] | None = None) -> list[EwttRow]:
    """Weighted extra minutes, per road closure, over all origin/facility
    pairs (fully repaired network as the baseline).

    Ranks vulnerable roads by default.  O(|arcs| x |origins|) shortest-path
    runs; fine for planning-sized networks.
    """
    net = instance.network
    origins = net.origins()
    dest_ids = [d.id for d in net.destinations()]
    base = _pair_distances(net, origins, dest_ids)
    candidates = sorted(arcs) if arcs is not None else \
        [a.id for a in net.vulnerable_arcs()]
    rows: list[EwttRow] = []
    for aid in candidates:
        if aid not in net.arcs:
            raise KeyError(f"unknown arc {aid!r}")
        removed = _pair_distances(net, origins, dest_ids,
                                  lambda arc: arc.id != aid)
        total = 0.0
        pairs = 0
        cut = 0
        for o in origins:
            for d, before in base[o.id].items():
                after = removed[o.id].get(d)
                if after is None:
                    cut += 1
                    continue
                delta = after - before
                if delta > 0:
                    total += o.weight * delta
                    pairs += 1
        rows.append(EwttRow(arc=aid, segment=net.arcs[aid].segment,
                            ewtt=total, pairs=pairs, disconnected_pairs=cut,
                            disconnects=cut > 0))
    rows.sort(key=lambda r: (-r.ewtt, r.arc))
    return rows


@dataclass(frozen=True)
class SegmentEwtt:
    segment: str
    ewtt: float                # worst member closure
    arcs: tuple[str, ...]
    disconnects: bool


def segment_rollup(rows: Sequence[EwttRow]) -> list[SegmentEwtt]:
    """Fold per-arc closures to segments: a two-way road is as critical as
    its worst direction, so members combine by max, not sum."""
    by_seg: dict[str, list[EwttRow]] = {}
    for r in rows:
        by_seg.setdefault(r.segment, []).append(r)
    out = [SegmentEwtt(segment=seg,
                       ewtt=max(r.ewtt for r in members),
                       arcs=tuple(sorted(r.arc for r in members)),
                       disconnects=any(r.disconnects for r in members))
           for seg, members in by_seg.items()]
    out.sort(key=lambda s: (-s.ewtt, s.segment))
    return out


def connectivity_critical(instance: ProblemInstance,
                          arcs: Iterable[str] | None = None) -> tuple[str, ...]:
    """Roads whose closure leaves some origin with no facility at all."""
    net = instance.network
    origins = net.origins()
    dest_ids = {d.id for d in net.destinations()}
    candidates = sorted(arcs) if arcs is not None else list(net.arcs)
    critical: list[str] = []
    for aid in candidates:
        if aid not in net.arcs:
            raise KeyError(f"unknown arc {aid!r}")
        for o in origins:
            dist = shortest_paths(net, o.id, lambda arc: arc.id != aid)
            if not (dist.keys() & dest_ids):
                critical.append(aid)
                break
    return tuple(critical)


@dataclass(frozen=True)
class FrequencyRow:
    arc: str
    count: int
    share: float


def upgrade_frequency(plans: Iterable[Any]) -> list[FrequencyRow]:
    """How often each road appears across plans (Solutions or sweep rows)."""
    counts: dict[str, int] = {}
    runs = 0
    for plan in plans:
        upgrades = getattr(plan, "upgrades", None)
        if upgrades is None:
            raise TypeError(f"plan {plan!r} has no upgrades")
        runs += 1
        for aid in upgrades:
            counts[aid] = counts.get(aid, 0) + 1
    rows = [FrequencyRow(arc=a, count=c, share=c / runs if runs else 0.0)
            for a, c in counts.items()]
    rows.sort(key=lambda r: (-r.count, r.arc))
    return rows


# -- scenario grid ------------------------------------------------------------


@dataclass(frozen=True)
class GridRow:
    spec: InstanceSpec
    status: SolveStatus
    objective: float | None
    excess: float | None


def scenario_grid(source: str | Path | Mapping[str, Any],
                  specs: Sequence[InstanceSpec],
                  options: SolveOptions | None = None,
                  **pipeline_flags: bool) -> list[GridRow]:
    """Solve one network file under many derivation settings.

    The excess column compares each run to the full-budget floor of its own
    parameter group (same settings, budget fraction 1), so rows are
    comparable within a group even when groups disagree about who evacuates.
    """
    floors: dict[InstanceSpec, float | None] = {}
    rows: list[GridRow] = []
    for spec in specs:
        instance = instance_from_file(source, spec)
        group = dataclasses.replace(spec, budget_fraction=1.0)
        if group not in floors:
            if spec.budget_fraction == 1.0:
                result = solve_pipeline(instance, options=options,
                                        **pipeline_flags)
                sol = result.solution
                floors[group] = (sol.objective if sol.status in SOLVED
                                 else None)
                rows.append(GridRow(spec, sol.status, sol.objective,
                                    excess_travel_time(sol.objective,
                                                       floors[group])))
                continue
            floors[group], _ = lower_bound(instance, options=options,
                                           **pipeline_flags)
        result = solve_pipeline(instance, options=options, **pipeline_flags)
        sol = result.solution
        rows.append(GridRow(spec, sol.status, sol.objective,
                            excess_travel_time(sol.objective, floors[group])))
    return rows


# -- stable serialization -----------------------------------------------------


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".10g")
    if isinstance(value, SolveStatus):
        return value.value
    return str(value)


def _write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]],
               path: str | Path | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def sweep_csv(rows: Sequence[SweepRow], path: str | Path | None = None) -> str:
    return _write_csv(
        ("fraction", "budget", "status", "objective", "excess", "spent",
         "upgrades"),
        ((r.fraction, r.budget, r.status, r.objective, r.excess, r.spent,
          "|".join(r.upgrades)) for r in rows),
        path)


def ewtt_csv(rows: Sequence[EwttRow], path: str | Path | None = None) -> str:
    return _write_csv(
        ("arc", "segment", "ewtt", "pairs", "disconnected_pairs",
         "disconnects"),
        ((r.arc, r.segment, r.ewtt, r.pairs, r.disconnected_pairs,
          int(r.disconnects)) for r in rows),
        path)


def segment_csv(rows: Sequence[SegmentEwtt],
                path: str | Path | None = None) -> str:
    return _write_csv(
        ("segment", "ewtt", "arcs", "disconnects"),
        ((r.segment, r.ewtt, "|".join(r.arcs), int(r.disconnects))
         for r in rows),
        path)


def frequency_csv(rows: Sequence[FrequencyRow],
                  path: str | Path | None = None) -> str:
    return _write_csv(
        ("arc", "count", "share"),
        ((r.arc, r.count, r.share) for r in rows),
        path)


def grid_csv(rows: Sequence[GridRow], path: str | Path | None = None) -> str:
    return _write_csv(
        ("p", "alpha", "capacity_policy", "weight_policy", "budget_fraction",
         "facilities", "status", "objective", "excess"),
        ((r.spec.p, r.spec.alpha, r.spec.capacity_policy,
          r.spec.weight_policy, r.spec.budget_fraction,
          "|".join(r.spec.facilities or ()), r.status, r.objective, r.excess)
         for r in rows),
        path)
