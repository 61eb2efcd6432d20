"""floodmit: budget-constrained road upgrades for flood evacuation.

Given a road network where some arcs wash out in a flood, a repair budget,
and population centers that must reach capacity-limited facilities, find the
set of repairs that minimizes total population-weighted travel time — exactly.
"""
from .analysis import (budget_sweep, connectivity_critical, ewtt_ranking,
                       excess_travel_time, lower_bound, scenario_grid,
                       segment_rollup, upgrade_frequency)
from .heuristic import DistanceVectors, GreedySolution, build_distance_vectors, greedy_initial
from .ingest import (InstanceSpec, ProblemInstance, PurchaseUnit, SchemaError,
                     assign_capacities, build_instance, derive_costs,
                     instance_from_file, instance_json, load_network,
                     purchase_units, select_origins, upgrade_cost_cents,
                     with_network)
from .net import (ArcFilter, Network, NetworkError, NodeKind, RoadArc,
                  RoadNode, articulation_points, canonical_shortest_path,
                  shortest_paths)
from .pipeline import PipelineResult, solve_pipeline
from .prune import PrunedNetwork, PruneLog, PruneStats, expand_solution, prune_all
from .reductions import (Cuts, FixedUpgrades, SpTables, VariableMask,
                         component_mask, compute_sp_tables, distance_dominated,
                         forced_exits, standard_reductions)
from .solver import (MipModel, OracleLimits, OracleScaleError, Solution,
                     SolveOptions, SolveStatus, ValidationReport,
                     brute_force_oracle, build_model, export_lp, gap_to_rnfmp,
                     read_lp, solve_exact, validate_solution)

__version__ = "0.1.0"

__all__ = [
    "ArcFilter", "Cuts", "DistanceVectors", "FixedUpgrades", "GreedySolution",
    "InstanceSpec", "MipModel", "Network", "NetworkError", "NodeKind",
    "OracleLimits", "OracleScaleError", "PipelineResult", "ProblemInstance",
    "PruneLog", "PruneStats", "PrunedNetwork", "PurchaseUnit", "RoadArc",
    "RoadNode",
    "SchemaError", "Solution", "SolveOptions", "SolveStatus", "SpTables",
    "ValidationReport", "VariableMask", "articulation_points",
    "assign_capacities", "brute_force_oracle", "budget_sweep", "build_instance",
    "build_model", "build_distance_vectors", "canonical_shortest_path",
    "component_mask", "compute_sp_tables", "connectivity_critical",
    "derive_costs", "distance_dominated", "ewtt_ranking",
    "excess_travel_time", "expand_solution", "export_lp", "forced_exits",
    "gap_to_rnfmp", "greedy_initial", "instance_from_file", "instance_json",
    "load_network", "lower_bound", "prune_all", "purchase_units", "read_lp",
    "scenario_grid", "segment_rollup", "select_origins", "shortest_paths",
    "solve_exact", "solve_pipeline", "standard_reductions",
    "upgrade_cost_cents", "upgrade_frequency", "validate_solution",
    "with_network",
]
