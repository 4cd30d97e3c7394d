"""Districting plans that maximize the number of majority-T districts."""
from .beta import beta_reoptimize
from .bip import BinaryProgram, SolverConfig, solve
from .io import GridSpec, load_instance, load_instance_dir, load_plan, make_grid, save_plan, write_instance
from .local import lemma1_check, local_reoptimize
from .metrics import majority_count, plan_report, polsby_popper
from .model import AdjacencyGraph, BlockGroup, District, Instance, Plan, validate_plan
from .recom import BurstParams, recom_step, short_bursts
from .select import CandidatePool, select_plan
from .tree import ShpParams, ShpTree, collect_leaves, generate_tree

__version__ = "0.1.0"

__all__ = [
    "AdjacencyGraph", "BinaryProgram", "BlockGroup", "BurstParams", "CandidatePool", "District", "GridSpec",
    "Instance", "Plan", "ShpParams", "ShpTree", "SolverConfig", "beta_reoptimize", "collect_leaves",
    "generate_tree", "lemma1_check", "load_instance", "load_instance_dir", "load_plan", "local_reoptimize",
    "majority_count", "make_grid", "plan_report", "polsby_popper", "recom_step", "save_plan", "select_plan",
    "short_bursts", "solve", "validate_plan", "write_instance",
]
