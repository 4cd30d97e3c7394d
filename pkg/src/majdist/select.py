"""Set-partitioning master: pick n disjoint leaf districts maximizing the majority count."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bip import OPTIMAL, BinaryProgram, SolverConfig
from .errors import InputError, InternalConsistencyError
from .model import District, Instance, Plan, validate_plan
from .partition import dispersion, region_diameter
from .tree import collect_leaves


@dataclass
class CandidatePool:
    districts: list  # (District, majority_flag, partition key)
    dispersion: list = field(default_factory=list)
    block_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dispersion:
            self.dispersion = [0.0] * len(self.districts)
        self.block_index = {}
        for k, (d, _, _) in enumerate(self.districts):
            for j in d.blocks:
                self.block_index.setdefault(j, []).append(k)

    @classmethod
    def from_tree(cls, tree, inst: Instance) -> "CandidatePool":
        """Leaves of ``tree``, deduplicated by block set, with normalized dispersion."""
        seen = set()
        districts, disp = [], []
        for district, flag, key in collect_leaves(tree, inst):
            if district.blocks in seen:
                continue
            seen.add(district.blocks)
            districts.append((district, flag, key))
            disp.append(_leaf_dispersion(tree, key, district, inst))
        return cls(districts, disp)


def _leaf_dispersion(tree, key, district, inst) -> float:
    if key is None:
        return 0.0
    node, part = tree.partition(key)
    for center, child in zip(part.centers, part.children):
        if tree.nodes[child].region == district.blocks:
            raw = dispersion(((center, j) for j in district.blocks), part.alpha, inst)
            return raw / (region_diameter(node.region, inst) ** part.alpha * inst.ideal_pop)
    return 0.0


def _master(pool: CandidatePool, inst: Instance) -> BinaryProgram:
    n_cand = len(pool.districts)
    prog = BinaryProgram(n_cand, np.array([1.0 if flag else 0.0 for _, flag, _ in pool.districts]))
    for j in sorted(inst.blocks):
        prog.add_constraint({k: 1.0 for k in pool.block_index[j]}, "=", 1)
    prog.add_constraint({k: 1.0 for k in range(n_cand)}, "=", inst.n_districts)
    return prog


def select_plan(pool: CandidatePool, inst: Instance, solver: SolverConfig | None = None,
                provenance: dict | None = None) -> Plan:
    solver = solver or SolverConfig()
    uncovered = sorted(set(inst.blocks) - set(pool.block_index))
    if uncovered:
        raise InputError(f"pool does not cover blocks {uncovered[:5]}")
    prog = _master(pool, inst)
    first = solver.solve(prog)
    if first.status != OPTIMAL:
        raise InternalConsistencyError(f"master problem {first.status}: tree leaves do not tile the region")
    best = int(round(first.objective_value))

    # Second pass: hold the majority count, minimize total dispersion.
    prog.add_constraint({k: 1.0 for k, (_, flag, _) in enumerate(pool.districts) if flag}, "=", best)
    prog.objective = -np.asarray(pool.dispersion, dtype=float)
    second = solver.solve(prog)
    chosen = second.assignment if second.assignment is not None else first.assignment
    picked = [k for k in range(len(pool.districts)) if chosen[k]]

    ds = [pool.districts[k][0] for k in picked]
    for a in range(len(ds)):
        for b in range(a + 1, len(ds)):
            if ds[a].blocks & ds[b].blocks:
                raise InternalConsistencyError("selected districts overlap")
    ds.sort(key=lambda d: min(d.blocks))
    plan = Plan(tuple(District(d.blocks, d.source) for d in ds), dict(provenance or {}, stage="select"))
    validate_plan(plan, inst)
    if sum(inst.is_majority(d.blocks) for d in ds) != best:
        raise InternalConsistencyError("selected plan majority count disagrees with master objective")
    return plan
