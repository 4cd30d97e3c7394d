"""Restore compactness in a selected plan without losing majority districts.

For every leaf-producing tree partition fully present in the plan, the
majority program is re-solved with the recorded centers and exponent while
the dispersion weight is pushed as high as possible by bisection.
"""
from __future__ import annotations

import logging

from .bip import SolverConfig
from .errors import InputError
from .model import District, Instance, Plan, validate_plan
from .partition import PartitionSpec, dispersion, solve_partition

log = logging.getLogger(__name__)

DISP_TOL = 1e-9


def _original_children(tree, key):
    node, part = tree.partition(key)
    regions = [tree.nodes[c].region for c in part.children]
    caps = [tree.nodes[c].capacity for c in part.children]
    return node, part, regions, caps


def reoptimize_partition(spec0: PartitionSpec, children: list, inst: Instance, b: int = 30,
                         solver: SolverConfig | None = None) -> dict:
    """Bisection over the dispersion weight for one partition.

    ``children`` are the currently adopted subregions, aligned with
    ``spec0.centers``. Returns a record with the adopted subregions (or the
    originals), probe betas and solve count.
    """
    solver = solver or SolverConfig()
    target = sum(inst.is_majority(c) for c in children)
    disp0 = dispersion(((i, j) for i, sub in zip(spec0.centers, children) for j in sub), spec0.alpha, inst)
    solves = 0

    def probe(beta):
        nonlocal solves
        solves += 1
        res = solve_partition(spec0.with_beta(beta), inst, solver)
        if res is None:
            return None
        if not all(inst.is_balanced(sub) for sub in res.subregions.values()):
            return None
        return res

    def keeps_count(res):
        return (res is not None and res.majority_count == target
                and res.dispersion_value <= disp0 * (1 + DISP_TOL) + DISP_TOL)

    r0 = probe(0.0)
    m0 = r0.majority_count if r0 is not None else target
    r1 = probe(1.0)
    best, best_beta, probes = None, None, [0.0, 1.0]
    if keeps_count(r1):
        best, best_beta = r1, 1.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(b):
            mid = (lo + hi) / 2
            probes.append(mid)
            res = probe(mid)
            if keeps_count(res):
                lo = mid
                best, best_beta = res, mid
            else:
                hi = mid
    if best is None and keeps_count(r0):
        best, best_beta = r0, 0.0
    adopted = [best.subregions[c] for c in spec0.centers] if best is not None else list(children)
    return {
        "target": target,
        "m0": m0,
        "beta": best_beta,
        "solves": solves,
        "probes": probes,
        "dispersion_before": disp0,
        "dispersion_after": best.dispersion_value if best is not None else disp0,
        "subregions": adopted,
    }


def beta_reoptimize(plan: Plan, tree, inst: Instance, b: int = 30, solver: SolverConfig | None = None) -> Plan:
    if b < 1:
        raise InputError("bisection budget must be positive")
    if all(d.source is None for d in plan.districts):
        raise InputError("plan districts carry no tree provenance")
    index = {d.blocks: k for k, d in enumerate(plan.districts)}
    keys = sorted({d.source for d in plan.districts if d.source is not None},
                  key=lambda s: tuple(int(v) for v in s.split(":")))
    new_plan = plan
    records = []
    for key in keys:
        try:
            node, part, regions, caps = _original_children(tree, key)
        except (KeyError, IndexError, ValueError) as exc:
            raise InputError(f"plan references partition {key!r} missing from the tree") from exc
        if any(c != 1 for c in caps) or not all(r in index for r in regions):
            continue
        slots = [index[r] for r in regions]
        spec0 = PartitionSpec(node.region, part.centers, part.capacities, part.alpha, 0.0,
                              part.deviation, True)
        rec = reoptimize_partition(spec0, regions, inst, b, solver)
        adopted = rec.pop("subregions")
        new_plan = new_plan.replace(slots, [District(r, key) for r in adopted])
        rec["partition"] = key
        records.append(rec)
        log.info("partition %s: count %d, beta %s, %d solves", key, rec["target"], rec["beta"], rec["solves"])
    prov = dict(plan.provenance)
    prov.update(stage="beta_reopt", beta_steps=b, beta_reopt=records)
    out = Plan(new_plan.districts, prov)
    validate_plan(out, inst)
    return out
