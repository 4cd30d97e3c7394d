"""Plan scoring: majority counts, balance, and Polsby-Popper compactness."""
from __future__ import annotations

import csv
import io
import math

from .errors import DataError
from .model import District, Instance, Plan, pop_deviation

REPORT_FIELDS = ("majority_count", "n_districts", "avg_polsby_popper", "min_polsby_popper", "max_abs_deviation")


def _blocks(district):
    return district.blocks if isinstance(district, District) else frozenset(district)


def majority_count(plan: Plan, inst: Instance) -> int:
    return sum(inst.is_majority(d.blocks) for d in plan.districts)


def district_perimeter(district, inst: Instance) -> float:
    """Sum of block perimeters less twice every border shared inside the district."""
    blocks = _blocks(district)
    total = sum(inst.blocks[j].perimeter for j in blocks)
    internal = 0.0
    for j in blocks:
        for k in inst.graph.neighbors(j):
            if k in blocks and j < k:
                internal += inst.graph.shared_border(j, k)
    return total - 2 * internal


def polsby_popper(district, inst: Instance) -> float:
    blocks = _blocks(district)
    area = sum(inst.blocks[j].area for j in blocks)
    perim = district_perimeter(blocks, inst)
    if perim <= 0 or area <= 0:
        raise DataError(f"nonpositive derived perimeter {perim} for district")
    return 4 * math.pi * area / perim ** 2


def plan_report(plan: Plan, inst: Instance) -> dict:
    pp = [polsby_popper(d, inst) for d in plan.districts]
    devs = [pop_deviation(d, inst) for d in plan.districts]
    return {
        "majority_count": majority_count(plan, inst),
        "n_districts": len(plan.districts),
        "avg_polsby_popper": sum(pp) / len(pp),
        "min_polsby_popper": min(pp),
        "max_abs_deviation": max(abs(v) for v in devs),
        "polsby_popper": pp,
        "pop_deviation": devs,
        "majority": [inst.is_majority(d.blocks) for d in plan.districts],
        "tvap_share": [inst.tvap(d.blocks) / inst.vap(d.blocks) if inst.vap(d.blocks) else 0.0
                       for d in plan.districts],
        "sizes": [len(d.blocks) for d in plan.districts],
        "populations": [inst.pop(d.blocks) for d in plan.districts],
    }


def report_csv(report: dict, label: str = "", header: bool = True) -> str:
    """One CSV row of the scalar report fields, for aggregating runs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(("label",) + REPORT_FIELDS)
    writer.writerow([label] + [report[k] for k in REPORT_FIELDS])
    return buf.getvalue()
