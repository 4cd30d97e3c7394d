"""Instance and plan files, plus synthetic grid instances.

File formats:

* ``blocks.csv`` with header ``id,pop,vap,tvap,x,y,area,perimeter``
* ``adjacency.json``, an array of ``{"a", "b", "shared_border"}`` objects
* plan JSON ``{"assignment": {block_id: district_index}, "meta": {...}}``
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    IdMismatchError,
    InputError,
    LoadError,
    MissingColumnError,
    PartitionError,
    SchemaError,
)
from .model import AdjacencyGraph, BlockGroup, District, Instance, Plan, validate_plan

BLOCK_COLUMNS = ("id", "pop", "vap", "tvap", "x", "y", "area", "perimeter")
VAP_FRACTION = 0.75


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    n_districts: int
    epsilon: float = 0.05
    # ((x, y, w, h), minority_fraction) in cell units, x = column, y = row
    cluster_spec: tuple = ()
    background: float = 0.1
    base_pop: int = 100
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError("grid dimensions must be positive")
        if self.width * self.height < self.n_districts:
            raise InputError("more districts than cells")
        if not 0 <= self.noise < 1:
            raise InputError("noise must lie in [0, 1)")
        for _, frac in self.cluster_spec:
            if not 0 <= frac <= 1:
                raise InputError("minority fraction must lie in [0, 1]")
        if not 0 <= self.background <= 1:
            raise InputError("background fraction must lie in [0, 1]")


def grid_id(row: int, col: int, width: int = 2) -> str:
    return f"{row:0{width}d}-{col:0{width}d}"


def make_grid(spec: GridSpec) -> Instance:
    """Rook-adjacency grid of unit squares with planted minority rectangles."""
    rng = np.random.default_rng(spec.seed)
    w = len(str(max(spec.width, spec.height) - 1))
    jitter = rng.uniform(-spec.noise, spec.noise, size=(spec.height, spec.width))
    blocks = {}
    for row in range(spec.height):
        for col in range(spec.width):
            frac = spec.background
            for (x, y, cw, ch), f in spec.cluster_spec:
                if x <= col < x + cw and y <= row < y + ch:
                    frac = f
            pop = int(round(spec.base_pop * (1 + jitter[row, col])))
            vap = int(round(VAP_FRACTION * pop))
            tvap = int(round(frac * vap))
            bid = grid_id(row, col, w)
            blocks[bid] = BlockGroup(bid, pop, vap, tvap, (col + 0.5, row + 0.5), 1.0, 4.0)
    edges = []
    for row in range(spec.height):
        for col in range(spec.width):
            if col + 1 < spec.width:
                edges.append((grid_id(row, col, w), grid_id(row, col + 1, w), 1.0))
            if row + 1 < spec.height:
                edges.append((grid_id(row, col, w), grid_id(row + 1, col, w), 1.0))
    meta = {
        "kind": "grid",
        "width": spec.width,
        "height": spec.height,
        "clusters": [[list(r), f] for r, f in spec.cluster_spec],
        "background": spec.background,
        "seed": spec.seed,
    }
    return Instance(blocks, AdjacencyGraph(blocks, edges), spec.n_districts, spec.epsilon, meta)


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def write_instance(inst: Instance, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "blocks.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BLOCK_COLUMNS)
        for bid in inst.order:
            b = inst.blocks[bid]
            writer.writerow([b.id, b.pop, b.vap, b.tvap, _fmt(b.centroid[0]), _fmt(b.centroid[1]),
                             _fmt(b.area), _fmt(b.perimeter)])
    adjacency = [{"a": a, "b": b, "shared_border": length} for a, b, length in inst.graph.edge_items()]
    write_json(out / "adjacency.json", adjacency)
    write_json(out / "instance.json", {
        "n_districts": inst.n_districts,
        "epsilon": inst.epsilon,
        "meta": dict(inst.meta),
    })


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_blocks(path) -> dict[str, BlockGroup]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BLOCK_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise MissingColumnError(f"{path}: missing columns {missing}")
        blocks = {}
        for line, row in enumerate(reader, start=2):
            try:
                b = BlockGroup(
                    row["id"],
                    int(row["pop"]),
                    int(row["vap"]),
                    int(row["tvap"]),
                    (float(row["x"]), float(row["y"])),
                    float(row["area"]),
                    float(row["perimeter"]),
                )
            except (TypeError, ValueError) as exc:
                raise LoadError(f"{path}:{line}: {exc}") from exc
            if b.id in blocks:
                raise LoadError(f"{path}:{line}: duplicate block id {b.id!r}")
            blocks[b.id] = b
    return blocks


def load_instance(blocks_path, adjacency_path, n: int, epsilon: float, meta=None) -> Instance:
    blocks = _read_blocks(blocks_path)
    with open(adjacency_path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{adjacency_path}: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError(f"{adjacency_path}: expected a JSON array")
    edges = []
    for k, e in enumerate(raw):
        try:
            a, b, length = str(e["a"]), str(e["b"]), float(e["shared_border"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{adjacency_path}: bad edge #{k}: {e!r}") from exc
        for v in (a, b):
            if v not in blocks:
                raise IdMismatchError(f"{adjacency_path}: edge #{k} references unknown block {v!r}")
        edges.append((a, b, length))
    graph = AdjacencyGraph(blocks, edges)
    for bid, blk in blocks.items():
        shared = sum(graph.shared_border(bid, o) for o in graph.neighbors(bid))
        if shared > blk.perimeter * (1 + 1e-9):
            raise DataError(f"block {bid!r}: shared borders exceed its perimeter")
    return Instance(blocks, graph, n, epsilon, meta or {})


def load_instance_dir(path, n: int | None = None, epsilon: float | None = None) -> Instance:
    """Load ``blocks.csv`` + ``adjacency.json`` and optional ``instance.json`` defaults."""
    path = Path(path)
    defaults = {}
    if (path / "instance.json").exists():
        with open(path / "instance.json", encoding="utf-8") as fh:
            defaults = json.load(fh)
    n = n if n is not None else defaults.get("n_districts")
    epsilon = epsilon if epsilon is not None else defaults.get("epsilon")
    if n is None or epsilon is None:
        raise InputError(f"{path}: district count and epsilon must be given")
    meta = dict(defaults.get("meta", {}))
    meta["path"] = os.fspath(path)
    return load_instance(path / "blocks.csv", path / "adjacency.json", int(n), float(epsilon), meta)


def plan_to_json(plan: Plan) -> dict:
    meta = dict(plan.provenance)
    sources = [d.source for d in plan.districts]
    if any(s is not None for s in sources):
        meta["sources"] = sources
    return {"assignment": dict(sorted(plan.assignment().items())), "meta": meta}


def save_plan(plan: Plan, path) -> None:
    write_json(path, plan_to_json(plan))


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise PartitionError(f"block {k!r} assigned more than once")
        out[k] = v
    return out


def plan_from_json(obj: dict, inst: Instance, check_balance: bool = True) -> Plan:
    if not isinstance(obj, dict) or not isinstance(obj.get("assignment"), dict):
        raise SchemaError("plan file needs an 'assignment' object")
    meta = obj.get("meta", {}) or {}
    n = inst.n_districts
    members: list[set[str]] = [set() for _ in range(n)]
    for bid, k in obj["assignment"].items():
        if not isinstance(k, int) or isinstance(k, bool) or not 0 <= k < n:
            raise SchemaError(f"block {bid!r}: district index {k!r} outside 0..{n - 1}")
        members[k].add(bid)
    for k, m in enumerate(members):
        if not m:
            raise PartitionError(f"district {k} is empty", k)
    sources = meta.pop("sources", None) or [None] * n
    if len(sources) != n:
        raise SchemaError("meta.sources length does not match district count")
    plan = Plan(tuple(District(frozenset(m), s) for m, s in zip(members, sources)), meta)
    validate_plan(plan, inst, check_balance=check_balance)
    return plan


def load_plan(path, inst: Instance, check_balance: bool = True) -> Plan:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh, object_pairs_hook=_no_duplicates)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
    return plan_from_json(obj, inst, check_balance)
