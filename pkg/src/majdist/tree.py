"""Hierarchical partition tree whose capacity-1 leaves form the candidate pool."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bip import SolverConfig
from .errors import GenerationError, InputError, SchemaError
from .model import District, Instance
from .partition import sample_partition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShpParams:
    fanout_w: int = 3
    leaf_threshold: int = 5
    epsilon: float | None = None  # defaults to the instance tolerance
    max_sample_tries: int = 10
    max_backtracks: int = 50
    seed: int = 0
    beta: float = 0.0

    def __post_init__(self):
        if self.leaf_threshold < 2:
            raise InputError("leaf_threshold must be at least 2")
        if self.fanout_w < 1:
            raise InputError("fanout_w must be at least 1")
        if self.max_sample_tries < 1 or self.max_backtracks < 0:
            raise InputError("retry budgets must be nonnegative")


@dataclass
class PartitionRecord:
    centers: tuple
    capacities: tuple
    alpha: float
    beta: float
    deviation: float
    children: tuple  # node ids, aligned with centers


@dataclass
class ShpNode:
    id: int
    region: frozenset
    capacity: int
    parent: tuple | None = None  # (node id, partition index)
    partitions: list = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.capacity == 1


def tree_deviation(epsilon: float, ideal_pop: float, s: int) -> float:
    """Absolute population slack per unit capacity for a node of capacity ``s``."""
    return epsilon * ideal_pop / math.ceil(math.log2(s))


def split_size(s: int, leaf_threshold: int) -> int:
    return s if s <= leaf_threshold else 2


@dataclass
class ShpTree:
    nodes: dict
    root: int
    params: ShpParams | None = None
    stats: dict = field(default_factory=dict)

    @property
    def leaves(self) -> set:
        return {k for k, nd in self.nodes.items() if nd.is_leaf}

    def partition(self, key: str) -> tuple[ShpNode, PartitionRecord]:
        node_id, idx = (int(v) for v in key.split(":"))
        node = self.nodes[node_id]
        return node, node.partitions[idx]

    def to_json(self) -> dict:
        nodes = []
        for k in sorted(self.nodes):
            nd = self.nodes[k]
            nodes.append({
                "id": nd.id,
                "region": sorted(nd.region),
                "capacity": nd.capacity,
                "parent": list(nd.parent) if nd.parent else None,
                "partitions": [{
                    "centers": list(p.centers),
                    "capacities": list(p.capacities),
                    "alpha": p.alpha,
                    "beta": p.beta,
                    "deviation": p.deviation,
                    "children": list(p.children),
                } for p in nd.partitions],
            })
        params = None
        if self.params is not None:
            params = {k: getattr(self.params, k) for k in self.params.__dataclass_fields__}
        return {"root": self.root, "params": params, "nodes": nodes}

    @classmethod
    def from_json(cls, obj: dict) -> "ShpTree":
        try:
            nodes = {}
            for nd in obj["nodes"]:
                parts = [PartitionRecord(tuple(p["centers"]), tuple(p["capacities"]), float(p["alpha"]),
                                         float(p["beta"]), float(p["deviation"]), tuple(p["children"]))
                         for p in nd["partitions"]]
                parent = tuple(nd["parent"]) if nd["parent"] else None
                nodes[nd["id"]] = ShpNode(nd["id"], frozenset(nd["region"]), nd["capacity"], parent, parts)
            params = ShpParams(**obj["params"]) if obj.get("params") else None
            return cls(nodes, obj["root"], params)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed tree file: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ShpTree":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


class _Generator:
    def __init__(self, inst: Instance, params: ShpParams, solver: SolverConfig):
        self.inst = inst
        self.params = params
        self.solver = solver
        self.eps = params.epsilon if params.epsilon is not None else inst.epsilon
        self.nodes: dict[int, ShpNode] = {}
        self.next_id = 0
        self.backtracks = 0
        self.samples = 0
        self.failures = 0

    def new_node(self, region, capacity, parent=None) -> ShpNode:
        node = ShpNode(self.next_id, frozenset(region), capacity, parent)
        self.nodes[node.id] = node
        self.next_id += 1
        return node

    def delete_subtree(self, node_id: int) -> None:
        node = self.nodes.pop(node_id)
        for part in node.partitions:
            for child in part.children:
                self.delete_subtree(child)

    def sample(self, node: ShpNode, rng):
        s = node.capacity
        z = split_size(s, self.params.leaf_threshold)
        dev = tree_deviation(self.eps, self.inst.ideal_pop, s)
        for _ in range(self.params.max_sample_tries):
            self.samples += 1
            res = sample_partition(node.region, s, z, self.inst, rng, beta=self.params.beta,
                                   deviation=dev, solver=self.solver)
            if res is None:
                self.failures += 1
                continue
            if any(cap == 1 and not self.inst.is_balanced(sub) for _, cap, sub in res.children()):
                self.failures += 1
                continue
            return res
        return None

    def expand(self, node: ShpNode) -> bool:
        """Grow up to ``fanout_w`` partitions below ``node``; False if none survive."""
        if node.is_leaf:
            return True
        rng = np.random.default_rng([self.params.seed, node.id])
        for _ in range(self.params.fanout_w):
            while True:
                res = self.sample(node, rng)
                if res is None:
                    break
                idx = len(node.partitions)
                children = [self.new_node(sub, cap, (node.id, idx)) for _, cap, sub in res.children()]
                ok = True
                for child in children:
                    if not self.expand(child):
                        ok = False
                        break
                if ok:
                    spec = res.spec
                    node.partitions.append(PartitionRecord(spec.centers, spec.capacities, spec.alpha, spec.beta,
                                                           spec.deviation, tuple(c.id for c in children)))
                    break
                # A child could not be split: drop it with its siblings and resample here.
                for child in children:
                    if child.id in self.nodes:
                        self.delete_subtree(child.id)
                self.backtracks += 1
                log.debug("backtrack %d at node %d", self.backtracks, node.id)
                if self.backtracks > self.params.max_backtracks:
                    raise GenerationError(
                        f"backtracking budget {self.params.max_backtracks} exhausted "
                        f"({self.samples} samples, {self.failures} failed)")
        return bool(node.partitions)


def generate_tree(inst: Instance, params: ShpParams | None = None, solver: SolverConfig | None = None) -> ShpTree:
    params = params or ShpParams()
    gen = _Generator(inst, params, solver or SolverConfig())
    root = gen.new_node(inst.graph.vertices, inst.n_districts)
    if not gen.expand(root):
        raise GenerationError(f"root could not be partitioned ({gen.samples} samples, {gen.failures} failed)")
    stats = {"samples": gen.samples, "failures": gen.failures, "backtracks": gen.backtracks}
    return ShpTree(gen.nodes, root.id, params, stats)


def collect_leaves(tree: ShpTree, inst: Instance) -> list[tuple[District, bool, str | None]]:
    """Every capacity-1 node as ``(district, majority_flag, partition_key)``."""
    out = []
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        if not node.is_leaf:
            continue
        key = f"{node.parent[0]}:{node.parent[1]}" if node.parent else None
        out.append((District(node.region, key), inst.is_majority(node.region), key))
    return out
