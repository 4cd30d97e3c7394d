"""Domain types and graph primitives.

Block groups are keyed by string ids throughout. All types are frozen after
construction and safe to share between workers.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import (
    BalanceError,
    ContiguityError,
    DisconnectedGraphError,
    IdMismatchError,
    InputError,
    PartitionError,
)

INF = math.inf
# Relative slack for floating-point population comparisons.
BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class BlockGroup:
    id: str
    pop: int
    vap: int
    tvap: int
    centroid: tuple[float, float]
    area: float
    perimeter: float

    def __post_init__(self):
        if self.pop < 0:
            raise InputError(f"block {self.id}: negative population")
        if not 0 <= self.tvap <= self.vap <= self.pop:
            raise InputError(f"block {self.id}: need 0 <= tvap <= vap <= pop")
        if self.area <= 0 or self.perimeter <= 0:
            raise InputError(f"block {self.id}: area and perimeter must be positive")


class AdjacencyGraph:
    """Undirected block adjacency with shared-border lengths."""

    def __init__(self, vertices: Iterable[str], edges: Iterable[tuple[str, str, float]]):
        self.vertices = frozenset(vertices)
        nbrs: dict[str, set[str]] = {v: set() for v in self.vertices}
        border: dict[frozenset, float] = {}
        for a, b, length in edges:
            if a == b:
                raise InputError(f"self-loop on {a}")
            if a not in nbrs or b not in nbrs:
                missing = a if a not in nbrs else b
                raise IdMismatchError(f"edge references unknown block {missing!r}")
            if not length > 0:
                raise InputError(f"edge {a}-{b}: shared border must be positive")
            key = frozenset((a, b))
            border[key] = border.get(key, 0.0) + float(length)
            nbrs[a].add(b)
            nbrs[b].add(a)
        self._nbrs = {v: frozenset(s) for v, s in nbrs.items()}
        self._border = border

    def neighbors(self, v: str) -> frozenset[str]:
        return self._nbrs[v]

    def shared_border(self, a: str, b: str) -> float:
        return self._border.get(frozenset((a, b)), 0.0)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(e)) for e in self._border)

    def edge_items(self):
        """Yield ``(a, b, shared_border)`` with ``a < b`` in sorted order."""
        for a, b in self.edges:
            yield a, b, self._border[frozenset((a, b))]

    def __contains__(self, v) -> bool:
        return v in self._nbrs

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True, eq=False)
class Instance:
    blocks: Mapping[str, BlockGroup]
    graph: AdjacencyGraph
    n_districts: int
    epsilon: float
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blocks", MappingProxyType(dict(self.blocks)))
        if set(self.blocks) != set(self.graph.vertices):
            extra = sorted(set(self.blocks) ^ set(self.graph.vertices))[:5]
            raise IdMismatchError(f"block records and graph vertices differ: {extra}")
        if self.n_districts < 1:
            raise InputError("n_districts must be positive")
        if not 0 < self.epsilon < 1:
            raise InputError("epsilon must lie in (0, 1)")
        if self.n_districts > len(self.blocks):
            raise InputError("more districts than blocks")
        if not is_contiguous(self.graph.vertices, self.graph):
            raise DisconnectedGraphError("adjacency graph is not connected")
        object.__setattr__(self, "order", tuple(sorted(self.blocks)))

    @property
    def total_pop(self) -> int:
        return sum(b.pop for b in self.blocks.values())

    @property
    def ideal_pop(self) -> float:
        return self.total_pop / self.n_districts

    def pop(self, region: Iterable[str]) -> int:
        return sum(self.blocks[j].pop for j in region)

    def vap(self, region: Iterable[str]) -> int:
        return sum(self.blocks[j].vap for j in region)

    def tvap(self, region: Iterable[str]) -> int:
        return sum(self.blocks[j].tvap for j in region)

    def is_majority(self, region: Iterable[str]) -> bool:
        """Non-strict majority: ``tvap >= vap / 2``."""
        region = list(region)
        return 2 * self.tvap(region) >= self.vap(region)

    def is_balanced(self, region: Iterable[str]) -> bool:
        p = self.ideal_pop
        return abs(self.pop(region) - p) <= self.epsilon * p * (1 + BALANCE_TOL)


@dataclass(frozen=True)
class District:
    blocks: frozenset[str]
    # Generating tree partition as "node:index"; not part of identity.
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", frozenset(self.blocks))
        if not self.blocks:
            raise InputError("district must be nonempty")

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(sorted(self.blocks))


@dataclass(frozen=True)
class Plan:
    districts: tuple[District, ...]
    provenance: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "districts", tuple(self.districts))

    def __len__(self):
        return len(self.districts)

    def assignment(self) -> dict[str, int]:
        return {j: k for k, d in enumerate(self.districts) for j in d.blocks}

    def replace(self, indices, new_districts, **provenance) -> "Plan":
        """Return a plan with ``districts[indices[k]] = new_districts[k]``."""
        ds = list(self.districts)
        for k, d in zip(indices, new_districts):
            ds[k] = d
        prov = dict(self.provenance)
        prov.update(provenance)
        return Plan(tuple(ds), prov)


def is_contiguous(region: Iterable[str], graph: AdjacencyGraph) -> bool:
    region = set(region)
    if not region:
        raise InputError("region must be nonempty")
    for v in region:
        if v not in graph:
            raise InputError(f"unknown block id {v!r}")
    start = next(iter(region))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in graph.neighbors(u):
            if w in region and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(region)


def pop_deviation(district, inst: Instance) -> float:
    blocks = district.blocks if isinstance(district, District) else district
    if not blocks:
        raise InputError("district must be nonempty")
    p = inst.ideal_pop
    return (inst.pop(blocks) - p) / p


def internal_shortest_paths(region: Iterable[str], source: str, graph: AdjacencyGraph) -> dict[str, float]:
    """Hop distances from ``source`` inside the subgraph induced by ``region``.

    Vertices not reachable inside the region map to ``INF``.
    """
    region = set(region)
    if source not in region:
        raise InputError(f"source {source!r} not in region")
    dist = {v: INF for v in region}
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in graph.neighbors(u):
            if w in region and dist[w] == INF:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def connected_subsets(adj: Mapping[int, Iterable[int]], r: int) -> list[frozenset]:
    """All vertex sets of size ``r`` inducing a connected subgraph.

    Uses the ESU extension scheme, which emits every connected set exactly
    once (rooted at its smallest vertex).
    """
    if r < 1:
        raise InputError("r must be positive")
    nbrs = {v: frozenset(ws) for v, ws in adj.items()}
    if r > len(nbrs):
        return []
    out: list[frozenset] = []

    def extend(sub, ext, root, sub_nbhd):
        if len(sub) == r:
            out.append(frozenset(sub))
            return
        ext = sorted(ext)
        while ext:
            w = ext.pop(0)
            fresh = {u for u in nbrs[w] if u > root and u not in sub and u not in sub_nbhd}
            extend(sub | {w}, set(ext) | fresh, root, sub_nbhd | nbrs[w] | {w})

    for v in sorted(nbrs):
        extend({v}, {u for u in nbrs[v] if u > v}, v, nbrs[v] | {v})
    return out


def district_adjacency(districts, graph: AdjacencyGraph) -> tuple[dict[int, set[int]], dict[frozenset, float]]:
    """District-level adjacency and summed shared-border length per pair."""
    owner = {}
    for k, d in enumerate(districts):
        for j in (d.blocks if isinstance(d, District) else d):
            owner[j] = k
    adj: dict[int, set[int]] = {k: set() for k in range(len(districts))}
    border: dict[frozenset, float] = {}
    for a, b, length in graph.edge_items():
        ka, kb = owner.get(a), owner.get(b)
        if ka is None or kb is None or ka == kb:
            continue
        adj[ka].add(kb)
        adj[kb].add(ka)
        key = frozenset((ka, kb))
        border[key] = border.get(key, 0.0) + length
    return adj, border


def validate_plan(plan: Plan, inst: Instance, check_balance: bool = True) -> None:
    """Raise a ``PlanValidationError`` subclass if ``plan`` is not legal."""
    if len(plan.districts) != inst.n_districts:
        raise PartitionError(f"plan has {len(plan.districts)} districts, expected {inst.n_districts}")
    seen: dict[str, int] = {}
    for k, d in enumerate(plan.districts):
        for j in d.blocks:
            if j not in inst.blocks:
                raise PartitionError(f"district {k} references unknown block {j!r}", k)
            if j in seen:
                raise PartitionError(f"block {j!r} in districts {seen[j]} and {k}", k)
            seen[j] = k
    if len(seen) != len(inst.blocks):
        missing = sorted(set(inst.blocks) - set(seen))[:5]
        raise PartitionError(f"unassigned blocks: {missing}")
    for k, d in enumerate(plan.districts):
        if not is_contiguous(d.blocks, inst.graph):
            raise ContiguityError(f"district {k} is not contiguous", k)
        if check_balance and not inst.is_balanced(d.blocks):
            dev = pop_deviation(d, inst)
            raise BalanceError(f"district {k} deviation {dev:.4f} exceeds {inst.epsilon}", k)
