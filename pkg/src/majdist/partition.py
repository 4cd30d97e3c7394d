"""Partitioning integer programs for splitting a region around sampled centers.

Two formulations share one builder: the dispersion-minimizing program and
the majority variant, which adds one indicator per center and trades the
count of majority subregions against dispersion through ``beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .bip import BinaryProgram, SolverConfig, SolveResult
from .errors import InputError, InternalConsistencyError
from .model import Instance, internal_shortest_paths, is_contiguous

# Population bounds are checked with this relative slack after decoding.
POP_TOL = 1e-7


@dataclass(frozen=True)
class PartitionSpec:
    region: frozenset
    centers: tuple
    capacities: tuple
    alpha: float
    beta: float
    deviation: float
    use_majority_terms: bool

    def __post_init__(self):
        object.__setattr__(self, "region", frozenset(self.region))
        object.__setattr__(self, "centers", tuple(self.centers))
        object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
        if len(set(self.centers)) != len(self.centers):
            raise InputError("centers must be distinct")
        missing = [c for c in self.centers if c not in self.region]
        if missing:
            raise InputError(f"centers outside region: {missing}")
        if len(self.capacities) != len(self.centers) or any(c < 1 for c in self.capacities):
            raise InputError("need one positive capacity per center")
        if sum(self.capacities) < 2:
            raise InputError("total capacity must be at least 2")
        if not 1 <= self.alpha <= 2:
            raise InputError("alpha must lie in [1, 2]")
        if not 0 <= self.beta <= 1:
            raise InputError("beta must lie in [0, 1]")
        if self.deviation < 0:
            raise InputError("deviation must be nonnegative")
        if self.use_majority_terms and any(c != 1 for c in self.capacities):
            raise InputError("majority terms require unit capacities")

    @property
    def capacity(self) -> int:
        return sum(self.capacities)

    @property
    def order(self) -> tuple:
        return tuple(sorted(self.region))

    def with_beta(self, beta: float) -> "PartitionSpec":
        return PartitionSpec(self.region, self.centers, self.capacities, self.alpha, beta,
                             self.deviation, self.use_majority_terms)


@dataclass
class PartitionResult:
    spec: PartitionSpec
    subregions: dict  # center -> frozenset of block ids
    majority_flags: dict  # center -> bool, recomputed from populations
    dispersion_value: float
    majority_count: int
    objective_value: float = math.nan
    solver_flags: dict = field(default_factory=dict)  # raw m_i values when present

    def children(self):
        """``(center, capacity, region)`` in center order."""
        return [(c, s, self.subregions[c]) for c, s in zip(self.spec.centers, self.spec.capacities)]


def compute_sij(region, centers, graph) -> dict:
    """Neighbours of ``j`` strictly closer to center ``i`` by hop distance inside the region.

    Keys are ``(i, j)`` for every center ``i`` and block ``j`` in the region.
    """
    region = frozenset(region)
    out = {}
    for i in centers:
        if i not in region:
            raise InputError(f"center {i!r} outside region")
        dist = internal_shortest_paths(region, i, graph)
        for j in region:
            if j == i:
                out[i, j] = frozenset()
                continue
            dj = dist[j]
            out[i, j] = frozenset(k for k in graph.neighbors(j) if k in region and dist[k] < dj)
    return out


def _euclid(inst: Instance, a: str, b: str) -> float:
    (x1, y1), (x2, y2) = inst.blocks[a].centroid, inst.blocks[b].centroid
    return math.hypot(x1 - x2, y1 - y2)


def region_diameter(region, inst: Instance) -> float:
    pts = np.array([inst.blocks[j].centroid for j in sorted(region)], dtype=float)
    if len(pts) < 2:
        return 1.0
    diam = float(pdist(pts).max())
    return diam if diam > 0 else 1.0


def dispersion(assignments, alpha: float, inst: Instance) -> float:
    """Raw ``sum d(center, j)**alpha * pop_j`` over ``(center, block)`` pairs."""
    return sum(_euclid(inst, i, j) ** alpha * inst.blocks[j].pop for i, j in assignments)


def _layout(spec: PartitionSpec):
    order = spec.order
    n_r = len(order)
    x_index = {(i, j): ci * n_r + jj for ci, i in enumerate(spec.centers) for jj, j in enumerate(order)}
    m_index = {i: len(spec.centers) * n_r + ci for ci, i in enumerate(spec.centers)} if spec.use_majority_terms else {}
    return order, x_index, m_index


def build_pip(spec: PartitionSpec, inst: Instance) -> BinaryProgram:
    if not is_contiguous(spec.region, inst.graph):
        raise InputError("region must be contiguous")
    order, x_index, m_index = _layout(spec)
    num_vars = len(x_index) + len(m_index)
    names = [None] * num_vars
    for (i, j), k in x_index.items():
        names[k] = f"x[{i},{j}]"
    for i, k in m_index.items():
        names[k] = f"m[{i}]"
    prog = BinaryProgram(num_vars, np.zeros(num_vars), names=names)

    p_hat = inst.ideal_pop
    diam = region_diameter(spec.region, inst)
    weight = spec.beta if spec.use_majority_terms else 1.0
    if weight:
        for (i, j), k in x_index.items():
            d = _euclid(inst, i, j) / diam
            prog.objective[k] = -weight * d ** spec.alpha * inst.blocks[j].pop / p_hat
    for i, k in m_index.items():
        prog.objective[k] = 1.0 - spec.beta

    for j in order:
        prog.add_constraint({x_index[i, j]: 1.0 for i in spec.centers}, "=", 1)
    for i, cap in zip(spec.centers, spec.capacities):
        prog.add_constraint({x_index[i, i]: 1.0}, "=", 1)
        pops = {x_index[i, j]: float(inst.blocks[j].pop) for j in order}
        prog.add_constraint(pops, "<=", cap * p_hat + spec.deviation)
        prog.add_constraint(pops, ">=", cap * p_hat - spec.deviation)

    sij = compute_sij(spec.region, spec.centers, inst.graph)
    for i in spec.centers:
        for j in order:
            if j == i:
                continue
            coeffs = {x_index[i, k]: 1.0 for k in sij[i, j]}
            coeffs[x_index[i, j]] = coeffs.get(x_index[i, j], 0.0) - 1.0
            prog.add_constraint(coeffs, ">=", 0)

    if spec.use_majority_terms:
        # sum(t x) - 1/2 sum(v x) >= -M (1 - m), M = 1/2 sum_R v, doubled to stay integral.
        big_m2 = float(sum(inst.blocks[j].vap for j in order))
        for i in spec.centers:
            coeffs = {x_index[i, j]: float(2 * inst.blocks[j].tvap - inst.blocks[j].vap) for j in order}
            coeffs[m_index[i]] = -big_m2
            prog.add_constraint(coeffs, ">=", -big_m2)
    return prog


def decode(spec: PartitionSpec, inst: Instance, result: SolveResult) -> PartitionResult:
    if result.assignment is None:
        raise InputError("solve result carries no assignment")
    order, x_index, m_index = _layout(spec)
    x = result.assignment
    subregions = {}
    for i in spec.centers:
        subregions[i] = frozenset(j for j in order if x[x_index[i, j]] > 0.5)
    covered = [j for j in order if sum(j in s for s in subregions.values()) != 1]
    if covered:
        raise InternalConsistencyError(f"blocks not assigned exactly once: {covered[:5]}")
    p_hat = inst.ideal_pop
    flags, raw = {}, {}
    for i, cap in zip(spec.centers, spec.capacities):
        sub = subregions[i]
        if not sub or not is_contiguous(sub, inst.graph):
            raise InternalConsistencyError(f"subregion of center {i!r} is not contiguous")
        pop = inst.pop(sub)
        slack = POP_TOL * max(1.0, cap * p_hat)
        if abs(pop - cap * p_hat) > spec.deviation + slack:
            raise InternalConsistencyError(f"subregion of center {i!r} violates population bounds")
        flags[i] = inst.is_majority(sub)
        if m_index:
            raw[i] = bool(x[m_index[i]] > 0.5)
            if raw[i] and not flags[i]:
                raise InternalConsistencyError(f"indicator set for non-majority subregion {i!r}")
    disp = dispersion(((i, j) for i, sub in subregions.items() for j in sub), spec.alpha, inst)
    return PartitionResult(spec, subregions, flags, disp, sum(flags.values()),
                           result.objective_value, raw)


def solve_partition(spec: PartitionSpec, inst: Instance, solver: SolverConfig | None = None):
    """Build, solve and decode; ``None`` when no solution was found."""
    solver = solver or SolverConfig()
    res = solver.solve(build_pip(spec, inst))
    if res.assignment is None:
        return None
    # Time-limited incumbents are accepted; decode verifies them like optimal ones.
    return decode(spec, inst, res)


def split_capacity(s: int, rng) -> tuple[int, int]:
    """Toss ``s`` fair coins between two children; resample if one side is empty."""
    while True:
        s1 = int(np.sum(rng.integers(0, 2, size=s) == 0))
        if 0 < s1 < s:
            return s1, s - s1


def sample_partition(region, s: int, z: int, inst: Instance, rng, beta: float = 0.0,
                     deviation: float | None = None, solver: SolverConfig | None = None):
    """One randomized split of ``region`` into ``z`` children; ``None`` on failure."""
    region = frozenset(region)
    if z not in (2, s):
        raise InputError("split size must be 2 or the full capacity")
    if s < 2:
        raise InputError("capacity must be at least 2 to split")
    if deviation is None:
        deviation = inst.epsilon * inst.ideal_pop / math.ceil(math.log2(s))
    order = sorted(region)
    if len(order) < z:
        return None
    caps = [1] * s if z == s else list(split_capacity(s, rng))
    picks = rng.choice(len(order), size=z, replace=False)
    centers = [order[k] for k in picks]
    if z == 2 and caps[0] != caps[1]:
        a, b = centers
        pop_a = pop_b = 0
        for j in order:
            if _euclid(inst, a, j) <= _euclid(inst, b, j):
                pop_a += inst.blocks[j].pop
            else:
                pop_b += inst.blocks[j].pop
        big, small = max(caps), min(caps)
        caps = [big, small] if pop_a >= pop_b else [small, big]
    alpha = float(rng.uniform(1.0, 2.0))
    majority = z == s and beta < 1
    spec = PartitionSpec(region, tuple(centers), tuple(caps), alpha, beta if majority else 1.0,
                         deviation, majority)
    return solve_partition(spec, inst, solver)
