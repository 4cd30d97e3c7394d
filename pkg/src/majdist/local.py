"""Local reoptimization over connected groups of r districts."""
from __future__ import annotations

import heapq
import logging

import numpy as np

from .bip import SolverConfig
from .errors import BruteForceTooLarge, InputError
from .model import District, Instance, Plan, connected_subsets, district_adjacency, validate_plan
from .partition import sample_partition

log = logging.getLogger(__name__)


def wasted_T_metric(districts, inst: Instance) -> float:
    """Summed T share, less one half per majority district; -1 if all are majority."""
    total, all_majority = 0.0, True
    for d in districts:
        blocks = d.blocks if isinstance(d, District) else d
        vap, tvap = inst.vap(blocks), inst.tvap(blocks)
        if vap <= 0:
            raise InputError("district with zero voting-age population")
        majority = 2 * tvap >= vap
        all_majority &= majority
        total += tvap / vap - (0.5 if majority else 0.0)
    return -1.0 if all_majority else total


def subset_priority(districts, inst: Instance) -> float:
    return wasted_T_metric(districts, inst) - 0.5


class _Queue:
    """Max-priority queue of district subsets with eager invalidation."""

    def __init__(self):
        self.heap = []
        self.live = {}

    def push(self, subset: frozenset, priority: float):
        if priority <= 0 or subset in self.live:
            return
        self.live[subset] = priority
        heapq.heappush(self.heap, (-priority, tuple(sorted(subset))))

    def pop(self):
        while self.heap:
            _, key = heapq.heappop(self.heap)
            subset = frozenset(key)
            if subset in self.live:
                return subset, self.live.pop(subset)
        return None

    def drop_touching(self, indices):
        indices = set(indices)
        self.live = {s: p for s, p in self.live.items() if not s & indices}
        self.heap = [(p, k) for p, k in self.heap if frozenset(k) in self.live]
        heapq.heapify(self.heap)

    def __len__(self):
        return len(self.live)


def local_reoptimize(plan: Plan, inst: Instance, r: int = 4, rng=None, attempt_budget: int = 3,
                     solver: SolverConfig | None = None) -> Plan:
    """Repartition high-priority connected r-subsets, keeping only strict gains."""
    if r < 2:
        raise InputError("r must be at least 2")
    rng = np.random.default_rng(rng)
    validate_plan(plan, inst)
    districts = list(plan.districts)
    deviation = inst.epsilon * inst.ideal_pop
    queue = _Queue()

    def priority(subset):
        return subset_priority([districts[k] for k in subset], inst)

    adj, _ = district_adjacency(districts, inst.graph)
    for subset in connected_subsets(adj, r):
        queue.push(subset, priority(subset))

    accepted = []
    popped = 0
    while True:
        item = queue.pop()
        if item is None:
            break
        subset, prio = item
        popped += 1
        idx = sorted(subset)
        region = frozenset().union(*(districts[k].blocks for k in idx))
        current = sum(inst.is_majority(districts[k].blocks) for k in idx)
        for _ in range(attempt_budget):
            res = sample_partition(region, r, r, inst, rng, beta=0.0, deviation=deviation, solver=solver)
            if res is None or res.majority_count <= current:
                continue
            subs = sorted(res.subregions.values(), key=min)
            if not all(inst.is_balanced(s) for s in subs):
                continue
            for k, sub in zip(idx, subs):
                districts[k] = District(sub)
            before = sum(inst.is_majority(d.blocks) for d in plan.districts) if not accepted else accepted[-1]["after"]
            after = sum(inst.is_majority(d.blocks) for d in districts)
            accepted.append({"subset": idx, "subset_before": current, "subset_after": res.majority_count,
                             "before": before, "after": after})
            log.info("accepted subset %s: majority %d -> %d (plan %d -> %d)", idx, current,
                     res.majority_count, before, after)
            queue.drop_touching(idx)
            adj, _ = district_adjacency(districts, inst.graph)
            for s in connected_subsets(adj, r):
                if s & subset:
                    queue.push(s, priority(s))
            break

    prov = dict(plan.provenance)
    prov.update(stage="local_reopt", local_r=r, local_attempts=attempt_budget, local_accepted=accepted,
                local_popped=popped)
    out = Plan(tuple(districts), prov)
    validate_plan(out, inst)
    return out


def _connected_sets_containing(v, allowed, nbrs, pops, ub):
    """Every connected subset of ``allowed`` holding ``v`` with population <= ``ub``."""

    def rec(chosen, frontier, excluded, pop):
        if not frontier:
            yield chosen
            return
        u, rest = frontier[0], frontier[1:]
        yield from rec(chosen, rest, excluded | {u}, pop)
        if pop + pops[u] <= ub:
            grown = rest + [w for w in nbrs[u]
                            if w in allowed and w not in chosen and w not in excluded and w not in rest and w != u]
            yield from rec(chosen | {u}, grown, excluded, pop + pops[u])

    if pops[v] > ub:
        return
    start = [w for w in nbrs[v] if w in allowed]
    yield from rec(frozenset([v]), start, frozenset(), pops[v])


def balanced_partitions(region, r: int, inst: Instance):
    """Exhaustively yield partitions of ``region`` into ``r`` contiguous balanced parts."""
    region = frozenset(region)
    p_hat = inst.ideal_pop
    lb, ub = p_hat * (1 - inst.epsilon), p_hat * (1 + inst.epsilon)
    slack = 1e-9 * p_hat
    nbrs = {j: [k for k in sorted(inst.graph.neighbors(j)) if k in region] for j in region}
    pops = {j: inst.blocks[j].pop for j in region}

    def rec(remaining, k):
        if k == 1:
            pop = sum(pops[j] for j in remaining)
            if lb - slack <= pop <= ub + slack and _connected(remaining, nbrs):
                yield [remaining]
            return
        v = min(remaining)
        for part in _connected_sets_containing(v, remaining, nbrs, pops, ub + slack):
            if sum(pops[j] for j in part) < lb - slack:
                continue
            for tail in rec(remaining - part, k - 1):
                yield [part] + tail

    if region:
        yield from rec(region, r)


def _connected(region, nbrs) -> bool:
    if not region:
        return False
    start = next(iter(region))
    seen, stack = {start}, [start]
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w in region and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(region)


def lemma1_check(districts, inst: Instance, max_blocks: int = 14) -> bool:
    """True iff no repartition gains a majority district, or the wasted-T metric is positive."""
    blocks = [d.blocks if isinstance(d, District) else frozenset(d) for d in districts]
    region = frozenset().union(*blocks)
    if len(region) > max_blocks:
        raise BruteForceTooLarge(f"{len(region)} blocks exceeds brute-force limit {max_blocks}")
    current = sum(inst.is_majority(b) for b in blocks)
    improved = any(sum(inst.is_majority(p) for p in parts) > current
                   for parts in balanced_partitions(region, len(blocks), inst))
    return (not improved) or wasted_T_metric(blocks, inst) > 0
