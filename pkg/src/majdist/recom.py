"""ReCom spanning-tree recombination and the short-bursts wrapper."""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import InputError
from .metrics import majority_count
from .model import District, Instance, Plan, district_adjacency

TREE_DRAWS = 50
PAIR_DRAWS = 200


@dataclass(frozen=True)
class BurstParams:
    burst_length: int = 10
    total_steps: int = 100_000
    epsilon: float | None = None  # cut balance; defaults to the instance tolerance
    seed: int = 0

    def __post_init__(self):
        if self.burst_length < 1 or self.total_steps < 1:
            raise InputError("burst length and step count must be positive")
        if self.burst_length > self.total_steps:
            raise InputError("burst_length must not exceed total_steps")


def _balanced_cut(region, inst, rng, eps):
    """Cut a random spanning tree of ``region`` into two balanced parts, or return None."""
    g = nx.Graph()
    g.add_nodes_from(sorted(region))
    for j in sorted(region):
        for k in sorted(inst.graph.neighbors(j)):
            if k in region and j < k:
                g.add_edge(j, k, weight=float(rng.random()))
    tree = nx.minimum_spanning_tree(g, algorithm="kruskal")
    root = min(region)
    parent = {root: None}
    order = [root]
    for u in order:
        for w in sorted(tree.neighbors(u)):
            if w not in parent:
                parent[w] = u
                order.append(w)
    sub = {j: inst.blocks[j].pop for j in region}
    for u in reversed(order[1:]):
        sub[parent[u]] += sub[u]
    total = sub[root]
    p_hat = inst.ideal_pop
    tol = eps * p_hat * (1 + 1e-9)
    candidates = order[1:]
    for k in rng.permutation(len(candidates)):
        child = candidates[k]
        if abs(sub[child] - p_hat) <= tol and abs(total - sub[child] - p_hat) <= tol:
            side = {child}
            stack = [child]
            while stack:
                u = stack.pop()
                for w in tree.neighbors(u):
                    if parent.get(w) == u and w not in side:
                        side.add(w)
                        stack.append(w)
            return frozenset(side)
    return None


def recom_step(plan: Plan, inst: Instance, rng, epsilon: float | None = None) -> Plan:
    """One ReCom move; returns ``plan`` itself when no balanced cut turns up."""
    eps = inst.epsilon if epsilon is None else min(epsilon, inst.epsilon)
    adj, _ = district_adjacency(plan.districts, inst.graph)
    pairs = sorted((a, b) for a in adj for b in adj[a] if a < b)
    if not pairs:
        return plan
    for _ in range(PAIR_DRAWS):
        a, b = pairs[int(rng.integers(len(pairs)))]
        merged = plan.districts[a].blocks | plan.districts[b].blocks
        for _ in range(TREE_DRAWS):
            side = _balanced_cut(merged, inst, rng, eps)
            if side is None:
                continue
            other = merged - side
            first, second = (side, other) if min(merged) in side else (other, side)
            return plan.replace([a, b], [District(first), District(second)])
    return plan


def short_bursts(seed_plan: Plan, inst: Instance, params: BurstParams, rng=None):
    """Run ReCom in bursts, restarting each burst from the best plan seen so far.

    Returns ``(best_plan, trajectory)`` where ``trajectory[k]`` is the best
    majority count after burst ``k``.
    """
    rng = np.random.default_rng(params.seed if rng is None else rng)
    best = seed_plan
    best_score = majority_count(seed_plan, inst)
    trajectory = []
    for _ in range(params.total_steps // params.burst_length):
        current = best
        for _ in range(params.burst_length):
            current = recom_step(current, inst, rng, params.epsilon)
            score = majority_count(current, inst)
            if score >= best_score:
                best, best_score = current, score
        trajectory.append(best_score)
    prov = dict(seed_plan.provenance)
    prov.update(stage="short_bursts", burst_length=params.burst_length, total_steps=params.total_steps,
                seed=params.seed)
    return Plan(tuple(District(d.blocks) for d in best.districts), prov), trajectory


def trajectory_csv(trajectory) -> str:
    lines = ["burst_index,best_majority_count"]
    lines += [f"{k},{v}" for k, v in enumerate(trajectory)]
    return "\n".join(lines) + "\n"
