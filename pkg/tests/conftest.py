import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from majdist.bip import SolverConfig  # noqa: E402
from majdist.io import GridSpec, make_grid  # noqa: E402
from majdist.model import AdjacencyGraph, BlockGroup, Instance  # noqa: E402

# Planted-cluster 6x6 suite shared by the oracle tests and the acceptance run.
# The optimum column was computed by the bitmask oracle in tests/oracles.py
# (cross-checked against its exhaustive variant on the first two entries).
SUITE = [
    (((1, 1, 3, 4), 0.8), 0.1, 2),
    (((0, 0, 3, 3), 0.9), 0.0, 1),
    (((2, 1, 4, 3), 0.75), 0.1, 2),
    (((0, 2, 6, 2), 0.7), 0.1, 2),
    (((1, 0, 2, 6), 0.85), 0.05, 2),
]


def suite_instance(k):
    cluster, noise, _ = SUITE[k]
    return make_grid(GridSpec(6, 6, 4, 0.05, (cluster,), 0.1, 100, noise, 3))


def build_instance(pops, edges, n, eps=0.05, vaps=None, tvaps=None, coords=None, meta=None):
    """Instance from per-block lists; ids are the list positions as strings ``b0, b1, ...``."""
    ids = [f"b{k}" for k in range(len(pops))]
    vaps = vaps if vaps is not None else pops
    tvaps = tvaps if tvaps is not None else [0] * len(pops)
    coords = coords if coords is not None else [(float(k), 0.0) for k in range(len(pops))]
    blocks = {i: BlockGroup(i, p, v, t, c, 1.0, 4.0) for i, p, v, t, c in zip(ids, pops, vaps, tvaps, coords)}
    graph = AdjacencyGraph(ids, [(ids[a], ids[b], 1.0) for a, b in edges])
    return Instance(blocks, graph, n, eps, meta or {})


def path_instance(pops, n, eps=0.05, **kw):
    return build_instance(pops, [(k, k + 1) for k in range(len(pops) - 1)], n, eps, **kw)


def grid_instance(w, h, n, eps=0.05, pops=None, vaps=None, tvaps=None):
    """Row-major w x h grid built directly (independent of make_grid)."""
    cells = w * h
    pops = pops if pops is not None else [100] * cells
    coords = [(c + 0.5, r + 0.5) for r in range(h) for c in range(w)]
    edges = []
    for r in range(h):
        for c in range(w):
            k = r * w + c
            if c + 1 < w:
                edges.append((k, k + 1))
            if r + 1 < h:
                edges.append((k, k + w))
    return build_instance(pops, edges, n, eps, vaps=vaps, tvaps=tvaps, coords=coords)


@pytest.fixture(scope="session")
def solver():
    return SolverConfig(time_limit=60)


@pytest.fixture
def pi_over_4():
    return math.pi / 4


_ORACLE = {}


def suite_optimum(k):
    """Oracle optimum for ``SUITE[k]``, computed once per session."""
    if k not in _ORACLE:
        from oracles import GridOracle

        _ORACLE[k] = GridOracle(suite_instance(k)).best()
    return _ORACLE[k]


def random_program(rng, n=None):
    """Random binary program with mixed relations; roughly a third are infeasible."""
    from majdist.bip import BinaryProgram

    n = n if n is not None else int(rng.integers(1, 17))
    prog = BinaryProgram(n, rng.integers(-10, 11, size=n).astype(float))
    for _ in range(int(rng.integers(0, 6))):
        k = int(rng.integers(1, n + 1))
        idx = rng.choice(n, size=k, replace=False)
        coeffs = {int(j): float(rng.integers(-5, 6)) for j in idx}
        rel = ("<=", ">=", "=")[int(rng.integers(0, 3))]
        span = sum(abs(a) for a in coeffs.values())
        rhs = float(rng.integers(-span // 2 - 1, span // 2 + 2)) if rel != "=" else float(rng.integers(0, 4))
        prog.add_constraint(coeffs, rel, rhs)
    return prog


SHAPES = {2: [(2, 3), (3, 3), (2, 5), (3, 4), (4, 3), (2, 6)], 3: [(3, 3), (2, 4), (2, 5), (3, 3), (5, 2)]}


def random_region_case(rng, eps=0.15):
    """Small grid instance plus a random majority-program spec over all of it."""
    from majdist.partition import PartitionSpec

    c = int(rng.integers(2, 4))
    w, h = SHAPES[c][int(rng.integers(len(SHAPES[c])))]
    pops = [int(v) for v in rng.integers(60, 141, size=w * h)]
    vaps = [int(round(0.75 * p)) for p in pops]
    tvaps = [int(round(v * f)) for v, f in zip(vaps, rng.uniform(0, 1, size=w * h) ** 0.7)]
    inst = grid_instance(w, h, c, eps, pops=pops, vaps=vaps, tvaps=tvaps)
    centers = tuple(f"b{k}" for k in sorted(rng.choice(w * h, size=c, replace=False)))
    spec = PartitionSpec(frozenset(inst.blocks), centers, (1,) * c, float(rng.uniform(1, 2)),
                         float(rng.choice([0.0, 0.3, 0.7, 1.0])), eps * inst.ideal_pop, True)
    return inst, spec


LEMMA_SHAPES = [(2, 2), (2, 3), (3, 3), (2, 4), (2, 5), (3, 2), (5, 2), (1, 6), (4, 2)]


def lemma_fixture(rng, equal_pop=False):
    """Random small grid split into r balanced districts, or ``None`` if none exist.

    Returns ``(inst, districts)`` where ``districts`` covers the whole grid.
    """
    from majdist.local import balanced_partitions

    w, h = LEMMA_SHAPES[int(rng.integers(len(LEMMA_SHAPES)))]
    cells = w * h
    r = int(rng.integers(2, 4))
    if r > cells:
        return None
    pops = [100] * cells if equal_pop else [int(v) for v in rng.integers(50, 151, size=cells)]
    vaps = pops if equal_pop else [int(round(p * f)) for p, f in zip(pops, rng.uniform(0.5, 1.0, size=cells))]
    tvaps = [int(round(v * f)) for v, f in zip(vaps, rng.uniform(0, 1, size=cells))]
    inst = grid_instance(w, h, r, 0.25, pops=pops, vaps=vaps, tvaps=tvaps)
    parts = list(balanced_partitions(frozenset(inst.blocks), r, inst))
    if not parts:
        return None
    return inst, parts[int(rng.integers(len(parts)))]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        ok, detail = RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")
