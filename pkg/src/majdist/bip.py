"""Binary linear programs and an exact branch-and-bound solver.

The default engine is best-first branch and bound over LP relaxations
(solved with HiGHS through :func:`scipy.optimize.linprog`). Until a first
incumbent exists the search dives depth-first. ``engine="highs"`` hands
the whole program to HiGHS' MIP solver instead.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .errors import InputError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
TIME_LIMIT = "TimeLimit"

RELATIONS = ("<=", ">=", "=")
FEAS_TOL = 1e-6
INT_TOL = 1e-6


@dataclass
class BinaryProgram:
    """``maximize objective @ x`` over ``x in {0,1}^num_vars``."""

    num_vars: int
    objective: np.ndarray = None
    constraints: list = field(default_factory=list)
    names: list | None = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = np.zeros(self.num_vars)
        self.objective = np.asarray(self.objective, dtype=float)

    def add_constraint(self, coeffs: dict, relation: str, rhs: float) -> None:
        self.constraints.append((dict(coeffs), relation, float(rhs)))

    def validate(self) -> None:
        if self.num_vars < 0:
            raise InputError("num_vars must be nonnegative")
        if self.objective.shape != (self.num_vars,):
            raise InputError("objective length must equal num_vars")
        if not np.all(np.isfinite(self.objective)):
            raise InputError("objective has non-finite coefficients")
        for k, (coeffs, rel, rhs) in enumerate(self.constraints):
            if rel not in RELATIONS:
                raise InputError(f"constraint {k}: unknown relation {rel!r}")
            if not math.isfinite(rhs):
                raise InputError(f"constraint {k}: non-finite right-hand side")
            for j, a in coeffs.items():
                if not (isinstance(j, (int, np.integer)) and 0 <= j < self.num_vars):
                    raise InputError(f"constraint {k}: variable index {j!r} out of range")
                if not math.isfinite(a):
                    raise InputError(f"constraint {k}: non-finite coefficient")

    def matrices(self):
        """Return ``(A_ub, b_ub, A_eq, b_eq)`` with every inequality as ``<=``."""
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for coeffs, rel, rhs in self.constraints:
            if rel == "=":
                eq_rows.append(coeffs)
                eq_rhs.append(rhs)
            elif rel == "<=":
                ub_rows.append(coeffs)
                ub_rhs.append(rhs)
            else:
                ub_rows.append({j: -a for j, a in coeffs.items()})
                ub_rhs.append(-rhs)
        return (_to_csr(ub_rows, self.num_vars), np.array(ub_rhs, dtype=float),
                _to_csr(eq_rows, self.num_vars), np.array(eq_rhs, dtype=float))

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x)
        for coeffs, rel, rhs in self.constraints:
            lhs = sum(a * x[j] for j, a in coeffs.items())
            slack = tol * max(1.0, abs(rhs))
            if rel == "<=" and lhs > rhs + slack:
                return False
            if rel == ">=" and lhs < rhs - slack:
                return False
            if rel == "=" and abs(lhs - rhs) > slack:
                return False
        return True

    def value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))

    def to_lp_text(self) -> str:
        """Plain-text LP-style dump for debugging."""
        name = (lambda j: self.names[j]) if self.names else (lambda j: f"x{j}")

        def expr(coeffs):
            terms = [f"{'+' if a >= 0 else '-'} {abs(a):g} {name(j)}" for j, a in sorted(coeffs.items()) if a]
            return " ".join(terms) if terms else "0"

        lines = ["Maximize", " obj: " + expr(dict(enumerate(self.objective))), "Subject To"]
        for k, (coeffs, rel, rhs) in enumerate(self.constraints):
            lines.append(f" c{k}: {expr(coeffs)} {rel} {rhs:g}")
        lines.append("Binary")
        lines.extend(f" {name(j)}" for j in range(self.num_vars))
        lines.append("End")
        return "\n".join(lines) + "\n"


def _to_csr(rows, n):
    data, indices, indptr = [], [], [0]
    for coeffs in rows:
        for j in sorted(coeffs):
            data.append(coeffs[j])
            indices.append(j)
        indptr.append(len(data))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(rows), n))


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings threaded through the pipeline.

    Partitioning programs with a weak big-M relaxation are out of reach for
    the plain branch and bound at grid scale, so the pipeline default is HiGHS.
    """

    time_limit: float = 60.0
    gap_tol: float = 1e-6
    engine: str = "highs"

    def solve(self, prog: "BinaryProgram") -> "SolveResult":
        return solve(prog, self.time_limit, self.gap_tol, self.engine)


@dataclass
class SolveResult:
    status: str
    assignment: np.ndarray | None
    objective_value: float
    gap: float
    nodes: int = 0

    @property
    def has_solution(self) -> bool:
        return self.assignment is not None


def solve(prog: BinaryProgram, time_limit: float = 60.0, gap_tol: float = 1e-6,
          engine: str = "bnb") -> SolveResult:
    prog.validate()
    if engine == "bnb":
        return _BranchAndBound(prog, time_limit, gap_tol).run()
    if engine == "highs":
        return _solve_highs(prog, time_limit, gap_tol)
    raise InputError(f"unknown engine {engine!r}")


class _BranchAndBound:
    def __init__(self, prog, time_limit, gap_tol):
        self.prog = prog
        self.n = prog.num_vars
        self.c = -prog.objective  # linprog minimizes
        self.A_ub, self.b_ub, self.A_eq, self.b_eq = prog.matrices()
        self.integral_obj = bool(np.all(prog.objective == np.round(prog.objective)))
        self.deadline = time.perf_counter() + time_limit
        self.gap_tol = gap_tol
        self.best_x = None
        self.best_val = -math.inf
        self.nodes = 0
        self._counter = 0

    def _lp(self, lb, ub):
        kwargs = {}
        if self.A_ub.shape[0]:
            kwargs.update(A_ub=self.A_ub, b_ub=self.b_ub)
        if self.A_eq.shape[0]:
            kwargs.update(A_eq=self.A_eq, b_eq=self.b_eq)
        res = linprog(self.c, bounds=np.column_stack([lb, ub]), method="highs", **kwargs)
        if res.status == 2:
            return None, -math.inf
        if res.status != 0:
            # Numerical trouble: fall back to the trivial bound so the node is still explored.
            return None, float(np.sum(np.maximum(self.prog.objective, 0) * ub + np.minimum(self.prog.objective, 0) * lb))
        bound = -res.fun
        if self.integral_obj:
            bound = math.floor(bound + 1e-7)
        return res.x, bound

    def _try_incumbent(self, x):
        x = np.round(x).astype(np.int8)
        if self.prog.is_feasible(x):
            val = self.prog.value(x)
            if val > self.best_val:
                self.best_val = val
                self.best_x = x
                return True
        return False

    def _prunable(self, bound):
        if self.best_x is None:
            return bound == -math.inf
        return bound <= self.best_val + self.gap_tol * max(1.0, abs(self.best_val))

    def _key(self, bound, depth):
        self._counter += 1
        if self.best_x is None:
            return (-depth, -bound, self._counter)
        return (-bound, -depth, self._counter)

    def run(self) -> SolveResult:
        if self.n == 0:
            x = np.zeros(0, dtype=np.int8)
            ok = self.prog.is_feasible(x)
            return SolveResult(OPTIMAL if ok else INFEASIBLE, x if ok else None, 0.0 if ok else math.nan, 0.0)
        lb = np.zeros(self.n)
        ub = np.ones(self.n)
        x, bound = self._lp(lb, ub)
        self.nodes = 1
        if x is None and bound == -math.inf:
            return SolveResult(INFEASIBLE, None, math.nan, 0.0, self.nodes)
        heap = [(self._key(bound, 0), bound, lb, ub, x)]
        had_incumbent = False
        while heap:
            if time.perf_counter() > self.deadline:
                return self._finish(heap, TIME_LIMIT)
            if self.best_x is not None and not had_incumbent:
                had_incumbent = True
                heap = [(self._key(b, -k[0]), b, l, u, xx) for k, b, l, u, xx in heap]
                heapq.heapify(heap)
            key, bound, lb, ub, x = heapq.heappop(heap)
            if self._prunable(bound):
                continue
            depth = -key[0] if self.best_x is None else -key[1]
            if x is None:
                # LP failed numerically; branch on the first free variable.
                free = np.flatnonzero(lb != ub)
                if free.size == 0:
                    self._try_incumbent(lb)
                    continue
                j = int(free[0])
                prefer = 1
            else:
                frac = np.abs(x - np.round(x))
                frac[lb == ub] = 0
                if frac.max() <= INT_TOL:
                    self._try_incumbent(x)
                    continue
                self._try_incumbent(x)
                # Most fractional variable; argmax returns the lowest index on ties.
                j = int(np.argmax(np.round(frac, 9)))
                prefer = 1 if x[j] >= 0.5 else 0
            # Push the less-preferred child first so the dive takes the preferred one.
            for v in (1 - prefer, prefer):
                clb, cub = lb.copy(), ub.copy()
                clb[j] = cub[j] = v
                cx, cbound = self._lp(clb, cub)
                self.nodes += 1
                if cx is None and cbound == -math.inf:
                    continue
                if self._prunable(cbound):
                    continue
                heapq.heappush(heap, (self._key(cbound, depth + 1), cbound, clb, cub, cx))
        if self.best_x is None:
            return SolveResult(INFEASIBLE, None, math.nan, 0.0, self.nodes)
        return SolveResult(OPTIMAL, self.best_x, self.best_val, 0.0, self.nodes)

    def _finish(self, heap, status):
        if self.best_x is None:
            return SolveResult(status, None, math.nan, math.inf, self.nodes)
        top = max((b for _, b, *_ in heap), default=self.best_val)
        gap = max(0.0, (top - self.best_val) / max(1.0, abs(self.best_val)))
        return SolveResult(status, self.best_x, self.best_val, gap, self.nodes)


def _solve_highs(prog, time_limit, gap_tol):
    A_ub, b_ub, A_eq, b_eq = prog.matrices()
    cons = []
    if A_ub.shape[0]:
        cons.append(LinearConstraint(A_ub, -np.inf, b_ub))
    if A_eq.shape[0]:
        cons.append(LinearConstraint(A_eq, b_eq, b_eq))
    res = milp(-prog.objective, constraints=cons, integrality=np.ones(prog.num_vars),
               bounds=Bounds(0, 1), options={"time_limit": time_limit, "mip_rel_gap": gap_tol})
    if res.x is not None:
        x = np.round(res.x).astype(np.int8)
        if not prog.is_feasible(x):
            x = None
    else:
        x = None
    if res.status == 0 and x is not None:
        return SolveResult(OPTIMAL, x, prog.value(x), float(getattr(res, "mip_gap", 0.0) or 0.0))
    if res.status == 2:
        return SolveResult(INFEASIBLE, None, math.nan, 0.0)
    if x is not None:
        return SolveResult(TIME_LIMIT, x, prog.value(x), float(getattr(res, "mip_gap", math.inf)))
    return SolveResult(TIME_LIMIT, None, math.nan, math.inf)
