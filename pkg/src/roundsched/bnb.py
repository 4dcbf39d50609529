"""Deterministic branch-and-bound over bounded integer variables.

Search is depth-first on the first unfixed variable in declaration order,
lowest value first, with bounds-consistency propagation of all linear
constraints between decisions. Every propagated bound carries the latest
decision level it depends on, so a conflict jumps straight back to the
most recent decision that actually contributed (implication-level
backjumping); intermediate unrelated decisions are not re-enumerated.

Variables flagged dominance-minimal (resp. -maximal) by the model builder
are assigned their propagated minimum (maximum) and never retried at
other values: the builder guarantees any completion is dominated by one
using that value. Feasibility verdicts are exact.

With an objective the solver proves optimality by probing the propagated
bound and then bisecting on the objective value with an added bound row,
so a feasible result is optimal unless the node budget ran out (then the
best assignment found is returned as `unknown`).

The same (problem, budget) input always yields the same output.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .milp import MilpProblem, MilpSolution


@dataclass(frozen=True)
class SolveBudget:
    max_nodes: int = 2_000_000
    max_time: Optional[float] = None    # seconds; breaks cross-machine determinism


class _Engine:
    def __init__(self, problem: MilpProblem) -> None:
        self.n = len(problem.variables)
        self.lo0 = [v.lower for v in problem.variables]
        self.hi0 = [v.upper for v in problem.variables]
        self.min_dom = set(problem.min_dominant)
        self.max_dom = set(problem.max_dominant)
        self.rows: list[tuple[tuple[int, ...], tuple[int, ...], int]] = []
        self.var_rows: list[list[int]] = [[] for _ in range(self.n)]
        for con in problem.constraints:
            idx = tuple(p for _, p in con.terms)
            coef = tuple(c for c, _ in con.terms)
            self._append_row(idx, coef, con.rhs)
            if con.sense == "=":
                self._append_row(idx, tuple(-c for c in coef), -con.rhs)
        self.base_rows = len(self.rows)
        self.inq = bytearray(len(self.rows))
        self.nodes = 0
        self.deadline: Optional[float] = None

    def _append_row(self, idx: tuple[int, ...], coef: tuple[int, ...], rhs: int) -> None:
        if any(c == 0 for c in coef):
            keep = tuple(k for k in range(len(coef)) if coef[k] != 0)
            idx = tuple(idx[k] for k in keep)
            coef = tuple(coef[k] for k in keep)
        r = len(self.rows)
        self.rows.append((idx, coef, rhs))
        for v in idx:
            self.var_rows[v].append(r)

    def push_row(self, terms: Sequence[tuple[int, int]], rhs: int) -> None:
        idx = tuple(p for _, p in terms)
        coef = tuple(c for c, _ in terms)
        self._append_row(idx, coef, rhs)
        self.inq = bytearray(len(self.rows))

    def pop_row(self) -> None:
        idx, _, _ = self.rows.pop()
        r = len(self.rows)
        for v in idx:
            self.var_rows[v].remove(r)
        self.inq = bytearray(len(self.rows))

    def _propagate(self, lo, hi, dep, seed):
        """Bounds consistency to fixpoint.

        `dep[v]` is a bitmask of the decision levels the current bounds of
        v derive from. Returns None when consistent, else the dependency
        mask of the violated row (a sound no-good for the conflict).
        """
        rows, var_rows, inq = self.rows, self.var_rows, self.inq
        dq = deque()
        for r in seed:
            if not inq[r]:
                inq[r] = 1
                dq.append(r)
        while dq:
            r = dq.popleft()
            inq[r] = 0
            idx, coef, rhs = rows[r]
            smin = 0
            stamp = 0
            for k in range(len(idx)):
                c = coef[k]
                v = idx[k]
                smin += c * lo[v] if c > 0 else c * hi[v]
                stamp |= dep[v]
            slack = rhs - smin
            if slack < 0:
                while dq:
                    inq[dq.pop()] = 0
                return stamp
            for k in range(len(idx)):
                c = coef[k]
                v = idx[k]
                if c > 0:
                    nb = lo[v] + slack // c
                    if nb < hi[v]:
                        hi[v] = nb
                        dep[v] |= stamp
                        for r2 in var_rows[v]:
                            if not inq[r2]:
                                inq[r2] = 1
                                dq.append(r2)
                else:
                    nb = hi[v] - slack // (-c)
                    if nb > lo[v]:
                        lo[v] = nb
                        dep[v] |= stamp
                        for r2 in var_rows[v]:
                            if not inq[r2]:
                                inq[r2] = 1
                                dq.append(r2)
        return None

    def _out_of_budget(self, budget: SolveBudget) -> bool:
        if self.nodes >= budget.max_nodes:
            return True
        if self.deadline is not None and self.nodes % 256 == 0:
            return time.monotonic() > self.deadline
        return False

    def search(self, budget: SolveBudget,
               start: Optional[tuple[list[int], list[int]]] = None):
        """Returns (status, assignment|None); status feasible/infeasible/unknown."""
        dep = [0] * self.n
        if start is None:
            lo, hi = self.lo0[:], self.hi0[:]
            for v in range(self.n):
                if lo[v] > hi[v]:
                    return "infeasible", None
            if self._propagate(lo, hi, dep, range(len(self.rows))) is not None:
                return "infeasible", None
        else:
            lo, hi = start[0][:], start[1][:]
            if self._propagate(lo, hi, dep,
                               range(self.base_rows, len(self.rows))) is not None:
                return "infeasible", None

        # trail entries: (saved lo, saved hi, saved dep, var); the entry at
        # index i is the pre-state of decision level i+1, whose bit stamps
        # every bound that depends on it
        trail: list[tuple[list[int], list[int], list[int], int]] = []
        scan = 0
        while True:
            j = scan
            while j < self.n and lo[j] == hi[j]:
                j += 1
            if j == self.n:
                return "feasible", lo
            self.nodes += 1
            if self._out_of_budget(budget):
                return "unknown", None
            trail.append((lo[:], hi[:], dep[:], j))
            if j in self.max_dom:
                # forced move: the value is the propagated bound, whose
                # dependencies dep[j] already carries; alternatives are
                # dominated and never retried
                lo[j] = hi[j]
            elif j in self.min_dom:
                hi[j] = lo[j]
            else:
                hi[j] = lo[j]
                dep[j] |= 1 << len(trail)
            conflict = self._propagate(lo, hi, dep, self.var_rows[j])
            while conflict is not None:
                if conflict == 0 or not trail:
                    return "infeasible", None
                level = conflict.bit_length() - 1    # latest involved decision
                del trail[level:]
                lo, hi, dep, j = trail.pop()
                scan = j
                reason = conflict & ~(1 << level)
                if j in self.min_dom or j in self.max_dom:
                    conflict = reason | dep[j]
                    continue
                # values up to the current one are refuted by `reason` plus
                # whatever already justified the bound, so the raise itself
                # is not a free decision and carries no own level bit
                dep[j] |= reason
                lo[j] += 1
                if lo[j] > hi[j]:
                    conflict = dep[j]
                    continue
                self.nodes += 1
                if self._out_of_budget(budget):
                    return "unknown", None
                conflict = self._propagate(lo, hi, dep, self.var_rows[j])
            scan = j


def solve(problem: MilpProblem, budget: Optional[SolveBudget] = None) -> MilpSolution:
    """Solve exactly; with an objective, prove the optimum by bound probing
    and bisection."""
    budget = budget or SolveBudget()
    eng = _Engine(problem)
    if budget.max_time is not None:
        eng.deadline = time.monotonic() + budget.max_time

    status, sol = eng.search(budget)
    if status != "feasible":
        return MilpSolution(status=status, nodes=eng.nodes)
    if not problem.objective:
        return MilpSolution(status="feasible", assignment=tuple(sol), nodes=eng.nodes)

    obj = list(problem.objective)
    value = sum(c * sol[p] for c, p in obj)
    # root-propagated state gives a sound optimistic bound
    lo_r, hi_r = eng.lo0[:], eng.hi0[:]
    eng._propagate(lo_r, hi_r, [0] * eng.n, range(eng.base_rows))
    best_possible = sum(c * (hi_r[p] if c > 0 else lo_r[p]) for c, p in obj)

    best = sol
    top_first = True
    while value < best_possible:
        if top_first:
            # probing the bound itself first pins the objective variables by
            # propagation; when the bound is attainable this proves the
            # optimum in a single search
            mid = best_possible
            top_first = False
        else:
            mid = (value + best_possible + 1) // 2
        eng.push_row([(-c, p) for c, p in obj], -mid)
        status, sol = eng.search(budget, start=(lo_r, hi_r))
        eng.pop_row()
        if status == "unknown":
            return MilpSolution(status="unknown", assignment=tuple(best),
                                objective_value=value, nodes=eng.nodes)
        if status == "feasible":
            best = sol
            value = sum(c * sol[p] for c, p in obj)
        else:
            best_possible = mid - 1
    return MilpSolution(status="feasible", assignment=tuple(best),
                        objective_value=value, nodes=eng.nodes)
