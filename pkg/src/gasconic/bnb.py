"""Best-bound branch-and-bound over the binary variables of a frozen program.

Node relaxations are solved by the interior-point method from a cold
start: re-centering a parent iterate that terminated on the cone
boundary costs more iterations than the least-squares initialization,
so warm starts are deliberately not used. Branching is most-fractional
with lowest-index tie break, so runs are reproducible: node order
depends only on the instance.

Optional per-node log lines have the documented format::

    node <id> depth <d> status <s> bound <v> frac <f>
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ipm import solve_socp

INT_TOL = 1e-6


@dataclass
class MipSolution:
    status: str  # optimal | infeasible | unbounded | time-limit | node-limit
    incumbent: np.ndarray | None = None
    incumbent_objective: float = math.inf
    best_bound: float = -math.inf
    rel_gap: float = math.inf
    node_count: int = 0
    wall_time: float = 0.0
    root_solution: object = None

    @property
    def values(self):
        return self.incumbent


def _fractionality(x, binaries, priority=None):
    """Worst integrality violation and the branching variable.

    With priorities, the branching variable is the most fractional one
    inside the highest-priority class that still has a fractional entry
    (switching binaries dominate the problem structure, so fixing them
    first moves the dual bound far faster than direction binaries).
    """
    worst = 0.0
    best_key, var = None, None
    for j in binaries:
        d = abs(x[j] - round(x[j]))
        worst = max(worst, d)
        if d <= INT_TOL:
            continue
        key = (priority[j] if priority is not None else 0, -d, j)
        if best_key is None or key < best_key:
            best_key, var = key, j
    return worst, var


def _default_priority(std):
    """Branch switching binaries first, start/stop next, directions last."""
    names = std.prog.var_names
    prio = {}
    for j in std.binaries:
        name = names[j]
        if name.startswith(("x[", "x+[", "x-[")):
            prio[j] = 0
        elif name.startswith(("u[", "v[")):
            prio[j] = 1
        else:
            prio[j] = 2
    return prio


class _Node:
    __slots__ = ("bound", "fixes", "depth")

    def __init__(self, bound, fixes, depth):
        self.bound = bound
        self.fixes = fixes
        self.depth = depth


def solve_misocp(std, mip_gap=1e-4, int_tol=INT_TOL, node_limit=200000,
                 time_limit=None, gap_tol=1e-8, feas_tol=1e-8,
                 log=None, heuristic=True, primal_heuristic=None,
                 heuristic_period=15, branch_priority=None) -> MipSolution:
    """Solve min c'x over the standard form with its binaries integral.

    Returns a certified best bound regardless of the termination cause;
    `rel_gap` is (incumbent - bound) / max(1, |incumbent|).

    `primal_heuristic(x_fractional)` may return (objective, values) for
    a feasible completion of a fractional node solution (for example by
    local refinement of the original problem); it is invoked at the root
    and every `heuristic_period` processed nodes.
    """
    t0 = time.monotonic()
    binaries = std.binaries
    if branch_priority is None:
        branch_priority = _default_priority(std)

    def remaining(deadline):
        if deadline is None:
            return None
        return max(deadline - time.monotonic(), 0.1)

    deadline = None if time_limit is None else t0 + time_limit

    def solve_node(fixes):
        fixed = {var: lo for var, (lo, hi) in fixes.items()}
        return solve_socp(std, gap_tol=gap_tol, feas_tol=feas_tol,
                          fixed=fixed, time_limit=remaining(deadline))

    result = MipSolution(status="optimal")
    root = solve_node({})
    result.node_count = 1
    result.root_solution = root
    if root.status == "infeasible":
        result.status = "infeasible"
        result.wall_time = time.monotonic() - t0
        return result
    if root.status == "unbounded":
        result.status = "unbounded"
        result.wall_time = time.monotonic() - t0
        return result
    if root.x is None:
        result.status = "iteration-limit"
        result.wall_time = time.monotonic() - t0
        return result

    incumbent = None
    incumbent_obj = math.inf
    counter = 0
    heap = []

    def maybe_log(node_id, depth, status, bound, frac):
        if log is not None:
            log(f"node {node_id} depth {depth} status {status} "
                f"bound {bound:.10g} frac {frac:.3g}")

    def push(node):
        # depth-biased tie break: on bound plateaus the search dives,
        # which reaches integral leaves quickly under best-bound order
        nonlocal counter
        counter += 1
        heapq.heappush(heap, (node.bound, -node.depth, counter, node))

    def accept_incumbent(x, obj):
        nonlocal incumbent, incumbent_obj
        if obj < incumbent_obj - 1e-12:
            incumbent = x.copy()
            incumbent_obj = obj

    def try_rounding(x):
        fixes = {j: (float(round(x[j])), float(round(x[j]))) for j in binaries}
        sol = solve_node(fixes)
        if sol.status == "optimal":
            accept_incumbent(sol.x, sol.primal_objective)

    def try_primal_heuristic(x):
        if primal_heuristic is None:
            return
        out = primal_heuristic(x)
        if out is not None:
            obj, values = out
            accept_incumbent(np.asarray(values, dtype=float), obj)

    frac, var = _fractionality(root.x, binaries, branch_priority)
    if frac <= int_tol and root.status == "optimal":
        accept_incumbent(root.x, root.primal_objective)
        result.best_bound = root.primal_objective
        result.incumbent = incumbent
        result.incumbent_objective = incumbent_obj
        result.rel_gap = 0.0
        result.wall_time = time.monotonic() - t0
        maybe_log(0, 0, "integral", root.primal_objective, frac)
        return result
    maybe_log(0, 0, "fractional", root.primal_objective, frac)
    try_primal_heuristic(root.x)
    if heuristic and binaries and incumbent is None:
        try_rounding(root.x)

    for branch_val in (0.0, 1.0):
        fixes = {var: (branch_val, branch_val)}
        push(_Node(root.primal_objective, fixes, 1))

    node_id = 0
    status = "optimal"
    while heap:
        best_open = heap[0][0]
        bound_now = min(best_open, incumbent_obj)
        gap_now = (incumbent_obj - bound_now) / max(1.0, abs(incumbent_obj))
        if incumbent is not None and gap_now <= mip_gap:
            break
        if deadline is not None and time.monotonic() > deadline:
            status = "time-limit"
            break
        if result.node_count >= node_limit:
            status = "node-limit"
            break
        _, _, _, node = heapq.heappop(heap)
        if incumbent is not None and \
                node.bound >= incumbent_obj - mip_gap * max(1.0, abs(incumbent_obj)):
            continue
        node_id += 1
        sol = solve_node(node.fixes)
        result.node_count += 1
        if sol.status == "infeasible":
            maybe_log(node_id, node.depth, "infeasible", node.bound, 0.0)
            continue
        if sol.x is None:
            maybe_log(node_id, node.depth, "failed", node.bound, 0.0)
            continue
        value = sol.primal_objective
        # an unconverged node must not tighten the certified bound
        bound = max(value, node.bound) if sol.status == "optimal" else node.bound
        if incumbent is not None and \
                bound >= incumbent_obj - 1e-12 * max(1.0, abs(incumbent_obj)):
            maybe_log(node_id, node.depth, "pruned", bound, 0.0)
            continue
        frac, var = _fractionality(sol.x, binaries, branch_priority)
        maybe_log(node_id, node.depth, sol.status, bound, frac)
        if frac > int_tol and result.node_count % heuristic_period == 0:
            try_primal_heuristic(sol.x)
        if frac <= int_tol:
            if sol.status == "optimal":
                accept_incumbent(sol.x, value)
                continue
            if var is None:
                continue  # unconverged but nothing left to branch on
        for branch_val in (0.0, 1.0):
            fixes = dict(node.fixes)
            fixes[var] = (branch_val, branch_val)
            push(_Node(bound, fixes, node.depth + 1))

    if heap:
        best_bound = min(min(item[0] for item in heap), incumbent_obj)
    else:
        best_bound = incumbent_obj if incumbent is not None else math.inf
    if incumbent is None:
        if status == "optimal":
            status = "infeasible"
        result.best_bound = best_bound if heap else math.inf
    else:
        result.best_bound = best_bound
        result.incumbent = incumbent
        result.incumbent_objective = incumbent_obj
        result.rel_gap = max(incumbent_obj - best_bound, 0.0) / \
            max(1.0, abs(incumbent_obj))
    result.status = status
    result.wall_time = time.monotonic() - t0
    return result
