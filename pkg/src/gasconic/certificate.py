"""Independent residual checks for solver output.

Everything is recomputed from the original (unscaled) program rows with
plain numpy arithmetic; nothing from the solver's internal state is
trusted beyond the solution vectors themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram


@dataclass
class ResidualReport:
    max_equality: float = 0.0
    max_inequality: float = 0.0
    max_bound: float = 0.0
    max_cone: float = 0.0
    max_integrality: float = 0.0
    duality_gap: float = math.nan
    violated: list = field(default_factory=list)

    @property
    def max_violation(self):
        return max(self.max_equality, self.max_inequality, self.max_bound,
                   self.max_cone, self.max_integrality)

    def ok(self, tol=1e-8):
        return self.max_violation <= tol


def check_certificate(prog: ConicProgram, x, primal_objective=None,
                      dual_objective=None, tol=1e-8) -> ResidualReport:
    """Recompute every constraint residual of `prog` at the point x."""
    x = np.asarray(x, dtype=float)
    rep = ResidualReport()

    def flag(label, amount):
        if amount > tol:
            rep.violated.append((label, amount))

    for expr, sense, rhs, label in prog.rows:
        val = expr.value(x)
        if sense == "==":
            r = abs(val - rhs)
            rep.max_equality = max(rep.max_equality, r)
        elif sense == "<=":
            r = max(val - rhs, 0.0)
            rep.max_inequality = max(rep.max_inequality, r)
        else:
            r = max(rhs - val, 0.0)
            rep.max_inequality = max(rep.max_inequality, r)
        flag(label or sense, r)

    for j in range(prog.num_vars):
        lo, hi = prog.var_lb[j], prog.var_ub[j]
        r = 0.0
        if math.isfinite(lo):
            r = max(r, lo - x[j])
        if math.isfinite(hi):
            r = max(r, x[j] - hi)
        rep.max_bound = max(rep.max_bound, r)
        flag(f"bound:{prog.var_names[j]}", r)

    for exprs, label in prog.soc_blocks:
        t = exprs[0].value(x)
        norm = math.sqrt(sum(e.value(x) ** 2 for e in exprs[1:]))
        r = max(norm - t, 0.0)
        rep.max_cone = max(rep.max_cone, r)
        flag(label or "soc", r)
    for (u, v, xs), label in prog.rsoc_blocks:
        uv, vv = u.value(x), v.value(x)
        sq = sum(e.value(x) ** 2 for e in xs)
        r = max(sq - 2.0 * uv * vv, 0.0, -uv, -vv)
        rep.max_cone = max(rep.max_cone, r)
        flag(label or "rsoc", r)

    for j in prog.binaries:
        r = abs(x[j] - round(x[j]))
        rep.max_integrality = max(rep.max_integrality, r)
        flag(f"integrality:{prog.var_names[j]}", r)

    if primal_objective is not None:
        recomputed = prog.objective.value(x) + prog.obj_const
        flag("objective-mismatch", abs(recomputed - primal_objective))
    if primal_objective is not None and dual_objective is not None:
        rep.duality_gap = abs(primal_objective - dual_objective) / \
            max(1.0, abs(primal_objective), abs(dual_objective))
    return rep


def check_infeasibility_ray(std, ray_z, tol=1e-8):
    """Verify a dual improving ray on standard-form data (unscaled).

    A valid certificate satisfies A'z ~ 0, b'z < 0 and z in the dual
    cone; returns (valid, residual).
    """
    A = std.A.multiply(1.0 / std.row_scale[:, None]).multiply(std.col_scale)
    b = std.b / std.row_scale
    z = np.asarray(ray_z, dtype=float)
    bz = b @ z
    if bz >= -tol:
        return False, math.inf
    resid = np.linalg.norm(A.T @ z) / (-bz)
    inside = True
    q0 = std.p
    if z[q0:q0 + std.q].min(initial=0.0) < -tol:
        inside = False
    start = std.p + std.q
    for dim in std.socs:
        blk = z[start:start + dim]
        if blk[0] + tol < np.linalg.norm(blk[1:]):
            inside = False
        start += dim
    return inside and resid <= tol, resid
