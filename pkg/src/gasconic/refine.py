"""Feasible-point recovery with binaries fixed (upper-bound step).

With every switching decision and flow direction frozen, the remaining
nonconvexities are one equality per pipe (potential drop = w f^2 with
known sign) and one per active compressor (power-law loss). Both keep
their convex side as a cone and get the reverse side as a tangent cut
refreshed at the current iterate; slack variables with a growing penalty
keep every subproblem feasible. Iterations stop when the true residuals
drop below tolerance or the trust region collapses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compressor import compressor_loss
from .conic import LinExpr
from .builder import MinlpData, edge_lookup
from .ipm import solve_socp
from .weymouth import weymouth_residual

MAX_ITERS = 50
RESIDUAL_TOL = 1e-6
TRUST_FLOOR = 1e-6


@dataclass
class RefinedSolution:
    status: str  # feasible | locally-infeasible | iteration-limit
    values: np.ndarray | None = None
    objective: float = math.inf
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def max_residual(self):
        return max(self.residuals.values(), default=math.inf)


@dataclass
class Assignment:
    """Fixed binary state extracted from a relaxation incumbent."""

    switch: dict = field(default_factory=dict)      # (key, t) -> 0/1
    switch_pos: dict = field(default_factory=dict)
    switch_neg: dict = field(default_factory=dict)
    startup: dict = field(default_factory=dict)
    shutdown: dict = field(default_factory=dict)
    pipe_dir: dict = field(default_factory=dict)    # (key, t) -> +1/-1


def extract_assignment(data: MinlpData, relax_prog, values) -> Assignment:
    """Round the relaxation's binaries into a switching-feasible state."""
    asg = Assignment()
    for dct, out in ((data.switch, asg.switch),
                     (data.switch_pos, asg.switch_pos),
                     (data.switch_neg, asg.switch_neg),
                     (data.startup, asg.startup),
                     (data.shutdown, asg.shutdown)):
        for k, var in dct.items():
            out[k] = int(round(values[var]))
    direction = getattr(relax_prog, "direction_vars", {})
    for (key, t, sided) in data.pipe_families:
        if sided == "positive":
            asg.pipe_dir[(key, t)] = +1
        elif sided == "negative":
            asg.pipe_dir[(key, t)] = -1
        elif (key, t) in direction:
            asg.pipe_dir[(key, t)] = +1 if values[direction[(key, t)]] > 0.5 else -1
        else:
            asg.pipe_dir[(key, t)] = +1 if values[data.flow[(key, t)]] >= 0.0 else -1
    return asg


def _build_skeleton(data: MinlpData, asg: Assignment):
    """Base program with binaries pinned and direction-fixed convex rows."""
    net = data.network
    prog = data.prog.copy()
    prog.name = f"{data.prog.name}:refine"
    table = edge_lookup(net)
    X = prog.x
    for dct, vals in ((data.switch, asg.switch),
                      (data.switch_pos, asg.switch_pos),
                      (data.switch_neg, asg.switch_neg),
                      (data.startup, asg.startup),
                      (data.shutdown, asg.shutdown)):
        for k, var in dct.items():
            val = float(vals[k])
            prog.var_lb[var] = val
            prog.var_ub[var] = val

    for key, t, _ in data.pipe_families:
        pipe = table[key]
        f = data.flow[(key, t)]
        diff = X(data.pi[(pipe.from_node, t)]) - X(data.pi[(pipe.to_node, t)])
        sw = math.sqrt(pipe.w)
        if asg.pipe_dir[(key, t)] > 0:
            prog.var_lb[f] = max(prog.var_lb[f], 0.0)
            prog.add_rotated_soc(0.5, diff, [sw * X(f)], f"ref:cone[{key},{t}]")
        else:
            prog.var_ub[f] = min(prog.var_ub[f], 0.0)
            prog.add_rotated_soc(0.5, -1.0 * diff, [sw * X(f)], f"ref:cone[{key},{t}]")

    for key, t in data.comp_families:
        comp = table[key]
        r_lo, r_hi = comp.a_min ** 2, comp.a_max ** 2
        f = data.flow[(key, t)]
        l = data.loss[(key, t)]
        pii = X(data.pi[(comp.from_node, t)])
        pij = X(data.pi[(comp.to_node, t)])
        if asg.switch[(key, t)] == 0:
            prog.var_lb[f] = prog.var_ub[f] = 0.0
            prog.var_lb[l] = prog.var_ub[l] = 0.0
        elif asg.switch_pos[(key, t)] == 1:
            prog.var_lb[f] = max(prog.var_lb[f], 0.0)
            prog.add_linear(pij - r_lo * pii, ">=", 0.0, f"ref:rlo[{key},{t}]")
            prog.add_linear(pij - r_hi * pii, "<=", 0.0, f"ref:rhi[{key},{t}]")
            prog.var_lb[l] = 0.0
        else:
            prog.var_ub[f] = min(prog.var_ub[f], 0.0)
            prog.add_linear(pii - r_lo * pij, ">=", 0.0, f"ref:rlo[{key},{t}]")
            prog.add_linear(pii - r_hi * pij, "<=", 0.0, f"ref:rhi[{key},{t}]")
            prog.var_ub[l] = 0.0

    for key, t in data.valve_families:
        valve = table[key]
        r_lo, r_hi = valve.a_min ** 2, valve.a_max ** 2
        f = data.flow[(key, t)]
        pii = X(data.pi[(valve.from_node, t)])
        pij = X(data.pi[(valve.to_node, t)])
        if asg.switch[(key, t)] == 0:
            prog.var_lb[f] = prog.var_ub[f] = 0.0
        elif asg.switch_pos[(key, t)] == 1:
            prog.var_lb[f] = max(prog.var_lb[f], 0.0)
            prog.add_linear(pij - r_lo * pii, ">=", 0.0, f"ref:rlo[{key},{t}]")
            prog.add_linear(pij - r_hi * pii, "<=", 0.0, f"ref:rhi[{key},{t}]")
        else:
            prog.var_ub[f] = min(prog.var_ub[f], 0.0)
            prog.add_linear(pii - r_lo * pij, ">=", 0.0, f"ref:rlo[{key},{t}]")
            prog.add_linear(pii - r_hi * pij, "<=", 0.0, f"ref:rhi[{key},{t}]")
    return prog


def _loss_gradient(comp, pi_i, pi_j, f, kappa):
    """Value and gradient of the active-compressor loss function."""
    if f >= 0.0:
        ratio = (pi_j / pi_i) ** kappa
        g = comp.h * (ratio - 1.0) * f
        dpi_i = -comp.h * kappa * ratio * f / pi_i
        dpi_j = comp.h * kappa * ratio * f / pi_j
        df = comp.h * (ratio - 1.0)
    else:
        ratio = (pi_i / pi_j) ** kappa
        g = comp.h * (ratio - 1.0) * f
        dpi_i = comp.h * kappa * ratio * f / pi_i
        dpi_j = -comp.h * kappa * ratio * f / pi_j
        df = comp.h * (ratio - 1.0)
    return g, dpi_i, dpi_j, df


def true_objective(data: MinlpData, values) -> float:
    """Objective of the original problem evaluated exactly at a point."""
    net = data.network
    T = net.horizon
    total = 0.0
    table = edge_lookup(net)
    if data.objective in ("g1", "g3"):
        for (key, t), var in data.loss.items():
            total += table[key].fuel_cost * abs(values[var])
    if data.objective == "g1":
        for (key, t), var in data.startup.items():
            total += table[key].startup_cost * values[var]
        for (key, t), var in data.withdraw.items():
            total += table[key].withdrawal_cost * values[var]
    if data.objective == "g2":
        for key, t in data.comp_families:
            comp = table[key]
            d_now = values[data.pi[(comp.from_node, t)]] \
                - values[data.pi[(comp.to_node, t)]]
            total += net.gamma1 * abs(d_now)
            if t >= 2:
                d_prev = values[data.pi[(comp.from_node, t - 1)]] \
                    - values[data.pi[(comp.to_node, t - 1)]]
                total += net.gamma2 * abs(d_now - d_prev)
    return total


def minlp_residuals(data: MinlpData, values) -> dict:
    """Exact per-family violations of the original MINLP at a point."""
    net = data.network
    table = edge_lookup(net)
    out = {"balance": 0.0, "storage": 0.0, "switching": 0.0, "bounds": 0.0,
           "weymouth": 0.0, "loss": 0.0, "ratio": 0.0, "valve": 0.0}
    for expr, sense, rhs, label in data.prog.rows:
        if label.startswith(("abs", "g2")):
            continue
        val = expr.value(values)
        r = abs(val - rhs) if sense == "==" else \
            max(val - rhs, 0.0) if sense == "<=" else max(rhs - val, 0.0)
        if label.startswith("bal"):
            out["balance"] = max(out["balance"], r)
        elif label.startswith("store"):
            out["storage"] = max(out["storage"], r)
        elif label.startswith(("minup", "mindown", "updown", "uv")):
            out["switching"] = max(out["switching"], r)
        elif label.startswith("short"):
            out["weymouth"] = max(out["weymouth"], r)
    for j in range(data.prog.num_vars):
        lo, hi = data.prog.var_lb[j], data.prog.var_ub[j]
        v = values[j]
        r = max(lo - v if math.isfinite(lo) else 0.0,
                v - hi if math.isfinite(hi) else 0.0, 0.0)
        out["bounds"] = max(out["bounds"], r)
    for key, t, _ in data.pipe_families:
        pipe = table[key]
        r = abs(weymouth_residual(values[data.flow[(key, t)]],
                                  values[data.pi[(pipe.from_node, t)]],
                                  values[data.pi[(pipe.to_node, t)]], pipe.w))
        out["weymouth"] = max(out["weymouth"], r)
    kappa = net.kappa_hat
    for key, t in data.comp_families:
        comp = table[key]
        x = values[data.switch[(key, t)]]
        f = values[data.flow[(key, t)]]
        l = values[data.loss[(key, t)]]
        pii = values[data.pi[(comp.from_node, t)]]
        pij = values[data.pi[(comp.to_node, t)]]
        if x < 0.5:
            out["loss"] = max(out["loss"], abs(f), abs(l))
        else:
            out["loss"] = max(out["loss"],
                              abs(l - compressor_loss(pii, pij, f, kappa, comp.h)))
            r_lo, r_hi = comp.a_min ** 2, comp.a_max ** 2
            ratio = pij / pii if f >= 0.0 else pii / pij
            out["ratio"] = max(out["ratio"], r_lo - ratio, ratio - r_hi, 0.0)
    for key, t in data.valve_families:
        valve = table[key]
        x = values[data.switch[(key, t)]]
        f = values[data.flow[(key, t)]]
        pii = values[data.pi[(valve.from_node, t)]]
        pij = values[data.pi[(valve.to_node, t)]]
        if x < 0.5:
            out["valve"] = max(out["valve"], abs(f))
        else:
            r_lo, r_hi = valve.a_min ** 2, valve.a_max ** 2
            ratio = pij / pii if f >= 0.0 else pii / pij
            out["valve"] = max(out["valve"], r_lo - ratio, ratio - r_hi, 0.0)
    return out


def fix_and_refine(data: MinlpData, asg: Assignment, warm_values=None,
                   max_iters=MAX_ITERS, tol=RESIDUAL_TOL,
                   solver_opts=None) -> RefinedSolution:
    """Sequential convex programming with the binaries frozen."""
    net = data.network
    table = edge_lookup(net)
    skeleton = _build_skeleton(data, asg)
    n_base = data.prog.num_vars
    opts = solver_opts or {}
    kappa = net.kappa_hat

    if warm_values is not None:
        point = np.array(warm_values[:n_base], dtype=float)
    else:
        point = np.array([(skeleton.var_lb[j] + skeleton.var_ub[j]) / 2.0
                          if math.isfinite(skeleton.var_lb[j])
                          and math.isfinite(skeleton.var_ub[j]) else 0.0
                          for j in range(n_base)])
    point = np.clip(point, skeleton.var_lb[:], skeleton.var_ub[:])

    penalty = 1e3
    trust = None
    best = None
    prev_res = math.inf
    for it in range(1, max_iters + 1):
        prog = skeleton.copy()
        X = prog.x
        slack_vars = []

        def add_slack(name):
            sv = prog.add_var(name, 0.0, 1e6)
            slack_vars.append(sv)
            prog.add_objective(penalty * X(sv))
            return sv

        for key, t, _ in data.pipe_families:
            pipe = table[key]
            f = data.flow[(key, t)]
            fv = point[f]
            diff = X(data.pi[(pipe.from_node, t)]) - X(data.pi[(pipe.to_node, t)])
            sv = add_slack(f"sl[{key},{t}]")
            tangent = pipe.w * fv * (2.0 * X(f) - fv)
            if asg.pipe_dir[(key, t)] > 0:
                prog.add_linear(diff - tangent - X(sv), "<=", 0.0,
                                f"tan[{key},{t}]")
            else:
                prog.add_linear(-1.0 * diff - tangent - X(sv), "<=", 0.0,
                                f"tan[{key},{t}]")

        for key, t in data.comp_families:
            if asg.switch[(key, t)] == 0:
                continue
            comp = table[key]
            f = data.flow[(key, t)]
            l = data.loss[(key, t)]
            ii = data.pi[(comp.from_node, t)]
            jj = data.pi[(comp.to_node, t)]
            g0, dpi, dpj, df = _loss_gradient(comp, point[ii], point[jj],
                                              point[f], kappa)
            lin = g0 + dpi * (X(ii) - point[ii]) + dpj * (X(jj) - point[jj]) \
                + df * (X(f) - point[f])
            sv = add_slack(f"slc[{key},{t}]")
            prog.add_linear(X(l) - lin - X(sv), "<=", 0.0, f"lin+[{key},{t}]")
            prog.add_linear(X(l) - lin + X(sv), ">=", 0.0, f"lin-[{key},{t}]")
            if trust is not None:
                for var in (ii, jj, f):
                    span = trust * max(1.0, abs(point[var]))
                    prog.add_linear(X(var), "<=", point[var] + span)
                    prog.add_linear(X(var), ">=", point[var] - span)

        sol = solve_socp(prog.freeze(), **opts)
        if sol.status == "infeasible":
            return RefinedSolution(status="locally-infeasible", iterations=it)
        if sol.x is None:
            return RefinedSolution(status="iteration-limit", iterations=it)
        new_point = sol.x[:n_base]
        res = minlp_residuals(data, new_point)
        worst = max(res["weymouth"], res["loss"])
        if best is None or worst < best[0]:
            best = (worst, new_point.copy(), res)
        if worst <= tol:
            obj = true_objective(data, new_point)
            return RefinedSolution(status="feasible", values=new_point,
                                   objective=obj, residuals=res, iterations=it)
        slack_used = max((sol.x[sv] for sv in slack_vars), default=0.0)
        if slack_used > tol:
            penalty = min(penalty * 10.0, 1e9)
        if worst > prev_res * 0.9:
            trust = 0.5 * (trust if trust is not None else 1.0)
            if trust < TRUST_FLOOR:
                break
        prev_res = worst
        point = new_point

    worst, pt, res = best if best is not None else (math.inf, None, {})
    return RefinedSolution(status="iteration-limit", values=pt,
                           objective=true_objective(data, pt) if pt is not None
                           else math.inf,
                           residuals=res, iterations=max_iters)
