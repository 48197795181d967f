"""Independent brute-force verifiers for the acceptance suite.

Nothing here touches the conic solver: feasibility and optima come from
mode enumeration plus damped least-squares / SLSQP polishing, supports
come from a closed-form parameterization of the pressure-loss curve,
and extremality checks are LP separations. Accuracy is the declared
oracle tolerance (0.5% relative on objectives), not solver precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .builder import MinlpData, edge_lookup
from .compressor import compressor_loss
from .network import Compressor, PipeBox, Valve

SIZE_LIMITS = dict(pipes=3, active=3, periods=4)


@dataclass
class OracleResult:
    objective: float
    values: dict = field(default_factory=dict)
    assignments_tried: int = 0
    feasible_assignments: int = 0
    starts: int = 0


# ---------------------------------------------------------------------------
# mode-sequence enumeration
# ---------------------------------------------------------------------------


def _switching_ok(seq_on, min_up, min_down):
    """Check a 0/1 schedule with the initial state off."""
    T = len(seq_on)
    prev = 0
    for t in range(T):
        if seq_on[t] > prev:  # turned on at t
            for tp in range(t + 1, min(t + min_up, T)):
                if not seq_on[tp]:
                    return False
        if seq_on[t] < prev:  # turned off at t
            for tp in range(t + 1, min(t + min_down, T)):
                if seq_on[tp]:
                    return False
        prev = seq_on[t]
    return True


def element_mode_sequences(elem, T):
    """Switching-feasible per-period modes: 0 off, +1/-1 flow direction.

    Regular valves get a single merged on mode (+1 with two-sided flow).
    """
    if isinstance(elem, Valve) and elem.kind == "regular":
        alphabet = (0, 1)
    else:
        alphabet = (0, 1, -1)
    out = []
    for seq in itertools.product(alphabet, repeat=T):
        if _switching_ok([1 if m else 0 for m in seq], elem.min_up, elem.min_down):
            out.append(seq)
    return out


# ---------------------------------------------------------------------------
# per-assignment continuous problem
# ---------------------------------------------------------------------------


class _ContinuousProblem:
    """Smooth residual system and objective with modes fixed."""

    def __init__(self, data: MinlpData, modes):
        self.data = data
        self.net = data.network
        self.T = self.net.horizon
        self.modes = modes  # (active key) -> sequence of modes
        self.table = edge_lookup(self.net)
        self.idx = {}
        lo, hi = [], []

        def reg(name, lb, ub):
            self.idx[name] = len(lo)
            lo.append(lb)
            hi.append(ub)

        net, T = self.net, self.T
        for node in net.nodes:
            for t in range(1, T + 1):
                reg(("pi", node.id, t), node.pi_min, node.pi_max)
        for i, pipe in enumerate(net.pipes):
            key = ("P", i)
            if pipe.kind == "short":
                flo, fhi = pipe.f_min, pipe.f_max
                for t in range(1, T + 1):
                    reg(("f", key, t), flo, fhi)
                continue
            box = net.pipe_boxes[pipe.key]
            for t in range(1, T + 1):
                reg(("f", key, t), box.alpha_lo, box.alpha_hi)
        for i, comp in enumerate(net.compressors):
            key = ("C", i)
            for t in range(1, T + 1):
                mode = modes[key][t - 1]
                if mode == 0:
                    reg(("f", key, t), 0.0, 0.0)
                elif mode > 0:
                    reg(("f", key, t), 0.0, comp.f_max)
                else:
                    reg(("f", key, t), comp.f_min, 0.0)
        for i, valve in enumerate(net.valves):
            key = ("V", i)
            merged = valve.kind == "regular"
            for t in range(1, T + 1):
                mode = modes[key][t - 1]
                if mode == 0:
                    reg(("f", key, t), 0.0, 0.0)
                elif merged:
                    reg(("f", key, t), valve.f_min, valve.f_max)
                elif mode > 0:
                    reg(("f", key, t), 0.0, valve.f_max)
                else:
                    reg(("f", key, t), valve.f_min, 0.0)
        for i, store in enumerate(net.stores):
            key = ("S", i)
            cap_in = (store.s_max - store.s_min) / store.eta_in
            cap_out = (store.s_max - store.s_min) / store.eta_out
            for t in range(1, T + 1):
                reg(("s", key, t), store.s_min, store.s_max)
                reg(("s+", key, t), 0.0, cap_in)
                reg(("s-", key, t), 0.0, cap_out)
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    def _get(self, y, name):
        return y[self.idx[name]]

    def loss_of(self, y, key, t):
        comp = self.table[key]
        mode = self.modes[key][t - 1]
        if mode == 0:
            return 0.0
        pii = self._get(y, ("pi", comp.from_node, t))
        pij = self._get(y, ("pi", comp.to_node, t))
        f = self._get(y, ("f", key, t))
        return compressor_loss(pii, pij, f, self.net.kappa_hat, comp.h)

    def equality_residuals(self, y):
        net, T = self.net, self.T
        res = []
        for node in net.nodes:
            for t in range(1, T + 1):
                acc = -self.data.loads(node.id, t)
                for i, pipe in enumerate(net.pipes):
                    key = ("P", i)
                    if pipe.from_node == node.id:
                        acc += self._get(y, ("f", key, t))
                    if pipe.to_node == node.id:
                        acc -= self._get(y, ("f", key, t))
                for i, comp in enumerate(net.compressors):
                    key = ("C", i)
                    if comp.from_node == node.id:
                        acc += self._get(y, ("f", key, t)) - self.loss_of(y, key, t)
                    if comp.to_node == node.id:
                        acc -= self._get(y, ("f", key, t)) - self.loss_of(y, key, t)
                for i, valve in enumerate(net.valves):
                    key = ("V", i)
                    if valve.from_node == node.id:
                        acc += self._get(y, ("f", key, t))
                    if valve.to_node == node.id:
                        acc -= self._get(y, ("f", key, t))
                for i, store in enumerate(net.stores):
                    key = ("S", i)
                    if store.node == node.id:
                        acc += self._get(y, ("s+", key, t)) \
                            - self._get(y, ("s-", key, t))
                res.append(acc)
        for i, store in enumerate(net.stores):
            key = ("S", i)
            for t in range(1, T + 1):
                prev = store.s_init if t == 1 else self._get(y, ("s", key, t - 1))
                res.append(self._get(y, ("s", key, t)) - prev
                           - store.eta_in * self._get(y, ("s+", key, t))
                           + store.eta_out * self._get(y, ("s-", key, t)))
            res.append(self._get(y, ("s", key, T)) - store.s_init)
        for i, pipe in enumerate(net.pipes):
            key = ("P", i)
            for t in range(1, T + 1):
                d = self._get(y, ("pi", pipe.from_node, t)) \
                    - self._get(y, ("pi", pipe.to_node, t))
                if pipe.kind == "short":
                    res.append(d)
                else:
                    f = self._get(y, ("f", key, t))
                    res.append(d - pipe.w * abs(f) * f)
        for i, valve in enumerate(net.valves):
            if valve.kind != "regular":
                continue
            key = ("V", i)
            for t in range(1, T + 1):
                if self.modes[key][t - 1] != 0:
                    res.append(self._get(y, ("pi", valve.from_node, t))
                               - self._get(y, ("pi", valve.to_node, t)))
        return np.array(res)

    def ratio_constraints(self, y):
        """Nonnegative-when-feasible slack values for ratio boxes."""
        out = []
        for kind, elems in (("C", self.net.compressors), ("V", self.net.valves)):
            for i, elem in enumerate(elems):
                if isinstance(elem, Valve) and elem.kind == "regular":
                    continue
                key = (kind, i)
                r_lo, r_hi = elem.a_min ** 2, elem.a_max ** 2
                for t in range(1, self.T + 1):
                    mode = self.modes[key][t - 1]
                    if mode == 0:
                        continue
                    pii = self._get(y, ("pi", elem.from_node, t))
                    pij = self._get(y, ("pi", elem.to_node, t))
                    ratio = pij / pii if mode > 0 else pii / pij
                    out.append(ratio - r_lo)
                    out.append(r_hi - ratio)
        return np.array(out)

    def feasibility_residuals(self, y):
        eq = self.equality_residuals(y)
        hinge = np.minimum(self.ratio_constraints(y), 0.0)
        return np.concatenate([eq, hinge]) if hinge.size else eq

    def objective(self, y):
        data, net = self.data, self.net
        total = 0.0
        if data.objective in ("g1", "g3"):
            for i, comp in enumerate(net.compressors):
                key = ("C", i)
                for t in range(1, self.T + 1):
                    total += comp.fuel_cost * abs(self.loss_of(y, key, t))
        if data.objective == "g1":
            for i, comp in enumerate(net.compressors):
                key = ("C", i)
                prev = 0
                for t in range(1, self.T + 1):
                    on = 1 if self.modes[key][t - 1] else 0
                    if on > prev:
                        total += comp.startup_cost
                    prev = on
            for i, store in enumerate(net.stores):
                key = ("S", i)
                for t in range(1, self.T + 1):
                    total += store.withdrawal_cost * self._get(y, ("s-", key, t))
        if data.objective == "g2":
            for i, comp in enumerate(net.compressors):
                for t in range(1, self.T + 1):
                    d = self._get(y, ("pi", comp.from_node, t)) \
                        - self._get(y, ("pi", comp.to_node, t))
                    total += net.gamma1 * abs(d)
                    if t >= 2:
                        dp = self._get(y, ("pi", comp.from_node, t - 1)) \
                            - self._get(y, ("pi", comp.to_node, t - 1))
                        total += net.gamma2 * abs(d - dp)
        return total

    def start_points(self, rng, count):
        mid = np.where(np.isfinite(self.lo) & np.isfinite(self.hi),
                       (self.lo + self.hi) / 2.0, 0.0)
        pts = [mid]
        span = np.where(np.isfinite(self.hi - self.lo), self.hi - self.lo, 2.0)
        for _ in range(count - 1):
            jitter = rng.uniform(-0.45, 0.45, size=mid.size) * span
            pts.append(np.clip(mid + jitter, self.lo, self.hi))
        return pts

    def solve(self, rng, starts=10, feas_tol=1e-8):
        """Multi-start feasibility then objective polishing."""
        best_feas = None
        for y0 in self.start_points(rng, starts):
            try:
                res = optimize.least_squares(
                    self.feasibility_residuals, y0,
                    bounds=(self.lo, self.hi), xtol=1e-14, ftol=1e-14,
                    gtol=1e-12, max_nfev=400)
            except ValueError:
                continue
            score = np.abs(self.feasibility_residuals(res.x)).max()
            if best_feas is None or score < best_feas[0]:
                best_feas = (score, res.x)
            if score <= feas_tol:
                break
        if best_feas is None or best_feas[0] > 1e-6:
            return None
        seed = best_feas[1]

        cons = [dict(type="eq", fun=self.equality_residuals)]
        if self.ratio_constraints(seed).size:
            cons.append(dict(type="ineq", fun=self.ratio_constraints))
        best = None
        for y0 in [seed] + self.start_points(rng, max(2, starts // 3)):
            try:
                res = optimize.minimize(
                    self.objective, y0, method="SLSQP", constraints=cons,
                    bounds=list(zip(self.lo, self.hi)),
                    options=dict(maxiter=300, ftol=1e-12))
            except (ValueError, ZeroDivisionError):
                continue
            if not res.success:
                continue
            feas = np.abs(self.feasibility_residuals(res.x)).max()
            if feas > 1e-6:
                continue
            if best is None or res.fun < best[0]:
                best = (res.fun, res.x)
        if best is None:
            # objective evaluated at the feasible point is still an upper bound
            return (self.objective(seed), seed)
        return best


def brute_force_global(data: MinlpData, starts=10, seed=0) -> OracleResult:
    """Global optimum by mode enumeration at toy scale (hard size caps)."""
    net = data.network
    if len(net.pipes) > SIZE_LIMITS["pipes"] or \
            len(net.active_elements) > SIZE_LIMITS["active"] or \
            net.horizon > SIZE_LIMITS["periods"]:
        raise ValueError("instance exceeds oracle size limits")
    rng = np.random.default_rng(seed)
    keys, seqs = [], []
    for i, comp in enumerate(net.compressors):
        keys.append(("C", i))
        seqs.append(element_mode_sequences(comp, net.horizon))
    for i, valve in enumerate(net.valves):
        keys.append(("V", i))
        seqs.append(element_mode_sequences(valve, net.horizon))
    best = None
    tried = feas = 0
    for combo in itertools.product(*seqs) if seqs else [()]:
        modes = dict(zip(keys, combo))
        tried += 1
        problem = _ContinuousProblem(data, modes)
        out = problem.solve(rng, starts=starts)
        if out is None:
            continue
        feas += 1
        val, point = out
        if best is None or val < best[0]:
            best = (val, point, modes, problem)
    if best is None:
        return OracleResult(objective=math.inf, assignments_tried=tried,
                            feasible_assignments=0, starts=starts)
    val, point, modes, problem = best
    values = {name: point[i] for name, i in problem.idx.items()}
    values["modes"] = modes
    return OracleResult(objective=val, values=values, assignments_tried=tried,
                        feasible_assignments=feas, starts=starts)


# ---------------------------------------------------------------------------
# surface sampling and support functions
# ---------------------------------------------------------------------------


def sample_weymouth_surface(box: PipeBox, w, n_per_side):
    """Exact points of the pipe's feasible surface, both extremes of
    the inlet potential at every sampled flow."""
    if n_per_side < 2:
        raise ValueError("need at least two samples per side")
    if box.alpha_hi < box.alpha_lo:
        raise ValueError("empty box")
    pts = []
    for side in (+1, -1):
        if side > 0:
            f_grid = np.linspace(max(box.alpha_lo, 0.0), box.alpha_hi, n_per_side)
        else:
            f_grid = np.linspace(box.alpha_lo, min(box.alpha_hi, 0.0), n_per_side)
        if f_grid[0] == f_grid[-1] and side < 0 and box.alpha_lo >= 0.0:
            continue
        if f_grid[0] == f_grid[-1] and side > 0 and box.alpha_hi <= 0.0:
            continue
        for f in f_grid:
            drop = w * abs(f) * f
            pi_lo = max(box.pi_i_lo, box.pi_j_lo + drop)
            pi_hi = min(box.pi_i_hi, box.pi_j_hi + drop)
            if pi_lo > pi_hi + 1e-12:
                continue
            for pi in (pi_lo, pi_hi):
                pts.append((float(f), float(pi), float(pi - drop)))
    uniq = sorted(set(pts))
    return [p for p in uniq]


def weymouth_support(box: PipeBox, w, c):
    """max c . (f, pi_i, pi_j) over the nonconvex pipe surface.

    The surface is parameterized by the flow; for fixed flow the
    objective is linear in the free potential, so only interval
    endpoints matter and each piece is a quadratic in the flow. All
    breakpoints, quadratic vertices and endpoints are enumerated; a
    modest grid backs up the piecewise analysis.
    """
    c1, c2, c3 = c
    best = -math.inf

    def eval_pos(f):
        nonlocal best
        drop = w * f * f
        pj_lo = max(box.pi_j_lo, box.pi_i_lo - drop)
        pj_hi = min(box.pi_j_hi, box.pi_i_hi - drop)
        if pj_lo > pj_hi + 1e-12:
            return
        for pj in (pj_lo, pj_hi):
            best = max(best, c1 * f + c2 * (pj + drop) + c3 * pj)

    def eval_neg(f):
        nonlocal best
        drop = w * f * f  # pi_j - pi_i
        pi_lo = max(box.pi_i_lo, box.pi_j_lo - drop)
        pi_hi = min(box.pi_i_hi, box.pi_j_hi - drop)
        if pi_lo > pi_hi + 1e-12:
            return
        for pi in (pi_lo, pi_hi):
            best = max(best, c1 * f + c2 * pi + c3 * (pi + drop))

    for side in (+1, -1):
        if side > 0:
            f_lo, f_hi = max(box.alpha_lo, 0.0), box.alpha_hi
        else:
            f_lo, f_hi = box.alpha_lo, min(box.alpha_hi, 0.0)
        if f_hi < f_lo:
            continue
        cands = set(np.linspace(f_lo, f_hi, 65))
        for delta in (box.pi_i_lo - box.pi_j_lo, box.pi_i_hi - box.pi_j_hi,
                      box.pi_j_lo - box.pi_i_lo, box.pi_j_hi - box.pi_i_hi):
            if delta >= 0.0:
                r = math.sqrt(delta / w)
                for s in (r, -r):
                    if f_lo <= s <= f_hi:
                        cands.add(s)
        for denom in (c2, c3, c2 + c3):
            if abs(denom) > 1e-14:
                for s in (c1 / (2.0 * w * denom), -c1 / (2.0 * w * denom)):
                    if f_lo <= s <= f_hi:
                        cands.add(s)
        for f in cands:
            if side > 0:
                eval_pos(float(f))
            else:
                eval_neg(float(f))
    return best


# ---------------------------------------------------------------------------
# LP extremality
# ---------------------------------------------------------------------------


def lp_vertex_check(points, tol=1e-7):
    """Label each point extreme/non-extreme via LP separation.

    A point is extreme iff it is not a convex combination of the other
    points (solved as an LP feasibility problem).
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    verdicts = []
    for i in range(n):
        others = np.delete(pts, i, axis=0)
        if len(others) == 0:
            verdicts.append(True)
            continue
        A_eq = np.vstack([others.T, np.ones(len(others))])
        b_eq = np.concatenate([pts[i], [1.0]])
        res = optimize.linprog(np.zeros(len(others)), A_eq=A_eq, b_eq=b_eq,
                               bounds=[(0.0, 1.0)] * len(others),
                               method="highs")
        if not res.success:
            verdicts.append(True)
            continue
        recon = others.T @ res.x
        verdicts.append(bool(np.abs(recon - pts[i]).max() > tol))
    return verdicts
