"""Compression-set machinery: disjunct records, cone chains, Y block.

A compressor's feasible set splits into 11 pieces: off (k=0), a
zero-flow ratio polytope per direction (k=+1/-1) and four
max-flow pieces per direction (k=+-2..+-5) whose loss curves are
power functions of one potential. Each curve piece gets a
second-order-cone band: a chain overestimating x^(1/8) from above
(hypograph) or x^(-1/9) from below (epigraph), plus the exact-exponent
secant on the other side. The homogenized pieces are glued by a
lambda-simplex into the full mixed-integer outer-approximation block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

KAPPA_HAT = 0.114
HYPO_EXP = 1.0 / 8.0   # overestimates r**KAPPA_HAT for r >= 1
EPI_EXP = -1.0 / 9.0   # underestimates r**-KAPPA_HAT for r <= 1 arguments


def compressor_loss(pi_i, pi_j, f, kappa_hat=KAPPA_HAT, h=1.0):
    """Fuel draw of a compressor at an operating point; sign follows f."""
    if pi_i <= 0.0 or pi_j <= 0.0:
        raise ValueError("potentials must be positive")
    if f >= 0.0:
        return h * ((pi_j / pi_i) ** kappa_hat - 1.0) * f
    return h * ((pi_i / pi_j) ** kappa_hat - 1.0) * f


@dataclass
class DisjunctRecord:
    index: int              # -5..5
    kind: str               # off | ratio | V | W
    a: float = 0.0
    b: float = 0.0
    x_lo: float = 0.0
    x_hi: float = 0.0
    # which original coordinate the record's x variable is ("pi_i"/"pi_j")
    free_axis: str = ""
    # pinned potential on the other axis (value multiplying lambda)
    pinned_value: float = 0.0
    flow_value: float = 0.0  # f pinned to flow_value * lambda
    loss_sign: float = 1.0   # y = loss_sign * l
    empty: bool = False

    def as_dict(self):
        return {
            "index": self.index, "kind": self.kind, "a": self.a, "b": self.b,
            "x_lo": self.x_lo, "x_hi": self.x_hi, "free_axis": self.free_axis,
            "pinned_value": self.pinned_value, "flow_value": self.flow_value,
            "loss_sign": self.loss_sign, "empty": self.empty,
        }


def disjunct_params(comp, pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi):
    """The 11 disjunct records of one compressor, empties flagged."""
    r_lo, r_hi = comp.a_min ** 2, comp.a_max ** 2
    if not (r_lo > 1.0):
        raise ValueError("compressor requires squared ratio lower bound > 1")
    h, f_hi, f_lo = comp.h, comp.f_max, comp.f_min
    recs = [DisjunctRecord(index=0, kind="off")]

    def vrec(k, a, b, lo, hi, free_axis, pinned, flow, sign):
        rec = DisjunctRecord(index=k, kind="V", a=a, b=b, x_lo=lo, x_hi=hi,
                             free_axis=free_axis, pinned_value=pinned,
                             flow_value=flow, loss_sign=sign)
        rec.empty = lo > hi * (1.0 + 1e-12)
        return rec

    def wrec(k, a, b, lo, hi, free_axis, pinned, flow, sign):
        rec = DisjunctRecord(index=k, kind="W", a=a, b=b, x_lo=lo, x_hi=hi,
                             free_axis=free_axis, pinned_value=pinned,
                             flow_value=flow, loss_sign=sign)
        rec.empty = lo > hi * (1.0 + 1e-12)
        if not rec.empty and rec.x_lo <= 0.0:
            raise AssertionError("W record with x_lo <= 0 cannot occur")
        return rec

    recs.append(DisjunctRecord(index=1, kind="ratio"))
    recs.append(vrec(+2, h * f_hi, pi_i_lo,
                     max(pi_j_lo, pi_i_lo * r_lo), min(pi_j_hi, pi_i_lo * r_hi),
                     "pi_j", pi_i_lo, f_hi, +1.0))
    recs.append(vrec(+3, h * f_hi, pi_i_hi,
                     max(pi_j_lo, pi_i_hi * r_lo), min(pi_j_hi, pi_i_hi * r_hi),
                     "pi_j", pi_i_hi, f_hi, +1.0))
    recs.append(wrec(+4, h * f_hi, pi_j_lo,
                     max(pi_i_lo, pi_j_lo / r_hi), min(pi_i_hi, pi_j_lo / r_lo),
                     "pi_i", pi_j_lo, f_hi, +1.0))
    recs.append(wrec(+5, h * f_hi, pi_j_hi,
                     max(pi_i_lo, pi_j_hi / r_hi), min(pi_i_hi, pi_j_hi / r_lo),
                     "pi_i", pi_j_hi, f_hi, +1.0))
    recs.append(DisjunctRecord(index=-1, kind="ratio"))
    recs.append(vrec(-2, -h * f_lo, pi_j_lo,
                     max(pi_i_lo, pi_j_lo * r_lo), min(pi_i_hi, pi_j_lo * r_hi),
                     "pi_i", pi_j_lo, f_lo, -1.0))
    recs.append(vrec(-3, -h * f_lo, pi_j_hi,
                     max(pi_i_lo, pi_j_hi * r_lo), min(pi_i_hi, pi_j_hi * r_hi),
                     "pi_i", pi_j_hi, f_lo, -1.0))
    recs.append(wrec(-4, -h * f_lo, pi_i_lo,
                     max(pi_j_lo, pi_i_lo / r_hi), min(pi_j_hi, pi_i_lo / r_lo),
                     "pi_j", pi_i_lo, f_lo, -1.0))
    recs.append(wrec(-5, -h * f_lo, pi_i_hi,
                     max(pi_j_lo, pi_i_hi / r_hi), min(pi_j_hi, pi_i_hi / r_lo),
                     "pi_j", pi_i_hi, f_lo, -1.0))
    return recs


# ---------------------------------------------------------------------------
# cone chains
# ---------------------------------------------------------------------------


def soc_chain_hypograph_eighth(prog, x_expr, u, lam_expr, b=1.0, x_hi=1.0,
                               key=""):
    """Homogenized chain forcing u <= lambda * (x/(b*lambda))^(1/8).

    Rows: u^2 <= lam*v1, v1^2 <= lam*v2, b*v2^2 <= lam*x. With lam = 1
    this is exactly u <= (x/b)^(1/8). `x_hi` bounds x so the auxiliary
    variables can carry finite bounds.
    """
    X = prog.x
    ratio = max(x_hi / b, 1.0)
    v1 = prog.add_var(f"{key}:v1", 0.0, 2.0 * ratio ** 0.25)
    v2 = prog.add_var(f"{key}:v2", 0.0, 2.0 * ratio ** 0.5)
    lam = lam_expr if not isinstance(lam_expr, int) else X(lam_expr)
    xe = x_expr if not isinstance(x_expr, int) else X(x_expr)
    ids = [
        prog.add_rotated_soc(0.5 * lam, X(v1), [X(u)], f"{key}:c1"),
        prog.add_rotated_soc(0.5 * lam, X(v2), [X(v1)], f"{key}:c2"),
        prog.add_rotated_soc(0.5 * lam, xe, [math.sqrt(b) * X(v2)], f"{key}:c3"),
    ]
    return ids, (v1, v2)


def soc_chain_epigraph_ninth(prog, x_expr, u, lam_expr, b=1.0, x_hi=1.0,
                             key=""):
    """Homogenized chain forcing u >= lambda * (b*lambda/x)^(1/9).

    Rows: u*v1 >= lam^2, lam*v2 >= v1^2, lam*v3 >= v2^2, u*x >= b*v3^2.
    With lam = 1 and b = 1 this is exactly u >= x^(-1/9). The minimal-u
    witness needs v1 up to (x/b)^(1/9), v2 its square, v3 its fourth
    power, so bounds scale with `x_hi`.
    """
    X = prog.x
    ratio = max(x_hi / b, 1.0)
    v1 = prog.add_var(f"{key}:v1", 0.0, 2.0 * ratio ** (1.0 / 9.0))
    v2 = prog.add_var(f"{key}:v2", 0.0, 2.0 * ratio ** (2.0 / 9.0))
    v3 = prog.add_var(f"{key}:v3", 0.0, 2.0 * ratio ** (4.0 / 9.0))
    lam = lam_expr if not isinstance(lam_expr, int) else X(lam_expr)
    xe = x_expr if not isinstance(x_expr, int) else X(x_expr)
    ids = [
        prog.add_rotated_soc(0.5 * X(u), X(v1), [lam], f"{key}:c1"),
        prog.add_rotated_soc(0.5 * lam, X(v2), [X(v1)], f"{key}:c2"),
        prog.add_rotated_soc(0.5 * lam, X(v3), [X(v2)], f"{key}:c3"),
        prog.add_rotated_soc(0.5 * X(u), xe, [math.sqrt(b) * X(v3)], f"{key}:c4"),
    ]
    return ids, (v1, v2, v3)


def _secant_coeffs(record, n):
    """Slope/intercept of the exact-exponent chord over [x_lo, x_hi]."""
    a, b, lo, hi = record.a, record.b, record.x_lo, record.x_hi
    if record.kind == "V":
        val_lo = (lo / b) ** n - 1.0
        val_hi = (hi / b) ** n - 1.0
    else:
        val_lo = (b / lo) ** n - 1.0
        val_hi = (b / hi) ** n - 1.0
    if hi - lo <= 1e-12 * max(1.0, hi):
        return None, a * val_lo  # degenerate: y pinned to the curve value
    slope = a * (val_hi - val_lo) / (hi - lo)
    return slope, a * val_lo


def emit_vcheck_block(prog, record: DisjunctRecord, x_expr, y_expr, lam_expr,
                      kappa_hat=KAPPA_HAT, key=""):
    """Homogenized hypograph band for one V-type disjunct."""
    if record.kind != "V" or record.empty:
        raise ValueError("non-empty V record required")
    X = prog.x
    xe = x_expr if not isinstance(x_expr, int) else X(x_expr)
    ye = y_expr if not isinstance(y_expr, int) else X(y_expr)
    lam = lam_expr if not isinstance(lam_expr, int) else X(lam_expr)
    ratio = record.x_hi / record.b
    u = prog.add_var(f"{key}:u", 0.0, 2.0 * max(1.0, ratio ** HYPO_EXP))
    ids, aux = soc_chain_hypograph_eighth(prog, xe, u, lam, record.b,
                                          record.x_hi, key)
    ids.append(prog.add_linear(ye - record.a * X(u) + record.a * lam, "==", 0.0,
                               f"{key}:loss"))
    ids.append(prog.add_linear(xe - record.x_lo * lam, ">=", 0.0, f"{key}:x_lb"))
    ids.append(prog.add_linear(xe - record.x_hi * lam, "<=", 0.0, f"{key}:x_ub"))
    slope, icpt = _secant_coeffs(record, kappa_hat)
    if slope is None:
        ids.append(prog.add_linear(ye - icpt * lam, "==", 0.0, f"{key}:secant"))
    else:
        expr = ye - slope * (xe - record.x_lo * lam) - icpt * lam
        ids.append(prog.add_linear(expr, ">=", 0.0, f"{key}:secant"))
    return ids, u


def emit_wcheck_block(prog, record: DisjunctRecord, x_expr, y_expr, lam_expr,
                      kappa_hat=KAPPA_HAT, key=""):
    """Homogenized epigraph band for one W-type disjunct."""
    if record.kind != "W" or record.empty:
        raise ValueError("non-empty W record required")
    X = prog.x
    xe = x_expr if not isinstance(x_expr, int) else X(x_expr)
    ye = y_expr if not isinstance(y_expr, int) else X(y_expr)
    lam = lam_expr if not isinstance(lam_expr, int) else X(lam_expr)
    u_hi = (record.b / record.x_lo) ** kappa_hat
    u = prog.add_var(f"{key}:u", 0.0, 1.1 * max(1.0, u_hi))
    ids, aux = soc_chain_epigraph_ninth(prog, xe, u, lam, record.b,
                                        record.x_hi, key)
    ids.append(prog.add_linear(ye - record.a * X(u) + record.a * lam, "==", 0.0,
                               f"{key}:loss"))
    ids.append(prog.add_linear(ye, ">=", 0.0, f"{key}:y_nonneg"))
    ids.append(prog.add_linear(xe - record.x_lo * lam, ">=", 0.0, f"{key}:x_lb"))
    ids.append(prog.add_linear(xe - record.x_hi * lam, "<=", 0.0, f"{key}:x_ub"))
    slope, icpt = _secant_coeffs(record, kappa_hat)
    if slope is None:
        ids.append(prog.add_linear(ye - icpt * lam, "==", 0.0, f"{key}:secant"))
    else:
        expr = ye - slope * (xe - record.x_lo * lam) - icpt * lam
        ids.append(prog.add_linear(expr, "<=", 0.0, f"{key}:secant"))
    return ids, u


# ---------------------------------------------------------------------------
# full blocks
# ---------------------------------------------------------------------------


@dataclass
class CompressorBlock:
    lambdas: dict = field(default_factory=dict)   # k -> var index
    x_plus: int = -1
    x_minus: int = -1
    records: list = field(default_factory=list)
    pi_i_parts: dict = field(default_factory=dict)  # k -> LinExpr
    pi_j_parts: dict = field(default_factory=dict)
    loss_parts: dict = field(default_factory=dict)
    row_ids: list = field(default_factory=list)


def emit_compressor_outer_block(prog, comp, pi_i, pi_j, f, l, x, x_plus, x_minus,
                                bounds, key="") -> CompressorBlock:
    """The 11-disjunct mixed-integer outer-approximation of one compressor.

    `bounds` is (pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi); the period's
    variables pi_i, pi_j, f, l, x, x_plus, x_minus must be declared.
    """
    pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi = bounds
    r_lo, r_hi = comp.a_min ** 2, comp.a_max ** 2
    records = disjunct_params(comp, pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi)
    X = prog.x
    blk = CompressorBlock(records=records, x_plus=x_plus, x_minus=x_minus)

    pos_nonempty = any(not r.empty for r in records if r.index >= 1)
    neg_nonempty = any(not r.empty for r in records if r.index <= -1)
    if not pos_nonempty or not neg_nonempty:
        import warnings
        warnings.warn(f"compressor {key}: one flow direction has no "
                      f"non-empty disjunct; direction binary still emitted")

    for rec in records:
        lam = prog.add_var(f"{key}:lam{rec.index:+d}",
                           0.0, 0.0 if rec.empty else 1.0)
        blk.lambdas[rec.index] = lam
        if rec.empty:
            blk.pi_i_parts[rec.index] = 0.0 * X(lam)
            blk.pi_j_parts[rec.index] = 0.0 * X(lam)
            blk.loss_parts[rec.index] = 0.0 * X(lam)
            continue
        if rec.kind == "off" or rec.kind == "ratio":
            pik = prog.add_var(f"{key}:pi_i{rec.index:+d}", 0.0, pi_i_hi)
            pjk = prog.add_var(f"{key}:pi_j{rec.index:+d}", 0.0, pi_j_hi)
            rows = [
                prog.add_linear(X(pik) - pi_i_lo * X(lam), ">=", 0.0),
                prog.add_linear(X(pik) - pi_i_hi * X(lam), "<=", 0.0),
                prog.add_linear(X(pjk) - pi_j_lo * X(lam), ">=", 0.0),
                prog.add_linear(X(pjk) - pi_j_hi * X(lam), "<=", 0.0),
            ]
            if rec.kind == "ratio":
                if rec.index == 1:
                    rows.append(prog.add_linear(X(pjk) - r_lo * X(pik), ">=", 0.0))
                    rows.append(prog.add_linear(X(pjk) - r_hi * X(pik), "<=", 0.0))
                else:
                    rows.append(prog.add_linear(X(pik) - r_lo * X(pjk), ">=", 0.0))
                    rows.append(prog.add_linear(X(pik) - r_hi * X(pjk), "<=", 0.0))
            blk.row_ids += rows
            blk.pi_i_parts[rec.index] = X(pik)
            blk.pi_j_parts[rec.index] = X(pjk)
            blk.loss_parts[rec.index] = 0.0 * X(lam)
            continue
        # V/W records: one potential pinned, the other is the band variable
        free_hi = pi_i_hi if rec.free_axis == "pi_i" else pi_j_hi
        xv = prog.add_var(f"{key}:x{rec.index:+d}", 0.0, free_hi)
        y_hi = rec.a * max((rec.x_hi / rec.b) ** HYPO_EXP - 1.0, 1.0) if rec.kind == "V" \
            else rec.a * max((rec.b / rec.x_lo) ** KAPPA_HAT - 1.0, 1.0)
        yv = prog.add_var(f"{key}:y{rec.index:+d}", 0.0, 1.1 * y_hi)
        emit = emit_vcheck_block if rec.kind == "V" else emit_wcheck_block
        ids, _ = emit(prog, rec, X(xv), X(yv), X(lam),
                      key=f"{key}:d{rec.index:+d}")
        blk.row_ids += ids
        pinned = rec.pinned_value * X(lam)
        if rec.free_axis == "pi_i":
            blk.pi_i_parts[rec.index] = X(xv)
            blk.pi_j_parts[rec.index] = pinned
        else:
            blk.pi_i_parts[rec.index] = pinned
            blk.pi_j_parts[rec.index] = X(xv)
        blk.loss_parts[rec.index] = rec.loss_sign * X(yv)

    lam_sum = sum((X(v) for v in blk.lambdas.values()), 0.0 * X(x))
    blk.row_ids.append(prog.add_linear(lam_sum, "==", 1.0, f"{key}:simplex"))
    pos_sum = sum((X(blk.lambdas[k]) for k in range(1, 6)), 0.0 * X(x))
    neg_sum = sum((X(blk.lambdas[k]) for k in range(-5, 0)), 0.0 * X(x))
    blk.row_ids.append(prog.add_linear(X(x_plus) - pos_sum, "==", 0.0, f"{key}:x+"))
    blk.row_ids.append(prog.add_linear(X(x_minus) - neg_sum, "==", 0.0, f"{key}:x-"))
    blk.row_ids.append(prog.add_linear(X(x) - X(x_plus) - X(x_minus), "==", 0.0,
                                       f"{key}:x"))
    pi_i_sum = sum(blk.pi_i_parts.values(), 0.0 * X(x))
    pi_j_sum = sum(blk.pi_j_parts.values(), 0.0 * X(x))
    loss_sum = sum(blk.loss_parts.values(), 0.0 * X(x))
    blk.row_ids.append(prog.add_linear(X(pi_i) - pi_i_sum, "==", 0.0, f"{key}:pi_i"))
    blk.row_ids.append(prog.add_linear(X(pi_j) - pi_j_sum, "==", 0.0, f"{key}:pi_j"))
    blk.row_ids.append(prog.add_linear(X(l) - loss_sum, "==", 0.0, f"{key}:l"))
    flow_expr = 0.0 * X(x)
    for rec in records:
        if rec.kind in ("V", "W") and not rec.empty:
            flow_expr = flow_expr + rec.flow_value * X(blk.lambdas[rec.index])
    blk.row_ids.append(prog.add_linear(X(f) - flow_expr, "==", 0.0, f"{key}:f"))
    blk.row_ids.append(prog.add_linear(X(f) - comp.f_max * X(x_plus), "<=", 0.0,
                                       f"{key}:f_ub"))
    blk.row_ids.append(prog.add_linear(X(f) - comp.f_min * X(x_minus), ">=", 0.0,
                                       f"{key}:f_lb"))
    return blk


def emit_valve_block(prog, valve, pi_i, pi_j, f, x, x_plus, x_minus, bounds,
                     key=""):
    """Big-M disjunction rows for a (control) valve.

    Each ratio row carries a relative 1e-7 slack: a regular valve's
    open state would otherwise pin pi_i = pi_j through two opposing
    inequalities, leaving node problems with fixed binaries no strict
    interior for the barrier method. Refinement re-imposes the exact
    equality, so primal bounds are unaffected.
    """
    pi_i_lo, pi_i_hi, pi_j_lo, pi_j_hi = bounds
    r_lo, r_hi = valve.a_min ** 2, valve.a_max ** 2
    eps = 1e-7 * max(1.0, pi_i_hi, pi_j_hi)
    X = prog.x
    ids = [
        prog.add_linear(X(pi_j) - r_lo * X(pi_i)
                        - (pi_j_lo - r_lo * pi_i_hi) * (1.0 - X(x_plus)),
                        ">=", -eps, f"{key}:r_lo+"),
        prog.add_linear(X(pi_j) - r_hi * X(pi_i)
                        - (pi_j_hi - r_hi * pi_i_lo) * (1.0 - X(x_plus)),
                        "<=", eps, f"{key}:r_hi+"),
        prog.add_linear(X(pi_i) - r_lo * X(pi_j)
                        - (pi_i_lo - r_lo * pi_j_hi) * (1.0 - X(x_minus)),
                        ">=", -eps, f"{key}:r_lo-"),
        prog.add_linear(X(pi_i) - r_hi * X(pi_j)
                        - (pi_i_hi - r_hi * pi_j_lo) * (1.0 - X(x_minus)),
                        "<=", eps, f"{key}:r_hi-"),
        prog.add_linear(X(f) - valve.f_max * X(x_plus), "<=", 0.0, f"{key}:f_ub"),
        prog.add_linear(X(f) - valve.f_min * X(x_minus), ">=", 0.0, f"{key}:f_lb"),
        prog.add_linear(X(x) - X(x_plus) - X(x_minus), "==", 0.0, f"{key}:x"),
    ]
    return ids


def powr_hull_membership(point, record: DisjunctRecord, n=KAPPA_HAT, tol=1e-9):
    """Classify (x, y) against the exact power-cone hull of one record.

    Pure scalar arithmetic: the curve bound uses exponentiation, never
    the cone chains. Returns "inside", "outside" or "boundary".
    """
    if record.empty:
        return "outside"
    x, y = point
    scale = max(1.0, abs(record.a))
    margins = [x - record.x_lo, record.x_hi - x]
    if record.kind == "V":
        curve = record.a * ((x / record.b) ** n - 1.0) if x > 0 else -math.inf
        margins.append(curve - y)
    else:
        curve = record.a * ((record.b / x) ** n - 1.0) if x > 0 else math.inf
        margins.append(y - curve)
    slope, icpt = _secant_coeffs(record, n)
    if slope is None:
        margins.append(-abs(y - icpt))
    else:
        secant = slope * (x - record.x_lo) + icpt
        margins.append((y - secant) if record.kind == "V" else (secant - y))
    worst = min(margins)
    if worst < -tol * scale:
        return "outside"
    if worst <= tol * scale:
        return "boundary"
    return "inside"
