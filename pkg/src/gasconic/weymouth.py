"""Pipe-set geometry: vertex enumeration, hull facets, relaxation blocks.

The reverse-convex polytope behind one flow direction of a pipe is the
convex hull of the candidate vertices produced by the edge-scan below
("enumerate_reverse_polytope_vertices"). Its facets plus one homogenized
quadratic cone per direction give the exact convex hull of the pipe's
feasible set (block R1); the known cheaper outer-approximations are the
McCormick+cone block (R2) and the four-hyperplane polytope (R3).

Coordinates: enumeration and facet computation run in (x, y, z) =
(pi_i, pi_j, f); stored pipe facets are (a, b, c, d) meaning
a*f + b*pi_i + c*pi_j <= d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .network import PipeBox

DEDUP_TOL = 1e-9
FACET_TOL = 1e-9


def weymouth_residual(f, pi_i, pi_j, w):
    """pi_i - pi_j - w |f| f; zero exactly on the pressure-loss surface."""
    return pi_i - pi_j - w * abs(f) * f


def _polygon_vertices(x_lo, x_hi, y_lo, y_hi, beta):
    """Vertices of {(x,y) in box : 0 <= x - y <= beta}."""
    lines = [
        (1.0, 0.0, x_lo), (1.0, 0.0, x_hi),
        (0.0, 1.0, y_lo), (0.0, 1.0, y_hi),
        (1.0, -1.0, 0.0), (1.0, -1.0, beta),
    ]
    scale = max(abs(v) for v in (x_lo, x_hi, y_lo, y_hi, beta, 1.0))
    tol = 1e-9 * scale
    pts = []
    for i in range(len(lines)):
        a1, b1, c1 = lines[i]
        for j in range(i + 1, len(lines)):
            a2, b2, c2 = lines[j]
            det = a1 * b2 - a2 * b1
            if abs(det) < 1e-12:
                continue
            x = (c1 * b2 - c2 * b1) / det
            y = (a1 * c2 - a2 * c1) / det
            if x_lo - tol <= x <= x_hi + tol and y_lo - tol <= y <= y_hi + tol \
                    and -tol <= x - y <= beta + tol:
                pts.append((min(max(x, x_lo), x_hi), min(max(y, y_lo), y_hi)))
    return _dedup([(x, y) for x, y in pts])


def _dedup(points):
    if not points:
        return []
    arr = np.asarray(points, dtype=float)
    scale = max(np.abs(arr).max(), 1.0)
    out = []
    for p in arr:
        if all(np.abs(p - q).max() > DEDUP_TOL * scale for q in out):
            out.append(p)
    return [tuple(p) for p in out]


def enumerate_reverse_polytope_vertices(x_lo, x_hi, y_lo, y_hi, alpha, beta, w):
    """Candidate vertices of the positive-direction polytope.

    Scans the edges of the box-with-diagonal-cuts polytope against the
    reverse-convex constraint x - y <= w z^2 and keeps the extreme points
    of every intersection. The vertical-edge test keeps a vertex when the
    remaining segment [z', alpha] is nonempty, i.e. z' <= alpha.
    """
    if not (0.0 < x_lo <= x_hi and 0.0 < y_lo <= y_hi):
        raise ValueError("potential bounds must be positive and ordered")
    if alpha < 0.0 or beta < 0.0 or w <= 0.0:
        raise ValueError("alpha, beta must be nonnegative and w positive")
    poly = _polygon_vertices(x_lo, x_hi, y_lo, y_hi, beta)
    if not poly:
        raise ValueError("empty flow polygon: bounds incompatible")
    pts = []
    for xt, yt in poly:
        zp = math.sqrt(max(xt - yt, 0.0) / w)
        if zp <= alpha * (1.0 + 1e-12) + 1e-15:
            pts.append((xt, yt, min(zp, alpha)))
            pts.append((xt, yt, alpha))
    for zt in (0.0, alpha):
        cap = w * zt * zt
        for xt in (x_lo, x_hi):
            y1 = max(y_lo, xt - beta, xt - cap)
            y2 = min(y_hi, xt)
            if y1 <= y2 + 1e-15:
                pts.append((xt, y1, zt))
                pts.append((xt, y2, zt))
        for yt in (y_lo, y_hi):
            x1 = max(x_lo, yt)
            x2 = min(x_hi, yt + beta, yt + cap)
            if x1 <= x2 + 1e-15:
                pts.append((x1, yt, zt))
                pts.append((x2, yt, zt))
        for d in (0.0, beta):
            if d > cap * (1.0 + 1e-12) + 1e-15:
                continue
            for xt in (x_lo, x_hi):
                yp = xt - d
                if y_lo - 1e-15 <= yp <= y_hi + 1e-15:
                    pts.append((xt, min(max(yp, y_lo), y_hi), zt))
            for yt in (y_lo, y_hi):
                xp = yt + d
                if x_lo - 1e-15 <= xp <= x_hi + 1e-15:
                    pts.append((min(max(xp, x_lo), x_hi), yt, zt))
    return np.asarray(_dedup(pts))


def negative_side_vertices(x_lo, x_hi, y_lo, y_hi, alpha_lo, beta_lo, w):
    """Vertices for the negative-direction polytope via the sign swap.

    Runs the positive enumeration on swapped potential bounds and maps
    each output (y, x, z) to (x, y, -z).
    """
    q_pos = enumerate_reverse_polytope_vertices(
        y_lo, y_hi, x_lo, x_hi, -alpha_lo, -beta_lo, w)
    return np.column_stack([q_pos[:, 1], q_pos[:, 0], -q_pos[:, 2]])


@dataclass
class HullFacets:
    """Outward facets a.p <= d plus equality rows for degenerate hulls."""

    inequalities: list = field(default_factory=list)  # (normal[3], offset)
    equalities: list = field(default_factory=list)


def facets_of_hull(points) -> HullFacets:
    """Facet description of conv(points) in 3D, degeneracy-aware.

    Lower-dimensional hulls emit the fixing plane equalities plus the
    facet inequalities of the hull inside that subspace.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("need a nonempty list of 3D points")
    pts = np.asarray(_dedup([tuple(p) for p in pts]))
    center = pts.mean(axis=0)
    shifted = pts - center
    scale = max(np.abs(pts).max(), 1.0)
    u, sv, vt = np.linalg.svd(shifted, full_matrices=True)
    rank = int((sv > 1e-9 * scale).sum()) if len(sv) else 0
    out = HullFacets()

    if rank == 0:
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = 1.0
            out.equalities.append((e, float(center[axis])))
        return out
    if rank == 1:
        direction = vt[0]
        for normal in vt[1:]:
            out.equalities.append((normal.copy(), float(normal @ center)))
        proj = shifted @ direction
        out.inequalities.append((direction.copy(), float(direction @ center + proj.max())))
        out.inequalities.append((-direction, float(-(direction @ center + proj.min()))))
        return out
    if rank == 2:
        normal = vt[2]
        out.equalities.append((normal.copy(), float(normal @ center)))
        basis = vt[:2]
        flat = shifted @ basis.T
        hull2 = ConvexHull(flat)
        for eq in hull2.equations:
            n2, off = eq[:2], eq[2]
            n3 = n2 @ basis
            out.inequalities.append((n3, float(-off + n3 @ center)))
        return _merged(out, pts)

    hull = ConvexHull(pts)
    for eq in hull.equations:
        out.inequalities.append((eq[:3].copy(), float(-eq[3])))
    return _merged(out, pts)


def _merged(facets: HullFacets, pts) -> HullFacets:
    """Merge coplanar duplicate facets and check support counts."""
    merged = []
    for normal, offset in facets.inequalities:
        nrm = np.linalg.norm(normal)
        n, d = normal / nrm, offset / nrm
        if not any(np.abs(n - n2).max() < 1e-7 and abs(d - d2) < 1e-7 * max(1, abs(d2))
                   for n2, d2 in merged):
            merged.append((n, d))
    scale = max(np.abs(pts).max(), 1.0)
    for n, d in merged:
        slack = pts @ n - d
        if slack.max() > 1e-7 * scale:
            raise AssertionError("hull facet cuts an input point")
    facets.inequalities = merged
    return facets


@dataclass
class PipeHull:
    """Per-pipe hull data: facets for each flow direction plus the box."""

    box: PipeBox
    w: float
    facets_pos: list = field(default_factory=list)   # (a, b, c, d): a f + b pi + c pj <= d
    facets_neg: list = field(default_factory=list)
    eq_pos: list = field(default_factory=list)
    eq_neg: list = field(default_factory=list)
    vertices_pos: np.ndarray | None = None
    vertices_neg: np.ndarray | None = None

    @property
    def one_sided(self):
        return self.box.one_sided


def _to_pipe_coords(normal, offset):
    # enumeration space (x, y, z) = (pi_i, pi_j, f) -> storage (f, pi_i, pi_j)
    return (float(normal[2]), float(normal[0]), float(normal[1]), float(offset))


def build_pipe_hull(box: PipeBox, w: float) -> PipeHull:
    """Enumerate vertices and compute facets for both flow directions.

    Flow intervals are clamped at zero per direction; a strictly
    positive lower flow bound stays in the box rows, which keeps the
    block a valid (slightly larger) relaxation.
    """
    hull = PipeHull(box=box, w=w)
    a_hi = max(box.alpha_hi, 0.0)
    b_hi = max(box.beta_hi, 0.0)
    a_lo = min(box.alpha_lo, 0.0)
    b_lo = min(box.beta_lo, 0.0)
    if box.one_sided != "negative":
        pos = enumerate_reverse_polytope_vertices(
            box.pi_i_lo, box.pi_i_hi, box.pi_j_lo, box.pi_j_hi, a_hi, b_hi, w)
        hull.vertices_pos = pos
        fc = facets_of_hull(pos)
        hull.facets_pos = [_to_pipe_coords(n, d) for n, d in fc.inequalities]
        hull.eq_pos = [_to_pipe_coords(n, d) for n, d in fc.equalities]
    if box.one_sided != "positive":
        neg = negative_side_vertices(
            box.pi_i_lo, box.pi_i_hi, box.pi_j_lo, box.pi_j_hi, a_lo, b_lo, w)
        hull.vertices_neg = neg
        fc = facets_of_hull(neg)
        hull.facets_neg = [_to_pipe_coords(n, d) for n, d in fc.inequalities]
        hull.eq_neg = [_to_pipe_coords(n, d) for n, d in fc.equalities]
    return hull


# ---------------------------------------------------------------------------
# relaxation block emitters
# ---------------------------------------------------------------------------


def emit_hull_block_r1(prog, f, pi_i, pi_j, z, hull: PipeHull, key=""):
    """Exact-hull block: split variables, scaled facets, two cone rows.

    The negative-direction split copies are eliminated by substitution
    (minus = original - plus), halving the added variables.
    """
    if hull.one_sided != "none":
        raise ValueError("one-sided pipes use emit_one_sided_blocks")
    if not hull.facets_pos or not hull.facets_neg:
        raise ValueError("hull facets missing")
    box, w = hull.box, hull.w
    X = prog.x
    fp = prog.add_var(f"{key}:f+", 0.0, max(box.alpha_hi, 0.0))
    pip = prog.add_var(f"{key}:pi_i+", 0.0, box.pi_i_hi)
    pjp = prog.add_var(f"{key}:pi_j+", 0.0, box.pi_j_hi)
    fm = X(f) - X(fp)
    pim = X(pi_i) - X(pip)
    pjm = X(pi_j) - X(pjp)
    ids = []
    for a, b, c, d in hull.facets_pos:
        expr = a * X(fp) + b * X(pip) + c * X(pjp) - d * X(z)
        ids.append(prog.add_linear(expr, "<=", 0.0, f"{key}:hull+"))
    for a, b, c, d in hull.eq_pos:
        expr = a * X(fp) + b * X(pip) + c * X(pjp) - d * X(z)
        ids.append(prog.add_linear(expr, "==", 0.0, f"{key}:hull+eq"))
    for a, b, c, d in hull.facets_neg:
        expr = a * fm + b * pim + c * pjm - d * (1.0 - X(z))
        ids.append(prog.add_linear(expr, "<=", 0.0, f"{key}:hull-"))
    for a, b, c, d in hull.eq_neg:
        expr = a * fm + b * pim + c * pjm - d * (1.0 - X(z))
        ids.append(prog.add_linear(expr, "==", 0.0, f"{key}:hull-eq"))
    sw = math.sqrt(w)
    ids.append(prog.add_rotated_soc(0.5 * X(z), X(pip) - X(pjp),
                                    [sw * X(fp)], f"{key}:cone+"))
    ids.append(prog.add_rotated_soc(0.5 * (1.0 - X(z)), pjm - pim,
                                    [sw * fm], f"{key}:cone-"))
    return ids, (fp, pip, pjp)


def emit_socr_oa_block_r2(prog, f, pi_i, pi_j, z, box: PipeBox, w, key=""):
    """McCormick + single-cone outer-approximation block."""
    X = prog.x
    a_lo, a_hi = min(box.alpha_lo, 0.0), max(box.alpha_hi, 0.0)
    b_lo, b_hi = min(box.beta_lo, 0.0), max(box.beta_hi, 0.0)
    ub = 2.0 * (b_hi - b_lo) + w * max(a_hi * a_hi, a_lo * a_lo) + 1.0
    aux = prog.add_var(f"{key}:pi'", 0.0, ub)
    diff = X(pi_i) - X(pi_j)
    ids = [
        prog.add_linear(X(f) - a_hi * X(z), "<=", 0.0, f"{key}:f_ub"),
        prog.add_linear(X(f) - a_lo * (1.0 - X(z)), ">=", 0.0, f"{key}:f_lb"),
        prog.add_linear(diff - b_hi * X(z), "<=", 0.0, f"{key}:d_ub"),
        prog.add_linear(diff - b_lo * (1.0 - X(z)), ">=", 0.0, f"{key}:d_lb"),
    ]
    ids += prog.add_mccormick(X(aux), 2.0 * X(z) - 1.0, diff,
                              -1.0, 1.0, b_lo, b_hi, f"{key}:mc")
    ids.append(prog.add_rotated_soc(0.5, X(aux), [math.sqrt(w) * X(f)],
                                    f"{key}:cone"))
    return ids, aux


def emit_poly_oa_block_r3(prog, f, pi_i, pi_j, box: PipeBox, w, key=""):
    """Four tangent/secant hyperplanes intersected with the pipe box."""
    if not (box.alpha_lo < 0.0 < box.alpha_hi):
        raise ValueError("two-sided box required; use the one-sided variant")
    X = prog.x
    a = (1.0 - math.sqrt(2.0)) * box.alpha_lo
    b = (1.0 - math.sqrt(2.0)) * box.alpha_hi
    diff = X(pi_i) - X(pi_j)
    ids = [
        prog.add_linear(diff - 2.0 * w * a * X(f), ">=", -w * a * a, f"{key}:tan_lo"),
        prog.add_linear(diff + 2.0 * w * b * X(f), "<=", w * b * b, f"{key}:tan_hi"),
        prog.add_linear(diff - 2.0 * w * box.alpha_hi * X(f), ">=",
                        -w * box.alpha_hi ** 2, f"{key}:end_hi"),
        prog.add_linear(diff + 2.0 * w * box.alpha_lo * X(f), "<=",
                        w * box.alpha_lo ** 2, f"{key}:end_lo"),
        prog.add_linear(diff, "<=", box.beta_hi, f"{key}:beta_ub"),
        prog.add_linear(diff, ">=", box.beta_lo, f"{key}:beta_lb"),
    ]
    return ids


def emit_one_sided_blocks(prog, f, pi_i, pi_j, hull: PipeHull, kind, key=""):
    """Known-direction blocks per the fixed-flow-direction simplification.

    kind "socr" gives hull facets plus the cone (exact hull); "poly"
    gives the box plus the secant chord.
    """
    box, w = hull.box, hull.w
    side = hull.one_sided
    if side == "none":
        raise ValueError("pipe is two-sided")
    X = prog.x
    diff = X(pi_i) - X(pi_j)
    ids = [
        prog.add_linear(diff, "<=", box.beta_hi, f"{key}:beta_ub"),
        prog.add_linear(diff, ">=", box.beta_lo, f"{key}:beta_lb"),
    ]
    if kind == "poly":
        if side == "positive":
            if box.alpha_hi > 1e-12:
                slope = box.beta_hi / box.alpha_hi
                ids.append(prog.add_linear(diff - slope * X(f), "<=", 0.0,
                                           f"{key}:secant"))
            else:
                ids.append(prog.add_linear(diff, "<=", 0.0, f"{key}:secant"))
        else:
            if box.alpha_lo < -1e-12:
                slope = box.beta_lo / box.alpha_lo
                ids.append(prog.add_linear(diff - slope * X(f), ">=", 0.0,
                                           f"{key}:secant"))
            else:
                ids.append(prog.add_linear(diff, ">=", 0.0, f"{key}:secant"))
        return ids
    if kind != "socr":
        raise ValueError(f"unknown one-sided block kind {kind!r}")
    facets = hull.facets_pos if side == "positive" else hull.facets_neg
    eqs = hull.eq_pos if side == "positive" else hull.eq_neg
    for a, b, c, d in facets:
        ids.append(prog.add_linear(a * X(f) + b * X(pi_i) + c * X(pi_j), "<=", d,
                                   f"{key}:hull"))
    for a, b, c, d in eqs:
        ids.append(prog.add_linear(a * X(f) + b * X(pi_i) + c * X(pi_j), "==", d,
                                   f"{key}:hulleq"))
    sw = math.sqrt(w)
    if side == "positive":
        ids.append(prog.add_rotated_soc(0.5, diff, [sw * X(f)], f"{key}:cone"))
    else:
        ids.append(prog.add_rotated_soc(0.5, -1.0 * diff, [sw * X(f)], f"{key}:cone"))
    return ids
