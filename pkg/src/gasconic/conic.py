"""Conic program container and reusable constraint gadgets.

A :class:`ConicProgram` collects variables, linear rows, second-order
cone blocks and a linear objective, then freezes into a standard-form
triple (A, b, c) with cone dimensions::

    min c'x  s.t.  A x + s = b,   s in {0}^p x R+^q x L^m1 x ... x L^mk

Rotated cone blocks (2uv >= |x|^2) are rewritten into plain Lorentz
cones at export. Variable bounds become inequality rows whose indices
are recorded so branch-and-bound can fix binaries by editing b alone.
"""

from __future__ import annotations

import io
import math

import numpy as np
import scipy.sparse as sp

COEF_LIMIT = 1e12  # rows with larger magnitudes indicate broken big-M data


class LinExpr:
    """Sparse affine expression sum_i coef_i * x_i + const."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @staticmethod
    def variable(index):
        return LinExpr({int(index): 1.0})

    @staticmethod
    def constant(value):
        return LinExpr({}, value)

    def copy(self):
        return LinExpr(self.coeffs, self.const)

    def _iadd(self, other, sign):
        other = as_expr(other)
        for idx, coef in other.coeffs.items():
            new = self.coeffs.get(idx, 0.0) + sign * coef
            if new == 0.0:
                self.coeffs.pop(idx, None)
            else:
                self.coeffs[idx] = new
        self.const += sign * other.const
        return self

    def __add__(self, other):
        return self.copy()._iadd(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy()._iadd(other, -1.0)

    def __rsub__(self, other):
        return as_expr(other).copy()._iadd(self, -1.0)

    def __mul__(self, scalar):
        scalar = float(scalar)
        if scalar == 0.0:
            return LinExpr({}, 0.0)
        return LinExpr({i: c * scalar for i, c in self.coeffs.items()},
                       self.const * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x):
        return self.const + sum(c * x[i] for i, c in self.coeffs.items())

    def __repr__(self):
        parts = [f"{c:+g}*x{i}" for i, c in sorted(self.coeffs.items())]
        if self.const or not parts:
            parts.append(f"{self.const:+g}")
        return " ".join(parts)


def as_expr(obj) -> LinExpr:
    if isinstance(obj, LinExpr):
        return obj
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return LinExpr.variable(obj)
    if isinstance(obj, float):
        return LinExpr.constant(obj)
    raise TypeError(f"cannot interpret {obj!r} as an affine expression")


class ConicProgram:
    """Single-writer program under construction; freeze() makes it solvable."""

    def __init__(self, name="program"):
        self.name = name
        self.var_names = []
        self.var_lb = []
        self.var_ub = []
        self.binaries = []
        self.rows = []        # (expr, sense, rhs, label)
        self.soc_blocks = []  # (exprs, label); exprs[0] >= ||exprs[1:]||
        self.rsoc_blocks = []  # ((u, v, xs), label); 2uv >= sum x^2
        self.objective = LinExpr()
        self.obj_const = 0.0

    # -- construction ---------------------------------------------------

    @property
    def num_vars(self):
        return len(self.var_names)

    def add_var(self, name, lb=-math.inf, ub=math.inf, binary=False):
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if not (lb <= ub):
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.var_lb.append(float(lb))
        self.var_ub.append(float(ub))
        if binary:
            self.binaries.append(idx)
        return idx

    def x(self, index) -> LinExpr:
        return LinExpr.variable(index)

    def add_linear(self, expr, sense, rhs=0.0, label=""):
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        expr = as_expr(expr)
        for coef in expr.coeffs.values():
            if not math.isfinite(coef) or abs(coef) > COEF_LIMIT:
                raise ValueError(f"row {label!r}: coefficient {coef} out of range")
        if not math.isfinite(rhs):
            raise ValueError(f"row {label!r}: non-finite rhs")
        self.rows.append((expr, sense, float(rhs), label))
        return len(self.rows) - 1

    def add_soc(self, t_expr, x_exprs, label=""):
        """t >= ||(x_1, ..., x_k)|| with affine entries."""
        if not x_exprs:
            raise ValueError("SOC block needs at least one norm term")
        exprs = [as_expr(t_expr)] + [as_expr(e) for e in x_exprs]
        self.soc_blocks.append((exprs, label))
        return ("soc", len(self.soc_blocks) - 1)

    def add_rotated_soc(self, u_expr, v_expr, x_exprs, label=""):
        """2 u v >= sum_k x_k^2 with u, v >= 0."""
        if not x_exprs:
            raise ValueError("rotated SOC block needs at least one norm term")
        block = (as_expr(u_expr), as_expr(v_expr), [as_expr(e) for e in x_exprs])
        self.rsoc_blocks.append((block, label))
        return ("rsoc", len(self.rsoc_blocks) - 1)

    def add_objective(self, expr):
        expr = as_expr(expr)
        self.objective = self.objective + expr

    # -- gadgets ---------------------------------------------------------

    def add_mccormick(self, w, x, y, lx, ux, ly, uy, label="mccormick"):
        """Envelope rows for w = x*y over [lx,ux] x [ly,uy]."""
        for bound in (lx, ux, ly, uy):
            if not math.isfinite(bound):
                raise ValueError("McCormick bounds must be finite")
        if lx > ux or ly > uy:
            raise ValueError("McCormick bounds must be ordered")
        w, x, y = as_expr(w), as_expr(x), as_expr(y)
        ids = [
            self.add_linear(w - ly * x - lx * y, ">=", -lx * ly, f"{label}:ll"),
            self.add_linear(w - uy * x - ux * y, ">=", -ux * uy, f"{label}:uu"),
            self.add_linear(w - uy * x - lx * y, "<=", -lx * uy, f"{label}:lu"),
            self.add_linear(w - ly * x - ux * y, "<=", -ux * ly, f"{label}:ul"),
        ]
        return ids

    def linearize_abs(self, x_index, cost, strict=False, big_m=None, label="abs"):
        """Split |x| for a minimized objective with positive cost.

        Returns (plus, minus) variable indices; cost*(plus+minus) is added
        to the objective. The split is exact at optimality because the
        positive cost drives plus*minus to zero. ``strict`` adds a big-M
        complementarity binary for experiments with non-positive costs.
        """
        lb, ub = self.var_lb[x_index], self.var_ub[x_index]
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise ValueError(f"|x| split needs finite bounds on {self.var_names[x_index]}")
        name = self.var_names[x_index]
        plus = self.add_var(f"{name}+", 0.0, max(ub, 0.0))
        minus = self.add_var(f"{name}-", 0.0, max(-lb, 0.0))
        self.add_linear(self.x(x_index) - self.x(plus) + self.x(minus), "==", 0.0,
                        f"{label}:{name}:split")
        self.add_objective(cost * (self.x(plus) + self.x(minus)))
        if strict:
            m_plus = big_m if big_m is not None else max(ub, 0.0)
            m_minus = big_m if big_m is not None else max(-lb, 0.0)
            pick = self.add_var(f"{name}:sign", binary=True)
            self.add_linear(self.x(plus) - m_plus * self.x(pick), "<=", 0.0,
                            f"{label}:{name}:compl+")
            self.add_linear(self.x(minus) + m_minus * self.x(pick), "<=", m_minus,
                            f"{label}:{name}:compl-")
        return plus, minus

    # -- freezing --------------------------------------------------------

    def freeze(self, equilibrate=True):
        return StandardForm(self, equilibrate=equilibrate)

    def copy(self):
        import copy as _copy

        return _copy.deepcopy(self)


def _append_expr(expr, rows_i, cols, vals, row_idx, negate=False):
    sign = -1.0 if negate else 1.0
    for col, coef in expr.coeffs.items():
        rows_i.append(row_idx)
        cols.append(col)
        vals.append(sign * coef)


class StandardForm:
    """Frozen conic standard form with optional Ruiz equilibration.

    Attributes of interest: A, b, c (scaled), dims = (p, q, socs),
    binaries, bound_rows (var -> (lb_row, ub_row) in scaled row space).
    """

    def __init__(self, prog: ConicProgram, equilibrate=True):
        self.prog = prog
        n = prog.num_vars
        rows_i, cols, vals = [], [], []
        b = []
        labels = []
        r = 0

        # zero cone: equality rows, then variables pinned by lb == ub
        # (a pinned variable as two opposing inequalities would leave the
        # problem without a strict interior, which cripples the barrier)
        for expr, sense, rhs, label in prog.rows:
            if sense != "==":
                continue
            _append_expr(expr, rows_i, cols, vals, r)
            b.append(rhs - expr.const)
            labels.append(label or f"eq{r}")
            r += 1
        pinned = []
        for j in range(n):
            lb, ub = prog.var_lb[j], prog.var_ub[j]
            if math.isfinite(lb) and lb == ub:
                rows_i.append(r)
                cols.append(j)
                vals.append(1.0)
                b.append(lb)
                labels.append(f"pin:{prog.var_names[j]}")
                pinned.append(j)
                r += 1
        self.p = r

        # nonneg cone: inequalities then variable bounds
        for expr, sense, rhs, label in prog.rows:
            if sense == "==":
                continue
            if sense == "<=":
                _append_expr(expr, rows_i, cols, vals, r)
                b.append(rhs - expr.const)
            else:
                _append_expr(expr, rows_i, cols, vals, r, negate=True)
                b.append(expr.const - rhs)
            labels.append(label or f"ineq{r}")
            r += 1
        self.bound_rows = {}
        pinned_set = set(pinned)
        for j in range(n):
            lb, ub = prog.var_lb[j], prog.var_ub[j]
            lb_row = ub_row = None
            if j not in pinned_set:
                if math.isfinite(lb):
                    rows_i.append(r)
                    cols.append(j)
                    vals.append(-1.0)
                    b.append(-lb)
                    labels.append(f"lb:{prog.var_names[j]}")
                    lb_row = r
                    r += 1
                if math.isfinite(ub):
                    rows_i.append(r)
                    cols.append(j)
                    vals.append(1.0)
                    b.append(ub)
                    labels.append(f"ub:{prog.var_names[j]}")
                    ub_row = r
                    r += 1
            self.bound_rows[j] = (lb_row, ub_row)
        self.q = r - self.p

        # SOC blocks: s_block = b_block - A_block x must lie in the cone
        self.socs = []
        def put_cone_row(expr):
            nonlocal r
            _append_expr(expr, rows_i, cols, vals, r, negate=True)
            b.append(expr.const)
            r += 1

        for exprs, label in prog.soc_blocks:
            for expr in exprs:
                put_cone_row(expr)
            self.socs.append(len(exprs))
            labels.extend([label or "soc"] * len(exprs))
        for (u, v, xs), label in prog.rsoc_blocks:
            # 2uv >= |x|^2  <=>  (u+v) >= ||(u-v, sqrt(2) x)||
            put_cone_row(u + v)
            put_cone_row(u - v)
            for xe in xs:
                put_cone_row(xe * math.sqrt(2.0))
            self.socs.append(2 + len(xs))
            labels.extend([label or "rsoc"] * (2 + len(xs)))

        m = r
        self.m, self.n = m, n
        self.A = sp.csc_matrix(
            (np.asarray(vals), (np.asarray(rows_i, dtype=np.int64),
                                np.asarray(cols, dtype=np.int64))),
            shape=(m, n))
        self.b = np.asarray(b)
        self.c = np.zeros(n)
        for j, coef in prog.objective.coeffs.items():
            self.c[j] = coef
        self.c0 = prog.obj_const + prog.objective.const
        self.labels = labels
        self.binaries = list(prog.binaries)

        if np.abs(self.A.data).max(initial=0.0) > COEF_LIMIT or \
                np.abs(self.b).max(initial=0.0) > COEF_LIMIT:
            raise ValueError("standard form contains coefficients beyond 1e12")

        self.row_scale = np.ones(m)
        self.col_scale = np.ones(n)
        if equilibrate and m and n:
            self._equilibrate()

    def _block_slices(self):
        out = [(i, i + 1) for i in range(self.p + self.q)]
        start = self.p + self.q
        for dim in self.socs:
            out.append((start, start + dim))
            start += dim
        return out

    def _equilibrate(self, iterations=10):
        """Ruiz scaling over [A b]; SOC blocks share one row factor.

        The right-hand side participates in the row norms so rows whose
        magnitude lives in b alone (pinned constants) are scaled too.
        """
        A = self.A.copy()
        b = self.b.copy()
        d_row = np.ones(self.m)
        d_col = np.ones(self.n)
        blocks = self._block_slices()
        for _ in range(iterations):
            A = A.tocsc()
            Aabs = sp.csc_matrix((np.abs(A.data), A.indices, A.indptr), shape=A.shape)
            col_norm = np.asarray(Aabs.max(axis=0).todense()).ravel()
            col_norm[col_norm == 0.0] = 1.0
            sc = 1.0 / np.sqrt(col_norm)
            A = A @ sp.diags(sc)
            d_col *= sc
            Acsr = A.tocsr()
            row_norm = np.zeros(self.m)
            absdata = np.abs(Acsr.data)
            for i in range(self.m):
                seg = absdata[Acsr.indptr[i]:Acsr.indptr[i + 1]]
                row_norm[i] = seg.max() if seg.size else abs(b[i])
                if row_norm[i] == 0.0:
                    row_norm[i] = 1.0
            srow = np.ones(self.m)
            for lo, hi in blocks:
                nrm = row_norm[lo:hi].max()
                if nrm > 0.0:
                    srow[lo:hi] = 1.0 / math.sqrt(nrm)
            A = sp.diags(srow) @ A
            b = srow * b
            d_row *= srow
            spread = max(abs(math.log(row_norm.max())),
                         abs(math.log(max(row_norm.min(), 1e-300))))
            if spread < 0.1:
                break
        self.A = A.tocsc()
        self.b = d_row * self.b
        self.c = d_col * self.c
        self.row_scale = d_row
        self.col_scale = d_col

    # -- solution mapping -------------------------------------------------

    def unscale_x(self, x_scaled):
        return self.col_scale * x_scaled

    def unscale_z(self, z_scaled):
        return self.row_scale * z_scaled

    def unscale_s(self, s_scaled):
        return s_scaled / self.row_scale

    def objective_value(self, x_unscaled):
        c = np.zeros(self.n)
        for j, coef in self.prog.objective.coeffs.items():
            c[j] = coef
        return float(c @ x_unscaled) + self.c0

    def set_var_bounds(self, b_scaled, var, lb=None, ub=None):
        """Edit the bound rows of a variable inside a scaled b copy."""
        lb_row, ub_row = self.bound_rows[var]
        if lb is not None:
            if lb_row is None:
                raise ValueError(f"variable {var} has no lower bound row")
            b_scaled[lb_row] = -lb * self.row_scale[lb_row]
        if ub is not None:
            if ub_row is None:
                raise ValueError(f"variable {var} has no upper bound row")
            b_scaled[ub_row] = ub * self.row_scale[ub_row]


def debug_dump(prog: ConicProgram) -> str:
    """One-constraint-per-line text form for diffing program builds.

    Format: ``min <expr>`` then rows ``<label>: <expr> <sense> <rhs>``,
    then ``soc <label>: t=<expr> | x1=<expr> ...`` and rotated blocks
    ``rsoc <label>: u=<expr> v=<expr> | ...``, then variable bounds.
    """
    out = io.StringIO()
    out.write(f"program {prog.name}\n")
    out.write(f"min {prog.objective!r} + {prog.obj_const:g}\n")
    for expr, sense, rhs, label in prog.rows:
        out.write(f"{label or 'row'}: {expr!r} {sense} {rhs:g}\n")
    for exprs, label in prog.soc_blocks:
        body = " | ".join(repr(e) for e in exprs)
        out.write(f"soc {label or ''}: {body}\n")
    for (u, v, xs), label in prog.rsoc_blocks:
        body = " | ".join(repr(e) for e in xs)
        out.write(f"rsoc {label or ''}: u={u!r} v={v!r} | {body}\n")
    for j, name in enumerate(prog.var_names):
        kind = "bin" if j in set(prog.binaries) else "cont"
        out.write(f"var {name} [{prog.var_lb[j]:g}, {prog.var_ub[j]:g}] {kind}\n")
    return out.getvalue()
