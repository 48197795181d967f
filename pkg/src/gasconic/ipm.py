"""Primal-dual interior-point solver for second-order cone programs.

Solves the standard form produced by :mod:`gasconic.conic`::

    min c'x  s.t.  Ax + s = b,  s in K = {0}^p x R+^q x L^m1 x ...

via the homogeneous self-dual embedding with Nesterov-Todd scaling and
a Mehrotra predictor-corrector. The embedding yields certificates on
infeasible or unbounded programs: a dual improving ray z (A'z ~ 0,
b'z < 0, z in K*) or a primal ray x (Ax + s ~ 0, c'x < 0).

KKT systems are solved with a regularized LU factorization plus
iterative refinement; dense factorization is used below a size
threshold because the per-pipe/per-compressor subproblems in this
package are tiny and solved by the thousand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 900  # n + m below which dense LU beats SuperLU overhead
STATIC_REG = 1e-9
REFINE_STEPS = 2
STEP_FRACTION = 0.99


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    primal_objective: float = math.nan
    dual_objective: float = math.nan
    rel_gap: float = math.inf
    primal_residual: float = math.inf
    dual_residual: float = math.inf
    iterations: int = 0
    certificate: np.ndarray | None = None
    # (pcost, certified lower estimate) per iterate; lower <= pcost always
    iterate_log: list = field(default_factory=list)


class Cone:
    """Composite cone {0}^p x R+^q x product of Lorentz cones.

    All SOC operations are vectorized across blocks of equal dimension
    (the relaxations emit thousands of 3-dimensional cones), so blocks
    are grouped once here and every operation gathers/scatters through
    the per-group index matrices.
    """

    def __init__(self, p, q, socs):
        self.p = p
        self.q = q
        self.socs = list(socs)
        self.m = p + q + sum(socs)
        self.degree = q + len(self.socs)
        starts = []
        pos = p + q
        for dim in self.socs:
            starts.append(pos)
            pos += dim
        self.soc_starts = starts
        groups = {}
        for st, dim in zip(starts, self.socs):
            groups.setdefault(dim, []).append(st)
        self.groups = {
            dim: np.asarray(sts)[:, None] + np.arange(dim)[None, :]
            for dim, sts in groups.items()
        }
        e = np.zeros(self.m)
        e[p:p + q] = 1.0
        for st in starts:
            e[st] = 1.0
        self._identity = e
        # COO pattern for the block-diagonal S^{-1} matrix
        ri = [np.arange(p + q)]
        ci = [np.arange(p + q)]
        self._sinv_group_order = sorted(self.groups)
        for dim in self._sinv_group_order:
            G = self.groups[dim]
            ri.append(np.repeat(G, dim, axis=1).ravel())
            ci.append(np.tile(G, (1, dim)).ravel())
        self._sinv_ri = np.concatenate(ri)
        self._sinv_ci = np.concatenate(ci)

    def identity(self):
        return self._identity.copy()

    def push_interior(self, u, zero_to_zero=True):
        """Shift u so the nonneg/SOC parts are strictly interior."""
        u = u.copy()
        if zero_to_zero:
            u[:self.p] = 0.0
        ln = u[self.p:self.p + self.q]
        if ln.size:
            worst = ln.min()
            if worst <= 0.0:
                ln += 1.0 - worst
        for dim, G in self.groups.items():
            U = u[G]
            gap = np.linalg.norm(U[:, 1:], axis=1) - U[:, 0]
            bad = gap >= 0.0
            if bad.any():
                u[G[bad, 0]] += 1.0 + gap[bad]
        return u

    def inside(self, u, margin=0.0):
        if self.q and u[self.p:self.p + self.q].min() <= margin:
            return False
        for dim, G in self.groups.items():
            U = u[G]
            if (U[:, 0] - np.linalg.norm(U[:, 1:], axis=1) <= margin).any():
                return False
        return True

    def max_step(self, u, du):
        """sup {alpha >= 0 : u + alpha du in cone} over nonneg/SOC parts."""
        alpha = math.inf
        ln_u = u[self.p:self.p + self.q]
        ln_d = du[self.p:self.p + self.q]
        neg = ln_d < 0.0
        if neg.any():
            alpha = min(alpha, float((-ln_u[neg] / ln_d[neg]).min()))
        for dim, G in self.groups.items():
            U, D = u[G], du[G]
            a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            bq = U[:, 0] * D[:, 0] - np.einsum("ij,ij->i", U[:, 1:], D[:, 1:])
            cq = U[:, 0] ** 2 - np.einsum("ij,ij->i", U[:, 1:], U[:, 1:])
            disc = np.maximum(bq * bq - a * cq, 0.0)
            steps = np.full(len(U), math.inf)
            lin = np.abs(a) < 1e-300
            hit = lin & (bq < 0.0)
            steps[hit] = -cq[hit] / (2.0 * bq[hit])
            down = a < 0.0
            steps[down] = (bq[down] + np.sqrt(disc[down])) / (-a[down])
            up = (~lin) & (a > 0.0) & (disc > 0.0) & (bq < 0.0)
            steps[up] = (-bq[up] - np.sqrt(disc[up])) / a[up]
            fall = D[:, 0] < 0.0
            steps[fall] = np.minimum(steps[fall], -U[fall, 0] / D[fall, 0])
            if len(steps):
                alpha = min(alpha, float(steps.min()))
        return alpha

    # -- Jordan algebra on the nonneg/SOC parts --------------------------

    def product(self, u, v):
        out = np.zeros(self.m)
        sl = slice(self.p, self.p + self.q)
        out[sl] = u[sl] * v[sl]
        for dim, G in self.groups.items():
            U, V = u[G], v[G]
            out[G[:, 0]] = np.einsum("ij,ij->i", U, V)
            out[G[:, 1:].ravel()] = (U[:, :1] * V[:, 1:]
                                     + V[:, :1] * U[:, 1:]).ravel()
        return out

    def divide(self, lam, d):
        """Solve lam o x = d for x."""
        out = np.zeros(self.m)
        sl = slice(self.p, self.p + self.q)
        out[sl] = d[sl] / lam[sl]
        for dim, G in self.groups.items():
            L, D = lam[G], d[G]
            det = L[:, 0] ** 2 - np.einsum("ij,ij->i", L[:, 1:], L[:, 1:])
            x0 = (L[:, 0] * D[:, 0]
                  - np.einsum("ij,ij->i", L[:, 1:], D[:, 1:])) / det
            out[G[:, 0]] = x0
            out[G[:, 1:].ravel()] = ((D[:, 1:] - x0[:, None] * L[:, 1:])
                                     / L[:, :1]).ravel()
        return out


class NTScaling:
    """Nesterov-Todd scaling with W z = W^{-1} s = lambda (batched)."""

    def __init__(self, cone: Cone, s, z):
        self.cone = cone
        sl = slice(cone.p, cone.p + cone.q)
        self.w_lin = np.sqrt(s[sl] / z[sl]) if cone.q else np.zeros(0)
        self.eta = {}
        self.wbar = {}
        for dim, G in cone.groups.items():
            S, Z = s[G], z[G]
            det_s = S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:])
            det_z = Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:])
            eta = (det_s / det_z) ** 0.25
            sbar = S / np.sqrt(det_s)[:, None]
            zbar = Z / np.sqrt(det_z)[:, None]
            gamma = np.sqrt((1.0 + np.einsum("ij,ij->i", sbar, zbar)) / 2.0)
            wbar = np.empty_like(S)
            wbar[:, 0] = (sbar[:, 0] + zbar[:, 0]) / (2.0 * gamma)
            wbar[:, 1:] = (sbar[:, 1:] - zbar[:, 1:]) / (2.0 * gamma[:, None])
            self.eta[dim] = eta
            self.wbar[dim] = wbar
        self.lam = self.apply(z)

    def _batched(self, v, inverse):
        cone = self.cone
        out = np.zeros(cone.m)
        sl = slice(cone.p, cone.p + cone.q)
        out[sl] = v[sl] / self.w_lin if inverse else self.w_lin * v[sl]
        for dim, G in cone.groups.items():
            V = v[G]
            wbar, eta = self.wbar[dim], self.eta[dim]
            w1 = -wbar[:, 1:] if inverse else wbar[:, 1:]
            dot = np.einsum("ij,ij->i", w1, V[:, 1:])
            res = np.empty_like(V)
            res[:, 0] = wbar[:, 0] * V[:, 0] + dot
            res[:, 1:] = V[:, :1] * w1 + V[:, 1:] \
                + (dot / (1.0 + wbar[:, 0]))[:, None] * w1
            res = res / eta[:, None] if inverse else res * eta[:, None]
            out[G.ravel()] = res.ravel()
        return out

    def apply(self, v):
        """W v."""
        return self._batched(v, False)

    def apply_inv(self, v):
        """W^{-1} v."""
        return self._batched(v, True)

    def sinv_data(self):
        """Data vector for the cone's S^{-1} COO pattern."""
        cone = self.cone
        parts = [np.ones(cone.p), 1.0 / self.w_lin]
        for dim in cone._sinv_group_order:
            wbar, eta = self.wbar[dim], self.eta[dim]
            k = len(wbar)
            blocks = np.empty((k, dim, dim))
            blocks[:, 0, 0] = wbar[:, 0]
            blocks[:, 0, 1:] = -wbar[:, 1:]
            blocks[:, 1:, 0] = -wbar[:, 1:]
            blocks[:, 1:, 1:] = np.eye(dim - 1)[None] \
                + wbar[:, 1:, None] * wbar[:, None, 1:] \
                / (1.0 + wbar[:, 0])[:, None, None]
            blocks /= eta[:, None, None]
            parts.append(blocks.reshape(k, -1).ravel())
        return np.concatenate(parts)


class _KKT:
    """Solve the reduced 2x2 Newton system in scaled dual variables.

    Instead of factoring [[0, A'],[A, -W^2]] directly (whose lower block
    becomes hopelessly ill-conditioned near the central path limit), the
    dual direction is substituted by dz~ = W dz, giving

        [[dI, Abar'], [Abar, D - dI]],  Abar = S^{-1} A,  D = diag(0_p, -I)

    where S is identity on zero-cone rows and W elsewhere. The exact
    (unregularized) matrix drives iterative refinement.
    """

    def __init__(self, A, cone: Cone, delta=STATIC_REG):
        self.A = A
        self.cone = cone
        self.n = A.shape[1]
        self.m = A.shape[0]
        self.delta = delta
        self.dense = (self.n + self.m) <= DENSE_LIMIT

    def _apply_sinv(self, v, scaling):
        """S^{-1} v: identity on the zero cone, W^{-1} elsewhere."""
        if scaling is None:
            return v.copy()
        out = scaling.apply_inv(v)
        out[:self.cone.p] = v[:self.cone.p]
        return out

    def _sinv_matrix(self, scaling):
        data = scaling.sinv_data()
        return sp.csr_matrix((data, (self.cone._sinv_ri, self.cone._sinv_ci)),
                             shape=(self.m, self.m))

    def factor(self, scaling: NTScaling | None):
        cone, n, m = self.cone, self.n, self.m
        self.scaling = scaling
        d_diag = np.concatenate([np.zeros(cone.p), -np.ones(m - cone.p)])
        if scaling is None:
            Abar = self.A
        else:
            Abar = (self._sinv_matrix(scaling) @ self.A).tocsc()
        if self.dense:
            Abar_d = Abar.toarray()
            K = np.zeros((n + m, n + m))
            K[:n, :n] = self.delta * np.eye(n)
            K[:n, n:] = Abar_d.T
            K[n:, :n] = Abar_d
            K[n:, n:] = np.diag(d_diag - self.delta)
            self._exactK = K.copy()
            self._exactK[:n, :n] = 0.0
            self._exactK[n:, n:] = np.diag(d_diag)
            self._lu = sla.lu_factor(K, check_finite=False)
        else:
            D = sp.diags(d_diag)
            K = sp.bmat([
                [sp.identity(n) * self.delta, Abar.T],
                [Abar, D - sp.identity(m) * self.delta],
            ], format="csc")
            self._exactK = sp.bmat([
                [None, Abar.T],
                [Abar, D],
            ], format="csc")
            self._lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")

    def solve(self, rx, rz):
        rz_bar = self._apply_sinv(rz, self.scaling)
        rhs = np.concatenate([rx, rz_bar])
        scale = np.linalg.norm(rhs) + 1e-300
        if self.dense:
            sol = sla.lu_solve(self._lu, rhs, check_finite=False)
            for _ in range(REFINE_STEPS):
                resid = rhs - self._exactK @ sol
                if np.linalg.norm(resid) <= 1e-14 * scale:
                    break
                sol += sla.lu_solve(self._lu, resid, check_finite=False)
        else:
            sol = self._lu.solve(rhs)
            for _ in range(REFINE_STEPS):
                resid = rhs - self._exactK @ sol
                if np.linalg.norm(resid) <= 1e-14 * scale:
                    break
                sol += self._lu.solve(resid)
        dx = sol[:self.n]
        dz_bar = sol[self.n:]
        dz = self._apply_sinv(dz_bar, self.scaling)
        return dx, dz, dz_bar


def solve_standard_socp(A, b, c, cone: Cone, gap_tol=1e-8, feas_tol=1e-8,
                        max_iter=120, warm=None, time_limit=None,
                        row_scale=None, col_scale=None) -> ConicSolution:
    """Run the HSDE interior-point method on raw standard-form data.

    `row_scale`/`col_scale` describe the equilibration applied to (A, b,
    c) so residual norms (and hence the optimality test) are evaluated
    in the caller's original units.
    """
    m, n = A.shape
    if m != cone.m:
        raise ValueError("cone dimension mismatch")
    t_start = time.monotonic()
    d_row = np.ones(m) if row_scale is None else np.asarray(row_scale)
    d_col = np.ones(n) if col_scale is None else np.asarray(col_scale)

    kkt = _KKT(A, cone)
    e = cone.identity()

    # initial point: least-squares primal/dual with a push into the cone
    kkt.factor(None)
    if warm is not None:
        x = np.asarray(warm[0], dtype=float).copy()
        s = cone.push_interior(np.asarray(warm[1], dtype=float))
        z = cone.push_interior(np.asarray(warm[2], dtype=float), zero_to_zero=False)
        z[:cone.p] = warm[2][:cone.p]
    else:
        x0, zsol, _ = kkt.solve(np.zeros(n), b)
        x = x0
        s = cone.push_interior(-(A @ x - b))
        xd, z0, _ = kkt.solve(-c, np.zeros(m))
        z = cone.push_interior(z0, zero_to_zero=False)
    tau, kappa = 1.0, 1.0

    norm_b = 1.0 + np.linalg.norm(b / d_row)
    norm_c = 1.0 + np.linalg.norm(c / d_col)
    best = None
    log = []
    status = "iteration-limit"

    for iteration in range(max_iter):
        rx = A.T @ z + c * tau
        rz = A @ x + s - b * tau
        rtau = kappa + c @ x + b @ z
        stz = s @ z
        mu = (stz + tau * kappa) / (cone.degree + 1)

        pcost = (c @ x) / tau
        dcost = -(b @ z) / tau
        gap_abs = stz / tau ** 2
        rel_gap = gap_abs / max(1.0, abs(pcost), abs(dcost))
        pres = np.linalg.norm(rz / d_row) / (tau * norm_b)
        dres = np.linalg.norm(rx / d_col) / (tau * norm_c)
        log.append((pcost, pcost - (stz + tau * kappa) / tau ** 2))

        snapshot = (max(pres, dres, rel_gap),
                    dict(x=x / tau, z=z / tau, s=s / tau, pcost=pcost, dcost=dcost,
                         rel_gap=rel_gap, pres=pres, dres=dres, it=iteration))
        if best is None or snapshot[0] < best[0]:
            best = snapshot

        if pres <= feas_tol and dres <= feas_tol and rel_gap <= gap_tol:
            status = "optimal"
            break

        # certificate checks (evaluated in the caller's units)
        bz = b @ z
        if bz < -1e-12:
            if np.linalg.norm((A.T @ z) / d_col) / (-bz) <= feas_tol:
                sol = ConicSolution(status="infeasible", iterations=iteration,
                                    iterate_log=log)
                sol.certificate = z / (-bz)
                sol.z = z / (-bz)
                return sol
        cx = c @ x
        if cx < -1e-12:
            if np.linalg.norm((A @ x + s) / d_row) / (-cx) <= feas_tol:
                sol = ConicSolution(status="unbounded", iterations=iteration,
                                    iterate_log=log)
                sol.certificate = x / (-cx)
                sol.x = x / (-cx)
                return sol

        if time_limit is not None and time.monotonic() - t_start > time_limit:
            break
        if not (cone.inside(s) and cone.inside(z)) or not np.isfinite(mu):
            break  # numerical breakdown; best iterate is returned

        scaling = NTScaling(cone, s, z)
        lam = scaling.lam
        if not np.all(np.isfinite(lam)):
            break
        kkt.factor(scaling)
        x1, z1, zb1 = kkt.solve(-c, b)
        denom_base = kappa / tau - (c @ x1 + b @ z1)
        if not np.isfinite(denom_base) or denom_base == 0.0:
            break

        def direction(sigma, ds_vec, dkappa_rhs):
            # ds comes straight from the primal Newton row: any W-scaled
            # reconstruction amplifies roundoff near convergence and the
            # primal residual diverges instead of contracting
            rx_s = -(1.0 - sigma) * rx
            g = cone.divide(lam, ds_vec)
            rz_s = -(1.0 - sigma) * rz + scaling.apply(g)
            x2, z2, zb2 = kkt.solve(rx_s, rz_s)
            num = (1.0 - sigma) * rtau - dkappa_rhs / tau + c @ x2 + b @ z2
            dtau = num / denom_base
            dx = x2 + dtau * x1
            dz = z2 + dtau * z1
            dz_bar = zb2 + dtau * zb1
            ds = -(1.0 - sigma) * rz - A @ dx + b * dtau
            ds[:cone.p] = 0.0
            dkappa = -(dkappa_rhs + kappa * dtau) / tau
            return dx, dz, ds, dtau, dkappa, g, dz_bar

        # predictor
        ds_aff = cone.product(lam, lam)
        dx_a, dz_a, ds_a, dtau_a, dkap_a, g_a, dzb_a = \
            direction(0.0, ds_aff, tau * kappa)
        alpha_aff = min(cone.max_step(s, ds_a), cone.max_step(z, dz_a), 1.0)
        if dtau_a < 0.0:
            alpha_aff = min(alpha_aff, -tau / dtau_a)
        if dkap_a < 0.0:
            alpha_aff = min(alpha_aff, -kappa / dkap_a)
        sigma = max(min((1.0 - alpha_aff) ** 3, 0.99999), 1e-10)

        # corrector; W^{-1} ds_a = -(g_a + dzb_a) and W dz_a = dzb_a
        corr = cone.product(-(g_a + dzb_a), dzb_a)
        ds_vec = ds_aff + corr - sigma * mu * e
        dkap_rhs = tau * kappa + dtau_a * dkap_a - sigma * mu
        dx, dz, ds, dtau, dkap, _, _ = direction(sigma, ds_vec, dkap_rhs)

        def step_len(ds_, dz_, dtau_, dkap_):
            a = min(cone.max_step(s, ds_), cone.max_step(z, dz_), 10.0)
            if dtau_ < 0.0:
                a = min(a, -tau / dtau_)
            if dkap_ < 0.0:
                a = min(a, -kappa / dkap_)
            return a

        alpha = step_len(ds, dz, dtau, dkap)
        if alpha < 0.1 * alpha_aff:
            # Mehrotra corrector blow-up near a thin face: drop the
            # corrector term but keep the residual-reducing direction
            ds_vec = ds_aff - sigma * mu * e
            dkap_rhs = tau * kappa - sigma * mu
            dx, dz, ds, dtau, dkap, _, _ = direction(sigma, ds_vec, dkap_rhs)
            alpha = step_len(ds, dz, dtau, dkap)
        alpha = min(STEP_FRACTION * alpha, 1.0)
        for _ in range(60):
            s_new = s + alpha * ds
            z_new = z + alpha * dz
            tau_new = tau + alpha * dtau
            kappa_new = kappa + alpha * dkap
            if tau_new > 0.0 and kappa_new > 0.0 and cone.inside(s_new) \
                    and cone.inside(z_new):
                break
            alpha *= 0.5
        else:
            break  # numerical breakdown
        x = x + alpha * dx
        s, z, tau, kappa = s_new, z_new, tau_new, kappa_new
        if tau < 1e-14 and kappa < 1e-14:
            break

    info = best[1] if best is not None else None
    sol = ConicSolution(status=status, iterations=(info["it"] if info else max_iter),
                        iterate_log=log)
    if info is not None:
        sol.x = info["x"]
        sol.z = info["z"]
        sol.s = info["s"]
        sol.primal_objective = info["pcost"]
        sol.dual_objective = info["dcost"]
        sol.rel_gap = info["rel_gap"]
        sol.primal_residual = info["pres"]
        sol.dual_residual = info["dres"]
    return sol


def solve_socp(std, gap_tol=1e-8, feas_tol=1e-8, max_iter=120, warm=None,
               time_limit=None, b_override=None, fixed=None) -> ConicSolution:
    """Solve a frozen StandardForm, mapping the solution back to user scale.

    ``b_override`` substitutes a modified (already scaled) right-hand
    side. ``fixed`` maps variable indices to values: those variables are
    substituted out of the system (column zeroed, contribution moved to
    b and the objective constant). Substitution, unlike collapsing bound
    rows, keeps the node problem strictly interior, which the
    interior-point method needs to move at all.
    """
    cone = Cone(std.p, std.q, std.socs)
    warm_scaled = None
    if warm is not None:
        wx, ws, wz = warm
        warm_scaled = (wx / np.where(std.col_scale == 0, 1.0, std.col_scale),
                       ws * std.row_scale, wz / std.row_scale)
    b = std.b if b_override is None else b_override
    A, c = std.A, std.c
    shift = 0.0
    if fixed:
        cols = np.fromiter(fixed.keys(), dtype=np.int64)
        vals = np.fromiter(fixed.values(), dtype=float)
        vals_scaled = vals / std.col_scale[cols]
        b = b - A[:, cols] @ vals_scaled
        A = A.copy()
        for j in cols:
            A.data[A.indptr[j]:A.indptr[j + 1]] = 0.0
        shift = float(c[cols] @ vals_scaled)
        c = c.copy()
        c[cols] = 0.0
    sol = solve_standard_socp(A, b, c, cone, gap_tol=gap_tol,
                              feas_tol=feas_tol, max_iter=max_iter,
                              warm=warm_scaled, time_limit=time_limit,
                              row_scale=std.row_scale, col_scale=std.col_scale)
    if sol.x is not None:
        sol.x = std.unscale_x(sol.x)
        if fixed:
            for j, v in fixed.items():
                sol.x[j] = v
    if sol.z is not None:
        sol.z = std.unscale_z(sol.z)
    if sol.s is not None:
        sol.s = std.unscale_s(sol.s)
    if math.isfinite(sol.primal_objective):
        sol.primal_objective += std.c0 + shift
        sol.dual_objective += std.c0 + shift
    if sol.status == "infeasible" and sol.certificate is not None:
        sol.certificate = std.unscale_z(sol.certificate)
    if sol.status == "unbounded" and sol.certificate is not None:
        sol.certificate = std.unscale_x(sol.certificate)
    return sol
