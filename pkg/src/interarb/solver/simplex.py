"""Bounded-variable revised simplex (primal and dual) on sparse matrices.

Problems are taken as ``min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,
lb <= x <= ub``. Internally every row gets a slack column (``[0, inf)`` for
inequalities, ``[0, 0]`` for equalities) so the working matrix is
``[A | I]`` and the initial basis is all slacks.

The basis inverse is kept as a sparse LU factorisation (SuperLU) followed by
a product-form eta file, refactorised every ``REFACTOR`` updates.

Dual simplex is the workhorse: with finite bounds the slack basis is dual
feasible once every structural sits at the bound its cost points to, and
branch-and-bound nodes only change bounds, which preserves dual
feasibility of the parent's basis. Variables with an infinite bound on the
cost-improving side get a temporary box; the primal simplex then finishes
from the resulting feasible point and detects unboundedness.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import NumericError, ShapeError

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR = 64
ART_BOUND = 1e7

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3


@dataclass
class Basis:
    head: np.ndarray  # column index per row
    state: np.ndarray  # per column: AT_LOWER / AT_UPPER / AT_ZERO / BASIC

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.state.copy())


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | limit | cutoff
    x: np.ndarray | None
    objective: float
    iterations: int
    duals: np.ndarray | None = None  # one per row, A_ub rows first
    reduced_costs: np.ndarray | None = None
    basis: Basis | None = field(default=None, repr=False)


class _LU:
    """B^-1 as SuperLU factors plus a product-form eta file."""

    def __init__(self, B: sp.csc_matrix):
        m = B.shape[0]
        self.m = m
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise NumericError(f"singular basis ({exc})") from exc
        self.etas = []  # (r, alpha_col)

    def ftran(self, a):
        y = self.lu.solve(np.asarray(a, dtype=float))
        for r, col in self.etas:
            yr = y[r] / col[r]
            if yr != 0.0:
                y -= yr * col
            y[r] = yr
        return y

    def btran(self, e):
        y = np.array(e, dtype=float)
        for r, col in reversed(self.etas):
            # (E^T y)_r = (y_r - sum_{i != r} col_i y_i) / col_r
            s = col @ y - col[r] * y[r]
            y[r] = (y[r] - s) / col[r]
        return self.lu.solve(y, trans="T")

    def update(self, r, col):
        self.etas.append((r, col.copy()))


def _standardise(c, A_ub, b_ub, A_eq, b_eq, lb, ub):
    c = np.asarray(c, dtype=float).ravel()
    n = c.shape[0]
    mats, rhs = [], []
    m_ub = m_eq = 0
    if A_ub is not None:
        A_ub = sp.csr_matrix(A_ub, dtype=float)
        if A_ub.shape[1] != n:
            raise ShapeError(f"A_ub has {A_ub.shape[1]} columns, expected {n}")
        b_ub = np.asarray(b_ub, dtype=float).ravel()
        if b_ub.shape[0] != A_ub.shape[0]:
            raise ShapeError("b_ub length does not match A_ub rows")
        mats.append(A_ub)
        rhs.append(b_ub)
        m_ub = A_ub.shape[0]
    if A_eq is not None:
        A_eq = sp.csr_matrix(A_eq, dtype=float)
        if A_eq.shape[1] != n:
            raise ShapeError(f"A_eq has {A_eq.shape[1]} columns, expected {n}")
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        if b_eq.shape[0] != A_eq.shape[0]:
            raise ShapeError("b_eq length does not match A_eq rows")
        mats.append(A_eq)
        rhs.append(b_eq)
        m_eq = A_eq.shape[0]
    m = m_ub + m_eq
    A = sp.vstack(mats, format="csr") if mats else sp.csr_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    lb = np.full(n, -np.inf) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
    ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
    if np.any(lb > ub):
        raise ShapeError("some lower bounds exceed upper bounds")
    full = sp.hstack([A, sp.identity(m, format="csr")], format="csc")
    cf = np.r_[c, np.zeros(m)]
    lf = np.r_[lb, np.zeros(m)]
    uf = np.r_[ub, np.full(m_ub, np.inf), np.zeros(m_eq)]
    return full, b, cf, lf, uf, n, m_ub, m_eq


class Simplex:
    """Reusable simplex engine; bounds may be changed between solves.

    ``iteration_limit`` caps pivots per call. The engine keeps the last
    basis so consecutive solves warm-start automatically.
    """

    def __init__(self, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
                 iteration_limit: int = 200_000):
        (self.A, self.b, self.c, self.l, self.u, self.n, self.m_ub, self.m_eq) = _standardise(
            c, A_ub, b_ub, A_eq, b_eq, lb, ub)
        self.m = self.b.shape[0]
        self.N = self.A.shape[1]
        self.AT = self.A.T.tocsr()
        self._indptr, self._indices, self._data = self.A.indptr, self.A.indices, self.A.data
        self.iteration_limit = iteration_limit
        self.iterations = 0
        self._lu = None
        self._art = np.zeros(self.N, dtype=bool)
        self._xfree = np.zeros(self.N)  # value of AT_ZERO nonbasics
        self.basis = self.slack_basis()

    def _column(self, j):
        col = np.zeros(self.m)
        a, b = self._indptr[j], self._indptr[j + 1]
        col[self._indices[a:b]] = self._data[a:b]
        return col

    def _columns_times(self, cols, vals):
        """``A[:, cols] @ vals`` without slicing the sparse matrix."""
        out = np.zeros(self.m)
        for j, v in zip(cols, vals):
            a, b = self._indptr[j], self._indptr[j + 1]
            out[self._indices[a:b]] += v * self._data[a:b]
        return out

    # ------------------------------------------------------------------ setup
    def slack_basis(self) -> Basis:
        head = np.arange(self.n, self.N)
        state = np.full(self.N, AT_LOWER, dtype=np.int8)
        state[head] = BASIC
        return Basis(head, state)

    def set_bounds(self, lb, ub):
        self.l[: self.n] = lb
        self.u[: self.n] = ub

    def set_basis(self, basis: Basis):
        self.basis = basis.copy()
        self._lu = None

    def _place_nonbasic(self, d=None):
        """Put each nonbasic column at the bound that suits its reduced cost."""
        st = self.basis.state
        nb = st != BASIC
        l, u = self.l, self.u
        if d is None:
            d = self.c
        fin_l, fin_u = np.isfinite(l), np.isfinite(u)
        up = nb & (l != u) & ((d < 0) | (~fin_l & fin_u & (d == 0)))
        lo = nb & ~up
        st[up] = AT_UPPER
        st[lo] = AT_LOWER
        self._art[:] = (up & ~fin_u) | (lo & ~fin_l)

    def _keep_states_valid(self):
        """After bound changes keep each nonbasic at a finite bound."""
        st = self.basis.state
        fin_l, fin_u = np.isfinite(self.l), np.isfinite(self.u)
        bad_lo = (st == AT_LOWER) & ~fin_l & ~self._art
        bad_up = (st == AT_UPPER) & ~fin_u & ~self._art
        st[bad_lo] = np.where(fin_u[bad_lo], AT_UPPER, AT_ZERO)
        st[bad_up] = np.where(fin_l[bad_up], AT_LOWER, AT_ZERO)

    def _nonbasic_values(self):
        st = self.basis.state
        x = np.zeros(self.N)
        lo = np.where(np.isfinite(self.l), self.l, -ART_BOUND)
        hi = np.where(np.isfinite(self.u), self.u, ART_BOUND)
        x[st == AT_LOWER] = lo[st == AT_LOWER]
        x[st == AT_UPPER] = hi[st == AT_UPPER]
        z = st == AT_ZERO
        x[z] = np.clip(self._xfree[z], self.l[z], self.u[z])
        return x

    def _factor(self):
        head = self.basis.head
        B = self.A[:, head].tocsc()
        try:
            self._lu = _LU(B)
        except NumericError:
            self._repair()
            self._lu = _LU(self.A[:, self.basis.head].tocsc())

    def _repair(self):
        """Swap dependent basic columns for slacks of uncovered rows."""
        head = self.basis.head
        B = self.A[:, head].toarray()
        _, R, piv = la.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(R))
        tol = max(B.shape) * np.finfo(float).eps * (diag[0] if diag.size else 1.0) * 1e3
        rank = int(np.sum(diag > tol))
        keep = head[piv[:rank]]
        # rows covered: choose slacks for rows not spanned, by row-pivoted LU of kept columns
        K = self.A[:, keep].toarray()
        _, _, rpiv = la.qr(K.T, pivoting=True, mode="economic") if rank else (None, None, np.arange(self.m))
        covered = set(rpiv[:rank].tolist()) if rank else set()
        fill = [self.n + i for i in range(self.m) if i not in covered][: self.m - rank]
        dropped = head[piv[rank:]]
        new_head = np.r_[keep, np.array(fill, dtype=int)]
        st = self.basis.state
        for j in dropped:
            st[j] = AT_LOWER if np.isfinite(self.l[j]) else (AT_UPPER if np.isfinite(self.u[j]) else AT_ZERO)
        st[new_head] = BASIC
        self.basis.head = new_head

    def _recompute(self):
        """Fresh factorisation, primal basic values and reduced costs."""
        self._factor()
        xN = self._nonbasic_values()
        rhs = self.b - self.A @ xN
        xB = self._lu.ftran(rhs)
        x = xN
        x[self.basis.head] = xB
        y = self._lu.btran(self.c[self.basis.head])
        d = self.c - self.A.T @ y
        d[self.basis.head] = 0.0
        return x, y, d

    # ------------------------------------------------------------------ dual
    def _dual(self, x, d, deadline_iters, cutoff=None):
        head = self.basis.head
        st = self.basis.state
        l, u = self.l, self.u
        degenerate = 0
        bland = False
        movable = l != u
        has_zero = bool(np.any(st == AT_ZERO))
        while True:
            if self.iterations >= deadline_iters:
                return "limit", x, d
            if cutoff is not None and self.c @ x > cutoff:
                # a dual feasible basis bounds the optimum from below
                return "cutoff", x, d
            xB = x[head]
            lB, uB = l[head], u[head]
            below = lB - xB
            above = xB - uB
            infeas = np.maximum(below, above)
            scale = 1.0 + np.abs(xB)
            cand = infeas > PRIMAL_TOL * scale
            if not cand.any():
                return "optimal", x, d
            if bland:
                r = int(np.flatnonzero(cand)[np.argmin(head[cand])])
            else:
                r = int(np.argmax(np.where(cand, infeas, -1.0)))
            p = head[r]
            to_lower = below[r] > 0
            delta = x[p] - (l[p] if to_lower else u[p])
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self._lu.btran(e)
            alpha_r = self.AT @ rho
            alpha_r[head] = 0.0
            at = -alpha_r if to_lower else alpha_r
            elig = ((st == AT_LOWER) & (at > PIVOT_TOL)) | ((st == AT_UPPER) & (at < -PIVOT_TOL))
            if has_zero:
                elig |= (st == AT_ZERO) & (np.abs(at) > PIVOT_TOL)
            idx = np.flatnonzero(elig & movable)
            if idx.size == 0:
                return "infeasible", x, d
            ratios = np.abs(d[idx]) / np.abs(at[idx])
            q, flips = self._bfrt(idx, ratios, at, abs(delta), bland)
            self.iterations += 1
            # bound flips first
            if flips:
                dx = np.zeros(self.N)
                for j in flips:
                    if st[j] == AT_LOWER:
                        st[j] = AT_UPPER
                        dx[j] = u[j] - l[j]
                    else:
                        st[j] = AT_LOWER
                        dx[j] = l[j] - u[j]
                    x[j] += dx[j]
                x[head] -= self._lu.ftran(self._columns_times(flips, dx[flips]))
                delta = x[p] - (l[p] if to_lower else u[p])
            col = self._lu.ftran(self._column(q))
            arq = col[r]
            if abs(arq) < PIVOT_TOL:
                # unreliable pivot; refactor and retry
                x, _, d = self._recompute()
                head = self.basis.head
                continue
            theta_d = d[q] / alpha_r[q]
            d -= theta_d * alpha_r
            d[p] = -theta_d
            d[q] = 0.0
            theta_p = delta / arq
            x[head] -= theta_p * col
            x[q] += theta_p
            x[p] = l[p] if to_lower else u[p]
            st[p] = AT_LOWER if to_lower else AT_UPPER
            if l[p] == u[p]:
                st[p] = AT_LOWER
            st[q] = BASIC
            head[r] = q
            if abs(theta_d) <= DUAL_TOL:
                degenerate += 1
                if degenerate > 10 * self.m:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self._lu.update(r, col)
            if len(self._lu.etas) >= REFACTOR:
                x, _, d = self._recompute()
                head = self.basis.head
                # dual feasibility may drift; snap tiny wrong-sign values
                d = self._clean_duals(d)

    def _bfrt(self, idx, ratios, at, slope, bland):
        """Bound-flipping ratio test: returns (entering, columns to flip)."""
        if not bland:
            # fast path: the first breakpoint already ends the search
            tmin = ratios.min()
            ties = ratios <= tmin + 1e-12
            cols = idx[ties]
            widths = self.u[cols] - self.l[cols]
            if cols.size == idx.size or not np.all(np.isfinite(widths)) or (
                    slope - np.sum(np.abs(at[cols]) * widths) <= 0):
                return int(cols[np.argmax(np.abs(at[cols]))]), []
        order = np.lexsort((idx, ratios)) if bland else np.lexsort((-np.abs(at[idx]), ratios))
        flips = []
        l, u = self.l, self.u
        k = 0
        while k < order.size:
            # group of (near) ties
            t0 = ratios[order[k]]
            grp = [order[k]]
            k2 = k + 1
            while k2 < order.size and ratios[order[k2]] <= t0 + 1e-12:
                grp.append(order[k2])
                k2 += 1
            cols = idx[grp]
            widths = u[cols] - l[cols]
            drop = np.sum(np.abs(at[cols]) * widths)
            if np.all(np.isfinite(widths)) and slope - drop > 0 and k2 < order.size:
                slope -= drop
                flips.extend(cols.tolist())
                k = k2
                continue
            if bland:
                best = int(cols.min())
            else:
                best = int(cols[np.argmax(np.abs(at[cols]))])
            return best, flips
        j = int(idx[order[-1]])
        return j, [c for c in flips if c != j]

    def _clean_duals(self, d):
        st = self.basis.state
        bad_lo = (st == AT_LOWER) & (d < 0) & (d > -1e-7)
        bad_hi = (st == AT_UPPER) & (d > 0) & (d < 1e-7)
        d = d.copy()
        d[bad_lo | bad_hi] = 0.0
        return d

    # ---------------------------------------------------------------- primal
    def _primal(self, x, d, deadline_iters):
        head = self.basis.head
        st = self.basis.state
        l, u = self.l, self.u
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= deadline_iters:
                return "limit", x, d
            nb = st != BASIC
            fixed = l == u
            inc = nb & ~fixed & (((st == AT_LOWER) | (st == AT_ZERO)) & (d < -DUAL_TOL))
            dec = nb & ~fixed & (((st == AT_UPPER) | (st == AT_ZERO)) & (d > DUAL_TOL))
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return "optimal", x, d
            q = int(cand.min()) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self._lu.ftran(self._column(q))
            # x_B moves by -direction * col * t
            mv = -direction * col
            xB = x[head]
            lB, uB = l[head], u[head]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_up = np.where(mv > PIVOT_TOL, (uB - xB) / mv, np.inf)
                t_dn = np.where(mv < -PIVOT_TOL, (lB - xB) / mv, np.inf)
            t_rows = np.maximum(np.minimum(t_up, t_dn), 0.0)
            own = (u[q] - x[q]) if direction > 0 else (x[q] - l[q])
            r = int(np.argmin(t_rows)) if t_rows.size else -1
            t_row = t_rows[r] if r >= 0 else np.inf
            if bland and r >= 0 and np.isfinite(t_row):
                ties = np.flatnonzero(t_rows <= t_row + 1e-12)
                r = int(ties[np.argmin(head[ties])])
                t_row = t_rows[r]
            if not np.isfinite(min(t_row, own)):
                return "unbounded", x, d
            self.iterations += 1
            if own <= t_row:
                # bound flip of the entering column, no basis change
                x[head] += mv * own
                x[q] = u[q] if direction > 0 else l[q]
                st[q] = AT_UPPER if direction > 0 else AT_LOWER
                continue
            t = t_row
            x[head] += mv * t
            x[q] += direction * t
            p = head[r]
            leave_upper = mv[r] > 0
            x[p] = u[p] if leave_upper else l[p]
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self._lu.btran(e)
            alpha_r = self.AT @ rho
            alpha_r[head] = 0.0
            theta_d = d[q] / alpha_r[q]
            d -= theta_d * alpha_r
            d[p] = -theta_d
            d[q] = 0.0
            st[p] = AT_UPPER if leave_upper else AT_LOWER
            if l[p] == u[p]:
                st[p] = AT_LOWER
            st[q] = BASIC
            head[r] = q
            self._art[q] = False
            if t <= PRIMAL_TOL:
                degenerate += 1
                if degenerate > 10 * self.m:
                    bland = True
            else:
                degenerate = 0
                bland = False
            self._lu.update(r, col)
            if len(self._lu.etas) >= REFACTOR:
                x, _, d = self._recompute()
                head = self.basis.head

    # ------------------------------------------------------------------ solve
    def solve(self, warm: bool = True, cutoff: float | None = None) -> LpResult:
        """Dual phase from the current (or slack) basis, then primal cleanup.

        With ``cutoff`` set, stops with status ``cutoff`` once the dual
        bound exceeds it (used to prune branch-and-bound nodes early).
        """
        start = self.iterations
        limit = start + self.iteration_limit
        if not warm:
            self.basis = self.slack_basis()
        self._keep_states_valid()
        x, y, d = self._recompute()
        st = self.basis.state
        nb = st != BASIC
        dual_bad = nb & (self.l != self.u) & (
            ((st == AT_LOWER) & (d < -DUAL_TOL)) | ((st == AT_UPPER) & (d > DUAL_TOL))
            | ((st == AT_ZERO) & (np.abs(d) > DUAL_TOL)))
        if dual_bad.any():
            self._place_nonbasic(d)
            x, y, d = self._recompute()
        status, x, d = self._dual(x, d, limit, cutoff)
        if status == "cutoff":
            return LpResult("cutoff", None, float(self.c @ x), self.iterations - start, basis=self.basis.copy())
        if status == "infeasible":
            return self._result("infeasible", start)
        if status == "limit":
            return self._result("limit", start)
        # drop temporary boxes: such columns keep their value as free nonbasics
        if self._art.any():
            for j in np.flatnonzero(self._art & (st != BASIC)):
                self._xfree[j] = x[j]
                st[j] = AT_ZERO
            self._art[:] = False
        elif status == "optimal":
            done = self._finish(x)
            if done is not None:
                return self._result("optimal", start, *done)
        x, y, d = self._recompute()
        status, x, d = self._primal(x, d, limit)
        if status == "optimal":
            # primal drift after many updates: one more dual pass if needed
            x, y, d = self._recompute()
            status, x, d = self._dual(x, d, limit)
            if status == "optimal":
                status, x, d = self._primal(x, d, limit)
        if status != "optimal":
            return self._result(status, start)
        x, y, d = self._recompute()
        return self._result("optimal", start, x, y, d)

    def _finish(self, x):
        """Exact duals from the current factors; None if a cleanup pass is needed."""
        head = self.basis.head
        st = self.basis.state
        y = self._lu.btran(self.c[head])
        d = self.c - self.AT @ y
        d[head] = 0.0
        free = self.l != self.u
        if np.any(free & (((st == AT_LOWER) & (d < -DUAL_TOL)) | ((st == AT_UPPER) & (d > DUAL_TOL))
                          | ((st == AT_ZERO) & (np.abs(d) > DUAL_TOL)))):
            return None
        xB = x[head]
        if np.any(xB < self.l[head] - PRIMAL_TOL * (1 + np.abs(xB))) or np.any(
                xB > self.u[head] + PRIMAL_TOL * (1 + np.abs(xB))):
            return None
        if len(self._lu.etas) > 0:
            # refresh x from a clean solve to shed accumulated update error
            xN = self._nonbasic_values()
            xN[head] = 0.0
            x = xN.copy()
            x[head] = self._lu.ftran(self.b - self.A @ xN)
        return x, y, d

    def _result(self, status, start, x=None, y=None, d=None):
        its = self.iterations - start
        if status != "optimal":
            return LpResult(status, None, np.nan, its, basis=self.basis.copy())
        xs = x[: self.n].copy()
        obj = float(self.c[: self.n] @ xs)
        return LpResult("optimal", xs, obj, its, duals=y.copy(), reduced_costs=d[: self.n].copy(),
                        basis=self.basis.copy())


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
             basis: Basis | None = None, iteration_limit: int = 200_000) -> LpResult:
    """Solve a bounded LP; duals are returned per row (``A_ub`` rows first).

    Statuses: ``optimal``, ``infeasible``, ``unbounded`` or ``limit``.
    """
    engine = Simplex(c, A_ub, b_ub, A_eq, b_eq, lb, ub, iteration_limit=iteration_limit)
    if basis is not None:
        engine.set_basis(basis)
    return engine.solve(warm=basis is not None)
