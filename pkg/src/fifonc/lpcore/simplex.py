"""
Two-phase revised simplex.

Meant for small and medium programs and as an independent reference for
the HiGHS backend.  Pricing is Dantzig's rule; after ``10 * (rows + cols)``
consecutive degenerate pivots it switches to Bland's rule for the rest of
the solve, which rules out cycling.  Rows and columns are equilibrated
before solving and pivots smaller than ``1e-9`` are rejected.

The basis is held as a sparse LU factorisation with eta updates.  A
program can also be solved through its dual, in which case the primal
point is read off the simplex multipliers of the dual.
"""
from __future__ import annotations

import math
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .model import INF, LinearProgram, SolveOutcome

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
REFACTOR_EVERY = 64
#: consecutive degenerate pivots, per row and column, before Bland's rule
DEGENERATE_FACTOR = 10


class _Standard:
    """``min c x  s.t.  A x = b, x >= 0`` built from a LinearProgram."""

    def __init__(self, lp: LinearProgram):
        n0 = lp.n_vars
        cols = []       # per original var: list of (std column, sign)
        offset = np.zeros(n0)
        ncol = 0
        extra_rows = []  # (std col, bound)
        for k in range(n0):
            lo, hi = lp.lower[k], lp.upper[k]
            if math.isfinite(lo):
                cols.append([(ncol, 1.0)])
                offset[k] = lo
                if math.isfinite(hi):
                    extra_rows.append((ncol, hi - lo))
                ncol += 1
            elif math.isfinite(hi):
                cols.append([(ncol, -1.0)])
                offset[k] = hi
                ncol += 1
            else:
                cols.append([(ncol, 1.0), (ncol + 1, -1.0)])
                ncol += 2
        n_struct = ncol
        ri, ci, vv, b, slack_of = [], [], [], [], []
        sc = n_struct
        senses = [r.sense for r in lp.rows] + ["<="] * len(extra_rows)
        n_slack = sum(1 for s in senses if s != "=")
        for i, r in enumerate(lp.rows):
            rhs = r.rhs
            for k, a in r.coeffs.items():
                rhs -= a * offset[k]
                for col, sgn in cols[k]:
                    ri.append(i); ci.append(col); vv.append(a * sgn)
            b.append(rhs)
        for col, bound in extra_rows:
            ri.append(len(b)); ci.append(col); vv.append(1.0)
            b.append(bound)
        for i, s in enumerate(senses):
            if s == "=":
                slack_of.append(-1)
                continue
            ri.append(i); ci.append(sc); vv.append(1.0 if s == "<=" else -1.0)
            slack_of.append(sc)
            sc += 1
        m = len(b)
        A = sparse.csr_matrix((vv, (ri, ci)), shape=(m, n_struct + n_slack))
        b = np.asarray(b, dtype=float)
        c = np.zeros(A.shape[1])
        sign = -1.0 if lp.sense == "max" else 1.0
        for k, v in lp.objective.items():
            for col, sgn in cols[k]:
                c[col] += sign * v * sgn
        # equilibrate rows then columns
        rmax = abs(A).max(axis=1).toarray().ravel() if m else np.zeros(0)
        rs = 1.0 / np.where(rmax > 0, rmax, 1.0)
        A = sparse.diags(rs) @ A
        b = b * rs
        cmax = abs(A).max(axis=0).toarray().ravel() if m else np.zeros(A.shape[1])
        cs = 1.0 / np.where(cmax > 0, cmax, 1.0)
        A = A @ sparse.diags(cs)
        c = c * cs
        flip = np.where(b < 0, -1.0, 1.0)
        A = sparse.diags(flip) @ A
        b = b * flip
        self.A, self.b, self.c = sparse.csc_matrix(A), b, c
        self.col_scale = cs
        self.row_factor = rs * flip
        self.cols, self.offset = cols, offset
        self.slack_of = slack_of
        self.flip = flip

    def original_values(self, x: np.ndarray) -> np.ndarray:
        xs = x * self.col_scale
        out = self.offset.copy()
        for k, parts in enumerate(self.cols):
            for col, sgn in parts:
                out[k] += sgn * xs[col]
        return out


class _Simplex:
    """
    Revised simplex on a sparse matrix.  The basis is kept as a sparse LU
    factorisation followed by a file of eta updates, refactored every
    ``REFACTOR_EVERY`` pivots.
    """

    def __init__(self, A, b, max_iter):
        self.A, self.b = sparse.csc_matrix(A), b
        self.AT = sparse.csr_matrix(self.A.T)
        self.m, self.n = A.shape
        self.max_iter = max_iter
        self.iterations = 0
        self.degenerate_run = 0
        self.bland = False
        self.bland_engaged = False

    def column(self, q) -> np.ndarray:
        return self.A[:, q].toarray().ravel()

    def refactor(self):
        B = sparse.csc_matrix(self.A[:, self.basis])
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError:
            raise _Singular() from None
        self.etas = []
        self.xB = self.lu.solve(self.b)
        self.xB[np.abs(self.xB) < 1e-13] = 0.0

    def ftran(self, a: np.ndarray) -> np.ndarray:
        """``B^-1 a``."""
        v = self.lu.solve(a)
        for r, u in self.etas:
            vr = v[r] / u[r]
            v -= vr * u
            v[r] = vr
        return v

    def btran(self, w: np.ndarray) -> np.ndarray:
        """``w' B^-1``."""
        y = w.astype(float).copy()
        for r, u in reversed(self.etas):
            yr = (y[r] - (y @ u - y[r] * u[r])) / u[r]
            y[r] = yr
        return self.lu.solve(y, trans="T")

    def multipliers(self, c) -> np.ndarray:
        return self.btran(c[self.basis])

    def basis_row(self, r: int) -> np.ndarray:
        e = np.zeros(self.m)
        e[r] = 1.0
        return self.btran(e)

    def run(self, c, basis, allowed) -> str:
        self.basis = list(basis)
        self.refactor()
        threshold = DEGENERATE_FACTOR * (self.m + self.n)
        allowed = np.asarray(allowed, dtype=bool)
        while True:
            if self.iterations >= self.max_iter:
                return "iteration limit"
            y = self.multipliers(c)
            d = c - self.AT @ y
            mask = allowed.copy()
            mask[self.basis] = False
            cand = np.flatnonzero(mask & (d < -COST_TOL))
            if cand.size == 0:
                return "optimal"
            if self.bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmin(d[cand])])
            u = self.ftran(self.column(q))
            rows = np.flatnonzero(u > PIVOT_TOL)
            if rows.size == 0:
                return "unbounded"
            ratios = np.maximum(self.xB[rows], 0.0) / u[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
            if self.bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(u[ties])])
            self.pivot(r, q, u, theta)
            self.iterations += 1
            if theta <= 1e-12:
                self.degenerate_run += 1
                if self.degenerate_run > threshold and not self.bland:
                    self.bland = self.bland_engaged = True
            else:
                self.degenerate_run = 0

    def pivot(self, r, q, u, theta):
        self.xB -= theta * u
        self.xB[r] = theta
        self.basis[r] = q
        self.etas.append((r, u))
        if len(self.etas) >= REFACTOR_EVERY:
            self.refactor()
        self.xB[np.abs(self.xB) < 1e-13] = 0.0


class _Singular(Exception):
    pass


class _Run:
    """Outcome of the two phases on a standard form."""

    def __init__(self, status, sx=None, c=None, n=0, message=""):
        self.status, self.sx, self.c, self.n, self.message = status, sx, c, n, message


def _two_phase(std: _Standard, max_iter: Optional[int]) -> _Run:
    try:
        return _phases(std, max_iter)
    except _Singular:
        return _Run("failed", message="singular basis")


def _phases(std: _Standard, max_iter: Optional[int]) -> _Run:
    A, b = std.A, std.b
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    # phase one: slacks with a positive sign start in the basis, the other
    # rows get an artificial column
    basis: List[int] = []
    art_rows = []
    for i in range(m):
        s = std.slack_of[i]
        if s >= 0 and A[i, s] > 0:
            basis.append(s)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_art = len(art_rows)
    art = sparse.csc_matrix((np.ones(n_art), (art_rows, np.arange(n_art))), shape=(m, n_art))
    Afull = sparse.hstack([A, art], format="csc")
    for k, i in enumerate(art_rows):
        basis[i] = n + k
    sx = _Simplex(Afull, b, max_iter)
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        status = sx.run(c1, basis, np.ones(n + n_art, dtype=bool))
        if status != "optimal":
            return _Run("failed", sx, message="phase one: " + status)
        infeas = float(np.sum(sx.xB[[k for k, j in enumerate(sx.basis) if j >= n]]))
        if infeas > 1e-7 * max(1.0, float(np.abs(b).max())):
            return _Run("infeasible", sx, message="phase one optimum %.3g" % infeas)
        # drive remaining artificials out when possible
        for r, j in enumerate(list(sx.basis)):
            if j < n:
                continue
            row = sx.AT[:n] @ sx.basis_row(r)
            inbasis = set(sx.basis)
            nb = [k for k in np.flatnonzero(np.abs(row) > 1e-7) if k not in inbasis]
            if nb:
                q = int(max(nb, key=lambda k: abs(row[k])))
                sx.pivot(r, q, sx.ftran(sx.column(q)), 0.0)
        basis = sx.basis
    c2 = np.concatenate([std.c, np.zeros(n_art)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(n_art, dtype=bool)])
    status = sx.run(c2, basis, allowed)
    return _Run(status, sx, c2, n)


def _info(run: _Run, route: str) -> dict:
    sx = run.sx
    return {"iterations": sx.iterations if sx else 0,
            "bland": float(sx.bland_engaged) if sx else 0.0, "dual": float(route == "dual")}


def _primal(lp: LinearProgram, max_iter: Optional[int]) -> SolveOutcome:
    std = _Standard(lp)
    run = _two_phase(std, max_iter)
    info = _info(run, "primal")
    if run.status == "infeasible":
        return SolveOutcome("infeasible", message=run.message, solver="simplex", info=info)
    if run.status == "unbounded":
        obj = INF if lp.sense == "max" else -INF
        return SolveOutcome("unbounded", obj, solver="simplex", info=info)
    if run.status != "optimal":
        return SolveOutcome("failed", message=run.message or run.status, solver="simplex", info=info)
    sx = run.sx
    x = np.zeros(sx.n)
    x[sx.basis] = sx.xB
    vals = std.original_values(x[:run.n])
    values = dict(zip(lp.names, vals.tolist()))
    return SolveOutcome("optimal", lp.objective_value(values), values, solver="simplex", info=info)


class _Dualised:
    """
    ``min c x, A_ub x <= b_ub, A_eq x = b_eq`` with every variable either
    non-negative or free, obtained from ``lp`` by shifting bounded
    variables and turning upper bounds into rows, together with its dual
    ``max -b_ub u + b_eq v`` s.t. ``c + A_ub' u - A_eq' v >= 0`` (``= 0`` on
    free columns), ``u >= 0``.
    """

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        self.shift = np.zeros(n)
        self.sign = np.ones(n)
        self.free = np.zeros(n, dtype=bool)
        ub, eq = [], []   # (coeffs, rhs) in transformed variables
        for k in range(n):
            lo, hi = lp.lower[k], lp.upper[k]
            if math.isfinite(lo):
                self.shift[k] = lo
                if math.isfinite(hi):
                    ub.append(({k: 1.0}, hi - lo))
            elif math.isfinite(hi):
                self.shift[k], self.sign[k] = hi, -1.0
            else:
                self.free[k] = True
        for r in lp.rows:
            coeffs, rhs = {}, r.rhs
            for k, a in r.coeffs.items():
                rhs -= a * self.shift[k]
                coeffs[k] = a * self.sign[k]
            if r.sense == "=":
                eq.append((coeffs, rhs))
            elif r.sense == "<=":
                ub.append((coeffs, rhs))
            else:
                ub.append(({k: -a for k, a in coeffs.items()}, -rhs))
        osign = -1.0 if lp.sense == "max" else 1.0
        self.c = np.zeros(n)
        for k, v in lp.objective.items():
            self.c[k] = osign * v * self.sign[k]
        self.ub, self.eq = ub, eq

    def columns(self):
        """Per transformed variable, the dual row coefficients."""
        rows = [dict() for _ in range(len(self.c))]
        for r, (coeffs, _) in enumerate(self.ub):
            for k, a in coeffs.items():
                rows[k]["u%d" % r] = rows[k].get("u%d" % r, 0.0) + a
        for r, (coeffs, _) in enumerate(self.eq):
            for k, a in coeffs.items():
                rows[k]["v%d" % r] = rows[k].get("v%d" % r, 0.0) - a
        return rows

    def dual(self) -> LinearProgram:
        d = LinearProgram("dual")
        for r in range(len(self.ub)):
            d.var("u%d" % r)
        for r in range(len(self.eq)):
            d.free("v%d" % r)
        for k, row in enumerate(self.columns()):
            d.add(row, "=" if self.free[k] else ">=", -self.c[k])
        obj = {"u%d" % r: -rhs for r, (_, rhs) in enumerate(self.ub)}
        obj.update({"v%d" % r: rhs for r, (_, rhs) in enumerate(self.eq)})
        d.maximize(obj)
        return d

    def farkas(self) -> LinearProgram:
        """Normalised ray search: positive optimum iff the primal is infeasible."""
        d = LinearProgram("farkas")
        norm = {}
        for r in range(len(self.ub)):
            norm[d.var("u%d" % r)] = 1.0
        for r in range(len(self.eq)):
            norm[d.var("v%dp" % r)] = 1.0
            norm[d.var("v%dm" % r)] = 1.0
        for k, row in enumerate(self.columns()):
            split = {}
            for name, a in row.items():
                if name[0] == "v":
                    split[name + "p"] = a
                    split[name + "m"] = -a
                else:
                    split[name] = a
            d.add(split, "=" if self.free[k] else ">=", 0.0)
        d.add(norm, "<=", 1.0)
        obj = {"u%d" % r: -rhs for r, (_, rhs) in enumerate(self.ub)}
        for r, (_, rhs) in enumerate(self.eq):
            obj["v%dp" % r] = rhs
            obj["v%dm" % r] = -rhs
        d.maximize(obj)
        return d

    def primal_values(self, xt: np.ndarray) -> np.ndarray:
        return self.shift + self.sign * xt


def _dual_route(lp: LinearProgram, max_iter: Optional[int]) -> SolveOutcome:
    dz = _Dualised(lp)
    dlp = dz.dual()
    std = _Standard(dlp)
    run = _two_phase(std, max_iter)
    info = _info(run, "dual")
    unb = INF if lp.sense == "max" else -INF
    if run.status == "unbounded":
        return SolveOutcome("infeasible", message="dual unbounded", solver="simplex", info=info)
    if run.status == "infeasible":
        fk = dz.farkas()
        fout = _primal(fk, max_iter)
        if fout.ok and fout.objective > 1e-9 * max(1.0, _rhs_scale(dz)):
            return SolveOutcome("infeasible", message="Farkas ray found", solver="simplex", info=info)
        return SolveOutcome("unbounded", unb, solver="simplex", info=info)
    if run.status != "optimal":
        return SolveOutcome("failed", message=run.message or run.status, solver="simplex", info=info)
    # the multiplier of dual row k is the transformed primal variable k
    y = run.sx.multipliers(run.c)
    xt = y[:dlp.n_rows] * std.row_factor[:dlp.n_rows]
    vals = dz.primal_values(xt)
    values = dict(zip(lp.names, vals.tolist()))
    return SolveOutcome("optimal", lp.objective_value(values), values, solver="simplex", info=info)


def _rhs_scale(dz: _Dualised) -> float:
    rhs = [abs(r) for _, r in dz.ub] + [abs(r) for _, r in dz.eq]
    return max(rhs, default=1.0)


def simplex_solve(lp: LinearProgram, max_iter: Optional[int] = None,
                  route: str = "primal") -> SolveOutcome:
    """
    Solve ``lp`` with the embedded revised simplex.

    :param lp: program to solve
    :param max_iter: pivot limit (default ``50 * (rows + cols) + 1000``)
    :param route: ``primal`` or ``dual``
    :rtype: SolveOutcome
    """
    if route == "dual":
        return _dual_route(lp, max_iter)
    if route != "primal":
        raise ValueError("route must be primal or dual")
    return _primal(lp, max_iter)
