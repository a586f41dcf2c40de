"""Backends and the common ``solve`` entry point."""
from __future__ import annotations

import logging
import os
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .model import INF, LinearProgram, LPError, SolveOutcome
from .simplex import simplex_solve

log = logging.getLogger(__name__)

#: relative feasibility tolerance used to check returned optima
CHECK_TOL = 1e-6

ENV_SOLVER = "NETCALC_SOLVER"


def highs_solve(lp: LinearProgram) -> SolveOutcome:
    """Solve with the HiGHS dual simplex shipped with SciPy."""
    c, A_ub, b_ub, A_eq, b_eq, bounds = lp.to_arrays()
    kw = {}
    if A_ub.shape[0]:
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if A_eq.shape[0]:
        kw.update(A_eq=A_eq, b_eq=b_eq)
    res = linprog(c, bounds=bounds, method="highs-ds", **kw)
    if res.status == 2:
        return SolveOutcome("infeasible", message=res.message, solver="highs")
    if res.status == 3:
        return SolveOutcome("unbounded", INF if lp.sense == "max" else -INF,
                            message=res.message, solver="highs")
    if res.status != 0:
        return SolveOutcome("failed", message=res.message, solver="highs")
    values = dict(zip(lp.names, np.asarray(res.x, dtype=float).tolist()))
    return SolveOutcome("optimal", lp.objective_value(values), values, solver="highs",
                        info={"iterations": float(getattr(res, "nit", 0))})


def solve(lp: LinearProgram, solver: Optional[str] = None, check: bool = True) -> SolveOutcome:
    """
    Solve a linear program.

    :param lp: the program
    :param solver: ``"highs"`` (default), ``"internal"`` (or ``"simplex"``)
        for the embedded revised simplex, or ``"cmd:TEMPLATE"`` for an external command (see
        :func:`fifonc.lpcore.external.solve_external`).  When None, the
        ``NETCALC_SOLVER`` environment variable is used if set.
    :param check: verify that the returned point satisfies every row
    :rtype: SolveOutcome
    """
    if solver is None:
        solver = os.environ.get(ENV_SOLVER) or "highs"
    if solver == "highs":
        out = highs_solve(lp)
    elif solver in ("internal", "simplex"):
        out = simplex_solve(lp)
    elif solver.startswith("cmd:"):
        from .external import solve_external
        out = solve_external(lp, solver[4:])
    else:
        raise LPError("unknown solver %r" % solver)
    if check and out.ok:
        viol = lp.max_violation(out.values, relative=True)
        if viol > CHECK_TOL:
            log.warning("%s: solution violates constraints by %.3g", lp.name, viol)
            out.info["violation"] = viol
    return out
