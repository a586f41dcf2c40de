"""
Bridge to an external LP solver run as a subprocess.

The command template may contain ``{lp}`` (path of the exported program)
and ``{sol}`` (path of a solution file).  When ``{sol}`` is present the
solution is read from that file, otherwise from standard output.  Two output
styles are understood:

* lp_solve: ``Value of objective function: X`` followed by
  ``Actual values of the variables:`` and ``name value`` lines;
* CBC solution files: ``Optimal - objective value X`` followed by
  ``index name value reduced_cost`` lines.

Infeasible and unbounded programs are recognised from the status words.
The dialect of the exported file is ``cplex`` when the template mentions
``cbc`` or ``highs`` and ``lp_solve`` otherwise, unless given explicitly.
"""
from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from typing import Dict, Optional

from .lpformat import export_lp_text
from .model import INF, LinearProgram, LPError, SolveOutcome

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf"


def guess_dialect(template: str) -> str:
    low = template.lower()
    return "cplex" if ("cbc" in low or "highs" in low) else "lp_solve"


def parse_solver_output(text: str, lp: LinearProgram) -> SolveOutcome:
    """Turn solver output into a :class:`SolveOutcome`."""
    low = text.lower()
    if "unbounded" in low:
        return SolveOutcome("unbounded", INF if lp.sense == "max" else -INF, solver="external")
    if "infeasible" in low:
        return SolveOutcome("infeasible", solver="external")
    values: Dict[str, float] = {}
    objective: Optional[float] = None
    m = re.search(r"value of objective function:\s*(%s)" % _NUM, text, flags=re.I)
    if m is None:
        m = re.search(r"objective value\s*:?\s*(%s)" % _NUM, text, flags=re.I)
    if m is not None:
        objective = float(m.group(1))
    known = set(lp.names)
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[0] in known:
            values[parts[0]] = float(parts[1])
        elif len(parts) >= 3 and parts[1] in known and re.fullmatch(r"\*{0,2}\d+", parts[0]):
            values[parts[1]] = float(parts[2])
    if objective is None:
        return SolveOutcome("failed", message="no objective value in solver output", solver="external")
    for name in lp.names:
        values.setdefault(name, 0.0)
    if lp.objective and abs(lp.objective_value(values) - objective) > 1e-6 * max(1.0, abs(objective)):
        # solvers print rounded objective values; trust the variables
        objective = lp.objective_value(values)
    return SolveOutcome("optimal", objective, values, solver="external")


def solve_external(lp: LinearProgram, template: str, dialect: Optional[str] = None,
                   timeout: Optional[float] = None) -> SolveOutcome:
    """
    Export ``lp``, run ``template`` and parse the result.

    :param template: command line with ``{lp}`` and optionally ``{sol}``
    :param dialect: LP file dialect, guessed from the command when None
    :rtype: SolveOutcome
    """
    if "{lp}" not in template:
        raise LPError("solver template must contain {lp}")
    dialect = dialect or guess_dialect(template)
    with tempfile.TemporaryDirectory(prefix="fifonc-") as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        with open(lp_path, "w") as fh:
            fh.write(export_lp_text(lp, dialect))
        cmd = template.replace("{lp}", shlex.quote(lp_path)).replace("{sol}", shlex.quote(sol_path))
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return SolveOutcome("failed", message="solver timed out", solver="external")
        if "{sol}" in template:
            if not os.path.exists(sol_path):
                return SolveOutcome("failed", message="no solution file; stderr: %s" % proc.stderr.strip(),
                                    solver="external")
            with open(sol_path) as fh:
                text = fh.read()
        else:
            text = proc.stdout
        if proc.returncode != 0 and not text.strip():
            return SolveOutcome("failed", message="solver exited with %d: %s" % (proc.returncode, proc.stderr.strip()),
                                solver="external")
    return parse_solver_output(text, lp)
