"""Solver-neutral linear program container."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

INF = math.inf

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_\[\].]*$")

Coeffs = Union[Mapping[str, float], Iterable[Tuple[str, float]]]


class LPError(RuntimeError):
    """Raised when building or solving a linear program fails."""


@dataclass
class Row:
    coeffs: Dict[int, float]
    sense: str
    rhs: float
    origin: str = ""
    name: str = ""


@dataclass
class SolveOutcome:
    """
    Result of a solve.

    :ivar status: ``optimal``, ``infeasible``, ``unbounded`` or ``failed``
    :ivar objective: optimal value (``INF``/``-INF`` when unbounded)
    :ivar values: value of each variable at the optimum
    """
    status: str
    objective: float = math.nan
    values: Dict[str, float] = field(default_factory=dict)
    message: str = ""
    solver: str = ""
    info: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class LinearProgram:
    """
    A linear program over named variables.

    Variables are non-negative unless declared otherwise; a variable that is
    used before being declared gets the default bounds.  Every constraint
    carries an ``origin`` tag used for grouping in exports.

    >>> lp = LinearProgram()
    >>> lp.add({"x": 1.0, "y": 1.0}, "<=", 4, origin="cap")
    0
    >>> lp.maximize({"x": 3.0, "y": 2.0})
    >>> lp.n_vars, lp.n_rows
    (2, 1)
    """

    SENSES = ("<=", ">=", "=")

    def __init__(self, name: str = "lp"):
        self.name = name
        self._index: Dict[str, int] = {}
        self.names: List[str] = []
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.rows: List[Row] = []
        self.objective: Dict[int, float] = {}
        self.sense = "max"

    # variables
    def var(self, name: str, lower: float = 0.0, upper: float = INF) -> str:
        """Declare a variable (idempotent when the bounds agree)."""
        if name in self._index:
            k = self._index[name]
            if (self.lower[k], self.upper[k]) != (lower, upper):
                raise LPError("variable %r redeclared with other bounds" % name)
            return name
        if not _NAME.match(name):
            raise LPError("invalid variable name %r" % name)
        if lower > upper:
            raise LPError("empty bounds for %r" % name)
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        return name

    def free(self, name: str) -> str:
        return self.var(name, -INF, INF)

    def index(self, name: str) -> int:
        if name not in self._index:
            self.var(name)
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def _coeffs(self, coeffs: Coeffs) -> Dict[int, float]:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        out: Dict[int, float] = {}
        for name, c in items:
            c = float(c)
            if math.isnan(c) or math.isinf(c):
                raise LPError("non-finite coefficient for %r" % name)
            k = self.index(name)
            out[k] = out.get(k, 0.0) + c
        return {k: c for k, c in out.items() if c != 0.0}

    # constraints
    def add(self, coeffs: Coeffs, sense: str, rhs: float, origin: str = "", name: str = "") -> int:
        """Add ``sum coeffs * vars  sense  rhs`` and return its row index."""
        if sense not in self.SENSES:
            raise LPError("unknown sense %r" % sense)
        rhs = float(rhs)
        if math.isnan(rhs) or math.isinf(rhs):
            raise LPError("non-finite right-hand side in %s" % (origin or "constraint"))
        self.rows.append(Row(self._coeffs(coeffs), sense, rhs, origin, name))
        return len(self.rows) - 1

    def maximize(self, coeffs: Coeffs) -> None:
        self.sense = "max"
        self.objective = self._coeffs(coeffs)

    def minimize(self, coeffs: Coeffs) -> None:
        self.sense = "min"
        self.objective = self._coeffs(coeffs)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def origins(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for r in self.rows:
            out[r.origin] = out.get(r.origin, 0) + 1
        return out

    def merge(self, other: "LinearProgram", prefix: str, shared: Iterable[str] = ()) -> Dict[str, str]:
        """
        Copy the variables and rows of ``other`` with prefixed names; the
        variables listed in ``shared`` keep their name and are identified
        with the variables of the same name in this program.
        """
        shared = set(shared)
        ren = {}
        for k, name in enumerate(other.names):
            new = name if name in shared else prefix + name
            ren[name] = self.var(new, other.lower[k], other.upper[k])
        for r in other.rows:
            self.add({ren[other.names[k]]: c for k, c in r.coeffs.items()}, r.sense, r.rhs,
                     r.origin, prefix + r.name if r.name else "")
        return ren

    # evaluation
    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values[self.names[k]] for k, c in self.objective.items())

    def max_violation(self, values: Mapping[str, float], relative: bool = False) -> float:
        """
        Largest violation of a row or bound by ``values``.  With ``relative``
        each row violation is divided by ``max(1, |rhs|, sum |a_k x_k|)``.
        """
        x = np.array([values.get(n, 0.0) for n in self.names], dtype=float)
        worst = 0.0
        for k in range(self.n_vars):
            worst = max(worst, self.lower[k] - x[k], x[k] - self.upper[k])
        for r in self.rows:
            terms = [c * x[k] for k, c in r.coeffs.items()]
            lhs = sum(terms)
            if r.sense == "<=":
                v = lhs - r.rhs
            elif r.sense == ">=":
                v = r.rhs - lhs
            else:
                v = abs(lhs - r.rhs)
            if relative:
                v /= max(1.0, abs(r.rhs), sum(abs(t) for t in terms))
            worst = max(worst, v)
        return worst

    def to_arrays(self):
        """
        Matrices for ``min c x`` form: returns ``c, A_ub, b_ub, A_eq, b_eq,
        bounds`` with ``>=`` rows negated and the objective negated for
        maximisation.
        """
        n = self.n_vars
        c = np.zeros(n)
        sign = -1.0 if self.sense == "max" else 1.0
        for k, v in self.objective.items():
            c[k] = sign * v
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for r in self.rows:
            if r.sense == "=":
                row = len(b_eq)
                for k, v in r.coeffs.items():
                    eq_r.append(row); eq_c.append(k); eq_v.append(v)
                b_eq.append(r.rhs)
            else:
                s = 1.0 if r.sense == "<=" else -1.0
                row = len(b_ub)
                for k, v in r.coeffs.items():
                    ub_r.append(row); ub_c.append(k); ub_v.append(s * v)
                b_ub.append(s * r.rhs)
        A_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n))
        A_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n))
        bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
                  for lo, hi in zip(self.lower, self.upper)]
        return c, A_ub, np.array(b_ub), A_eq, np.array(b_eq), bounds
