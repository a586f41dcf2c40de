"""
LP text files.

Two dialects are written: ``lp_solve`` (``max: ...;`` then labelled rows,
then ``free`` declarations) and ``cplex`` (``Maximize`` / ``Subject To`` /
``Bounds`` / ``End``), the latter being what CBC and HiGHS read.  Rows are
grouped by their origin tag with a comment before each group.  Numbers are
printed with ``repr`` so that a round trip is exact.
"""
from __future__ import annotations

import math
import re
from typing import Dict, List

from .model import INF, LinearProgram, LPError


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _terms(lp: LinearProgram, coeffs: Dict[int, float]) -> str:
    if not coeffs:
        return "0"
    out = []
    for k in sorted(coeffs):
        c = coeffs[k]
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else _num(mag) + " "
        out.append("%s%s%s" % (sign, coef, lp.names[k]))
    return " ".join(out)


def _row_name(k: int, name: str) -> str:
    return name or "R%d" % (k + 1)


def _groups(lp: LinearProgram):
    order: List[str] = []
    by: Dict[str, List[int]] = {}
    for k, r in enumerate(lp.rows):
        if r.origin not in by:
            order.append(r.origin)
            by[r.origin] = []
        by[r.origin].append(k)
    return [(o, by[o]) for o in order]


def export_lp_text(lp: LinearProgram, dialect: str = "lp_solve") -> str:
    """
    Serialise ``lp``.

    >>> lp = LinearProgram()
    >>> _ = lp.add({"x": 1}, "<=", 3, origin="cap")
    >>> lp.maximize({"x": 1})
    >>> print(export_lp_text(lp))
    /* objective */
    max: +x;
    <BLANKLINE>
    /* cap */
    R1: +x <= 3;
    <BLANKLINE>

    :param dialect: ``lp_solve`` or ``cplex``
    :rtype: str
    """
    if dialect == "lp_solve":
        return _export_lp_solve(lp)
    if dialect == "cplex":
        return _export_cplex(lp)
    raise LPError("unknown LP dialect %r" % dialect)


def _export_lp_solve(lp: LinearProgram) -> str:
    lines = ["/* objective */", "%s: %s;" % (lp.sense, _terms(lp, lp.objective)), ""]
    for origin, rows in _groups(lp):
        lines.append("/* %s */" % (origin or "constraints"))
        for k in rows:
            r = lp.rows[k]
            lines.append("%s: %s %s %s;" % (_row_name(k, r.name), _terms(lp, r.coeffs), r.sense, _num(r.rhs)))
        lines.append("")
    bounds = []
    free = []
    for k, name in enumerate(lp.names):
        lo, hi = lp.lower[k], lp.upper[k]
        if math.isinf(lo) and math.isinf(hi):
            free.append(name)
            continue
        if math.isinf(lo):
            bounds.append("%s >= -1e30;" % name)
        elif lo != 0:
            bounds.append("%s >= %s;" % (name, _num(lo)))
        if math.isfinite(hi):
            bounds.append("%s <= %s;" % (name, _num(hi)))
    if bounds:
        lines += ["/* bounds */"] + bounds + [""]
    if free:
        lines += ["free %s;" % ", ".join(free), ""]
    return "\n".join(lines)


def _export_cplex(lp: LinearProgram) -> str:
    def terms(coeffs):
        if not coeffs:
            return "0 %s" % lp.names[0] if lp.names else "0"
        return " ".join("%s %s %s" % ("-" if c < 0 else "+", _num(abs(c)), lp.names[k])
                        for k, c in sorted(coeffs.items()))
    lines = ["\\ %s" % lp.name, "Maximize" if lp.sense == "max" else "Minimize",
             " obj: %s" % terms(lp.objective), "Subject To"]
    for origin, rows in _groups(lp):
        lines.append("\\ %s" % (origin or "constraints"))
        for k in rows:
            r = lp.rows[k]
            lines.append(" %s: %s %s %s" % (_row_name(k, r.name), terms(r.coeffs), r.sense, _num(r.rhs)))
    lines.append("Bounds")
    for k, name in enumerate(lp.names):
        lo, hi = lp.lower[k], lp.upper[k]
        if math.isinf(lo) and math.isinf(hi):
            lines.append(" %s free" % name)
        elif math.isinf(lo):
            lines.append(" -inf <= %s <= %s" % (name, _num(hi)))
        elif math.isfinite(hi):
            lines.append(" %s <= %s <= %s" % (_num(lo), name, _num(hi)))
        elif lo != 0:
            lines.append(" %s >= %s" % (name, _num(lo)))
    lines.append("End")
    return "\n".join(lines) + "\n"


_TERM = re.compile(r"([+-])\s*([0-9.eE+-]*[0-9.])?\s*([A-Za-z_][A-Za-z0-9_\[\].]*)")


def _parse_terms(text: str) -> Dict[str, float]:
    text = text.strip()
    if text == "0":
        return {}
    if text and text[0] not in "+-":
        text = "+" + text
    out: Dict[str, float] = {}
    pos = 0
    for m in _TERM.finditer(text):
        if text[pos:m.start()].strip():
            raise LPError("cannot parse %r" % text)
        pos = m.end()
        mag = float(m.group(2)) if m.group(2) else 1.0
        out[m.group(3)] = out.get(m.group(3), 0.0) + (-mag if m.group(1) == "-" else mag)
    if text[pos:].strip():
        raise LPError("cannot parse %r" % text)
    return out


def parse_lp_text(text: str) -> LinearProgram:
    """
    Read back a program written by :func:`export_lp_text` in the
    ``lp_solve`` dialect.  Only that subset of the syntax is supported.
    """
    body = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    stmts = [s.strip() for s in body.split(";") if s.strip()]
    if not stmts:
        raise LPError("empty LP text")
    lp = LinearProgram()
    head = stmts[0]
    m = re.match(r"^(max|min)\s*:(.*)$", head, flags=re.S)
    if not m:
        raise LPError("missing objective")
    sense, obj = m.group(1), _parse_terms(m.group(2))
    pending = []
    bounds = []
    free = []
    for s in stmts[1:]:
        if s.startswith("free "):
            free += [v.strip() for v in s[5:].split(",")]
            continue
        lab = re.match(r"^([A-Za-z_][A-Za-z0-9_\[\].]*)\s*:(.*)$", s, flags=re.S)
        rel = re.match(r"^(.*?)(<=|>=|=)\s*(\S+)$", lab.group(2) if lab else s, flags=re.S)
        if not rel:
            raise LPError("cannot parse statement %r" % s)
        if lab:
            pending.append((lab.group(1), rel.group(1), rel.group(2), float(rel.group(3))))
        else:
            bounds.append((rel.group(1).strip(), rel.group(2), float(rel.group(3))))
    lo: Dict[str, float] = {}
    hi: Dict[str, float] = {}
    for name, sense_b, v in bounds:
        if sense_b == ">=":
            lo[name] = -INF if v <= -1e30 else v
        else:
            hi[name] = v
    declared = set()

    def declare(name):
        if name in declared:
            return
        declared.add(name)
        if name in free:
            lp.free(name)
        else:
            lp.var(name, lo.get(name, 0.0), hi.get(name, INF))
    for name in obj:
        declare(name)
    for _, terms, _, _ in pending:
        for name in _parse_terms(terms):
            declare(name)
    for name in free + list(lo) + list(hi):
        declare(name)
    for label, terms, rsense, rhs in pending:
        name = "" if re.match(r"^R\d+$", label) else label
        lp.add(_parse_terms(terms), rsense, rhs, name=name)
    if sense == "max":
        lp.maximize(obj)
    else:
        lp.minimize(obj)
    return lp
