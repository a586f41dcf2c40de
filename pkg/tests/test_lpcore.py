"""LP model, embedded simplex, LP text files and the external bridge."""
import itertools
import shutil
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fifonc.lpcore import (ENV_SOLVER, INF, LinearProgram, LPError, export_lp_text, highs_solve,
                           parse_lp_text, parse_solver_output, simplex_solve, solve, solve_external)
from fifonc.lpcore import simplex as simplex_mod
from fifonc.network import two_hop
from fifonc.plp import build_plp

GOLDEN = Path(__file__).parent / "golden"


def _cbc_path():
    found = shutil.which("cbc")
    if found:
        return found
    try:
        import pulp  # noqa: F401
    except ImportError:
        return None
    p = Path(pulp.__file__).parent / "solverdir" / "cbc" / "linux" / "i64" / "cbc"
    return str(p) if p.exists() else None


CBC = _cbc_path()


# model

def test_var_redeclaration_must_agree():
    lp = LinearProgram()
    lp.var("x", 0, 5)
    assert lp.var("x", 0, 5) == "x"
    with pytest.raises(LPError):
        lp.var("x", -1, 5)


def test_add_and_origins():
    lp = LinearProgram()
    lp.add({"x": 1, "y": 2}, "<=", 4, "cap")
    lp.add({"x": 1}, ">=", 1, "cap")
    lp.add({"y": 1}, "=", 1, "fix")
    assert lp.n_vars == 2 and lp.n_rows == 3
    assert lp.origins() == {"cap": 2, "fix": 1}
    with pytest.raises(LPError):
        lp.add({"x": 1}, "<", 1)


def test_merge_renames_except_shared():
    a = LinearProgram()
    a.add({"x": 1, "s": 1}, "<=", 3)
    b = LinearProgram()
    b.var("s")
    ren = b.merge(a, "p_", shared=["s"])
    assert ren == {"x": "p_x", "s": "s"}
    assert set(b.names) == {"s", "p_x"}


def test_max_violation():
    lp = LinearProgram()
    lp.add({"x": 1}, "<=", 1)
    assert lp.max_violation({"x": 3}) == pytest.approx(2)
    assert lp.max_violation({"x": 0.5}) == 0


def test_to_arrays_signs():
    lp = LinearProgram()
    lp.add({"x": 1}, ">=", 2)
    lp.maximize({"x": 3})
    c, A_ub, b_ub, A_eq, b_eq, bounds = lp.to_arrays()
    assert c.tolist() == [-3] and A_ub.toarray().tolist() == [[-1]] and b_ub.tolist() == [-2]


# small LPs against vertex enumeration

@st.composite
def small_lps(draw):
    n = draw(st.integers(1, 3))
    m = draw(st.integers(1, 4))
    lp = LinearProgram("rand")
    names = []
    for k in range(n):
        lo = draw(st.sampled_from([0.0, -5.0, -2.0]))
        hi = draw(st.sampled_from([5.0, 10.0, 3.0]))
        names.append(lp.var("x%d" % k, lo, hi))
    for _ in range(m):
        coeffs = {v: draw(st.integers(-5, 5)) for v in names}
        sense = draw(st.sampled_from(["<=", "<=", ">=", "="]))
        lp.add(coeffs, sense, draw(st.integers(-10, 10)))
    obj = {v: draw(st.integers(-5, 5)) for v in names}
    if draw(st.booleans()):
        lp.maximize(obj)
    else:
        lp.minimize(obj)
    return lp


def vertex_oracle(lp):
    """Best objective over the vertices of a box-bounded LP, or None if infeasible."""
    n = lp.n_vars
    rows = []   # (a, b, is_eq) meaning a x <= b, or = b
    for r in lp.rows:
        a = np.zeros(n)
        for k, v in r.coeffs.items():
            a[k] = v
        if r.sense == "=":
            rows.append((a, r.rhs, True))
        elif r.sense == "<=":
            rows.append((a, r.rhs, False))
        else:
            rows.append((-a, -r.rhs, False))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1
        rows.append((e, lp.upper[k], False))
        rows.append((-e, -lp.lower[k], False))
    c = np.zeros(n)
    for k, v in lp.objective.items():
        c[k] = v
    best = None
    for subset in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[i][0] for i in subset])
        if abs(np.linalg.det(A)) < 1e-9:
            continue
        x = np.linalg.solve(A, np.array([rows[i][1] for i in subset]))
        ok = all((abs(a @ x - b) <= 1e-7) if eq else (a @ x <= b + 1e-7) for a, b, eq in rows)
        if not ok:
            continue
        val = float(c @ x)
        if best is None or (val > best if lp.sense == "max" else val < best):
            best = val
    return best


@settings(max_examples=500, deadline=None)
@given(small_lps())
def test_simplex_matches_vertex_enumeration(lp):
    oracle = vertex_oracle(lp)
    for route in ("primal", "dual"):
        out = simplex_solve(lp, route=route)
        if oracle is None:
            assert out.status == "infeasible", route
        else:
            assert out.status == "optimal", route
            assert out.objective == pytest.approx(oracle, abs=1e-7, rel=1e-7), route
            assert lp.max_violation(out.values) <= 1e-7


def _beale():
    """Beale's cycling example; optimum -1/20 at x4 = 1/25, x6 = 1."""
    lp = LinearProgram("beale")
    lp.add({"x4": 0.25, "x5": -60, "x6": -1 / 25, "x7": 9}, "<=", 0)
    lp.add({"x4": 0.5, "x5": -90, "x6": -1 / 50, "x7": 3}, "<=", 0)
    lp.add({"x6": 1}, "<=", 1)
    lp.minimize({"x4": -0.75, "x5": 150, "x6": -1 / 50, "x7": 6})
    return lp


def _chvatal():
    """Cycling example with Dantzig's rule and largest-coefficient ties; optimum 1."""
    lp = LinearProgram("chvatal")
    lp.add({"x1": 0.5, "x2": -5.5, "x3": -2.5, "x4": 9}, "<=", 0)
    lp.add({"x1": 0.5, "x2": -1.5, "x3": -0.5, "x4": 1}, "<=", 0)
    lp.add({"x1": 1}, "<=", 1)
    lp.maximize({"x1": 10, "x2": -57, "x3": -9, "x4": -24})
    return lp


def test_beale_cycling_example():
    out = simplex_solve(_beale())
    assert out.status == "optimal" and out.objective == pytest.approx(-0.05)
    assert out.values["x4"] == pytest.approx(1 / 25) and out.values["x6"] == pytest.approx(1)
    assert highs_solve(_beale()).objective == pytest.approx(-0.05)


@pytest.mark.parametrize("route", ["primal", "dual"])
def test_chvatal_cycling_example(route):
    out = simplex_solve(_chvatal(), route=route)
    assert out.status == "optimal" and out.objective == pytest.approx(1.0)
    assert highs_solve(_chvatal()).objective == pytest.approx(1.0)


def test_bland_rule_solves_degenerate_program(monkeypatch):
    monkeypatch.setattr(simplex_mod, "DEGENERATE_FACTOR", 0)
    for lp, best in ((_beale(), -0.05), (_chvatal(), 1.0)):
        out = simplex_solve(lp)
        assert out.status == "optimal" and out.objective == pytest.approx(best)
        assert out.info["bland"] == 1.0


@pytest.mark.parametrize("route", ["primal", "dual"])
def test_unbounded(route):
    lp = LinearProgram()
    lp.free("t")
    lp.add({"t": 1, "x": -1}, "<=", 0)
    lp.maximize({"t": 1})
    out = simplex_solve(lp, route=route)
    assert out.status == "unbounded" and out.objective == INF


@pytest.mark.parametrize("route", ["primal", "dual"])
def test_infeasible(route):
    lp = LinearProgram()
    lp.add({"x": 1}, ">=", 3)
    lp.add({"x": 1}, "<=", 1)
    lp.maximize({"x": 1})
    assert simplex_solve(lp, route=route).status == "infeasible"


@pytest.mark.parametrize("route", ["primal", "dual"])
def test_plp_program_matches_highs(route):
    lp = build_plp(two_hop(6)).lp
    a, b = simplex_solve(lp, route=route), highs_solve(lp)
    assert a.objective == pytest.approx(b.objective, rel=1e-9)
    assert lp.max_violation(a.values, relative=True) < 1e-9


def test_solve_dispatch_and_env(monkeypatch):
    lp = _beale()
    assert solve(lp).solver == "highs"
    assert solve(lp, "internal").solver == "simplex"
    monkeypatch.setenv(ENV_SOLVER, "internal")
    assert solve(lp).solver == "simplex"
    with pytest.raises(LPError):
        solve(lp, "glop")


# LP text files

def _single_server_lp():
    from fifonc.curves import RateLatency, TokenBucket
    from fifonc.network import Flow, Network, Server
    net = Network([Server(1, RateLatency(4, 1))], [Flow("f0", TokenBucket(1, 1), (1,))])
    return build_plp(net).lp


def test_single_server_export_golden():
    text = export_lp_text(_single_server_lp())
    assert text == (GOLDEN / "single_server.lp").read_text()


def test_export_groups_by_origin():
    text = export_lp_text(build_plp(two_hop(3)).lp)
    for tag in ("time", "fifo", "service", "arrival", "monotony", "tfa-cut", "sfa-cut", "shaping"):
        assert "/* %s */" % tag in text


@settings(max_examples=100, deadline=None)
@given(small_lps())
def test_export_parse_roundtrip(lp):
    back = parse_lp_text(export_lp_text(lp))
    a, b = highs_solve(lp), highs_solve(back)
    assert a.status == b.status
    if a.ok:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_cplex_dialect_shape():
    text = export_lp_text(_beale(), "cplex")
    assert text.startswith("\\") or text.lower().startswith("minimize")
    assert "subject to" in text.lower() and text.rstrip().lower().endswith("end")


def test_parse_lp_solve_output():
    lp = _beale()
    text = ("\nValue of objective function: -0.05000000\n\nActual values of the variables:\n"
            "x4                           0.04\nx5                              0\n"
            "x6                              1\nx7                              0\n")
    out = parse_solver_output(text, lp)
    assert out.status == "optimal" and out.objective == pytest.approx(-0.05)
    assert out.values["x6"] == 1


def test_parse_infeasible_output():
    assert parse_solver_output("This problem is infeasible", _beale()).status == "infeasible"


def test_external_missing_command_fails():
    out = solve_external(_beale(), "/nonexistent/solver {lp}")
    assert out.status == "failed"


@pytest.mark.skipif(CBC is None, reason="CBC not available")
def test_cbc_bridge_matches_embedded():
    lp = build_plp(two_hop(25)).lp
    ext = solve(lp, "cmd:%s {lp} solve solu {sol}" % CBC)
    emb = simplex_solve(lp)
    assert ext.status == "optimal"
    assert ext.objective == pytest.approx(emb.objective, rel=1e-6)
