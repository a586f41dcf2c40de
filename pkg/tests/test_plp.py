"""Polynomial-size program for trees: structure, goldens and bounds."""
import re
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings

from fifonc.analyzers import sfa, sfa_details, tfa_pp, tfa_pp_servers
from fifonc.curves import INF, RateLatency, TokenBucket
from fifonc.lpcore import highs_solve, simplex_solve
from fifonc.network import Flow, Network, NetworkError, Server, two_hop, toy_tree
from fifonc.plp import (PlpOptions, build_plp, plan_time_indices, plp_backlog, plp_delay)
from strategies import trees

GOLDEN = Path(__file__).parent / "golden"
NO_CUTS = PlpOptions(cuts=frozenset(), shaping=False)

_TERM = re.compile(r"([+-])\s*(\d+(?:\.\d*)?(?:e[+-]?\d+)?)?\s*([A-Za-z_]\w*)?")


def _side(text):
    """Linear expression -> (coefficients, constant)."""
    text = text.strip()
    if text[0] not in "+-":
        text = "+" + text
    coeffs, const, pos = {}, 0.0, 0
    for m in _TERM.finditer(text):
        assert not text[pos:m.start()].strip(), text
        pos = m.end()
        if not m.group(2) and not m.group(3):
            continue
        v = float(m.group(2)) if m.group(2) else 1.0
        v = -v if m.group(1) == "-" else v
        if m.group(3):
            coeffs[m.group(3)] = coeffs.get(m.group(3), 0.0) + v
        else:
            const += v
    assert not text[pos:].strip(), text
    return coeffs, const


def _canon(coeffs, sense, rhs):
    """Rows as hashable ``a x <= b`` or ``a x = b``, normalised by the first coefficient."""
    coeffs = {k: v for k, v in coeffs.items() if v}
    if sense == ">=":
        coeffs, rhs, sense = {k: -v for k, v in coeffs.items()}, -rhs, "<="
    first = coeffs[min(coeffs)]
    scale = abs(first) if sense == "<=" else first
    key = tuple(sorted((k, round(v / scale, 9)) for k, v in coeffs.items()))
    return key, sense, round(rhs / scale, 9)


def golden_rows(text):
    """Parse ``lhs op rhs;`` relations written by hand, grouped by the preceding comment."""
    rows = Counter()
    for stmt in re.sub(r"/\*.*?\*/", "", text, flags=re.S).split(";"):
        stmt = stmt.strip()
        if not stmt or stmt.startswith(("max:", "free")):
            continue
        lhs, op, rhs = re.match(r"(.*?)(<=|>=|=)(.*)", stmt, flags=re.S).groups()
        a, ca = _side(lhs)
        b, cb = _side(rhs)
        coeffs = dict(a)
        for k, v in b.items():
            coeffs[k] = coeffs.get(k, 0.0) - v
        rows[_canon(coeffs, op, cb - ca)] += 1
    return rows


def model_rows(lp, origins=None):
    rows = Counter()
    for r in lp.rows:
        if origins is None or r.origin in origins:
            rows[_canon({lp.names[k]: v for k, v in r.coeffs.items()}, r.sense, r.rhs)] += 1
    return rows


# time index plan

def test_toy_index_plan():
    p = plan_time_indices(toy_tree())
    assert p.root == 2
    assert list(p.rng(2)) == [1, 2] and list(p.rng(1)) == [3, 4, 5]
    assert p.n_dates == 6


def test_tandem_plan_sizes():
    n = 6
    p = plan_time_indices(two_hop(n))
    assert p.n_dates == 1 + sum(d + 1 for d in range(1, n + 1))
    assert p.depth[1] == n and p.depth[n] == 1


def test_plan_rejects_forest():
    net = Network([Server(1, RateLatency(4, 1)), Server(2, RateLatency(4, 1))],
                  [Flow("a", TokenBucket(1, 1), (1,)), Flow("b", TokenBucket(1, 1), (2,))])
    with pytest.raises(NetworkError, match="exactly one root"):
        plan_time_indices(net)


# toy program against the hand-written golden files

def test_toy_program_matches_golden():
    lp = build_plp(toy_tree(), options=NO_CUTS).lp
    assert model_rows(lp) == golden_rows((GOLDEN / "toy_program.lp").read_text())
    assert {lp.names[k]: v for k, v in lp.objective.items()} == {"t0": 1.0, "t3": -1.0}


def test_toy_row_counts():
    lp = build_plp(toy_tree(), options=NO_CUTS).lp
    assert lp.origins() == {"time": 6, "fifo": 6, "service": 4, "arrival": 7, "monotony": 5}


def test_toy_additions_match_golden():
    net = toy_tree()
    tfa_d = tfa_pp_servers(net).delays
    det = sfa_details(net)
    values = {"tfa1": tfa_d[1], "tfa2": tfa_d[2]}
    for i, f in enumerate(net.flows):
        values["sfa%d" % i] = det.subpath_delay(i, f.path)
    text = (GOLDEN / "toy_cuts.lp").read_text()
    for k, v in values.items():
        text = text.replace("{%s}" % k, repr(v))
    lp = build_plp(net).lp
    added = model_rows(lp, {"shaping", "tfa-cut", "sfa-cut"})
    assert added == golden_rows(text)
    assert lp.origins()["shaping"] == 1


def test_toy_cut_constants():
    net = toy_tree()
    assert tfa_pp_servers(net).delays[1] == pytest.approx(1.5)
    assert tfa_pp_servers(net).delays[2] == pytest.approx(1 + 11 / 24)
    det = sfa_details(net)
    assert det.subpath_delay(1, (1,)) == pytest.approx(1.25 + 1 / 3)
    assert det.subpath_delay(2, (2,)) == pytest.approx(1 + 2.25 / 4 + 1 / 3)


def test_toy_bound_without_cuts():
    assert plp_delay(toy_tree(), options=NO_CUTS) == pytest.approx(3.25)
    assert plp_delay(toy_tree(), options=PlpOptions(cuts=frozenset())) == pytest.approx(3.25)


def test_toy_bound_with_cuts():
    d = plp_delay(toy_tree())
    assert d == pytest.approx(2.8125)
    assert d <= tfa_pp(toy_tree()).delay + 1e-9


def test_toy_trajectory_arrival_date():
    """The first date of the flow of interest sits 3.25 before the exit."""
    model = build_plp(toy_tree(), options=NO_CUTS)
    out = highs_solve(model.lp)
    v = out.values
    assert v["t0"] - v["t3"] == pytest.approx(3.25)
    assert v["t0"] >= v["t1"] - 1e-9 >= v["t3"] - 2e-9


def test_both_routes_agree_on_toy():
    lp = build_plp(toy_tree()).lp
    for route in ("primal", "dual"):
        assert simplex_solve(lp, route=route).objective == pytest.approx(2.8125)


# bounds

def test_single_server_equals_closed_form():
    net = Network([Server(1, RateLatency(4, 1))], [Flow("f0", TokenBucket(1, 1), (1,))])
    assert plp_delay(net, options=NO_CUTS) == pytest.approx(1.25)


def test_single_server_backlog():
    net = Network([Server(1, RateLatency(4, 1))], [Flow("f0", TokenBucket(1, 1), (1,))])
    assert plp_backlog(net, options=NO_CUTS) == pytest.approx(2.0)


def test_unstable_network_is_unbounded():
    assert plp_delay(two_hop(3, load=1.2), options=NO_CUTS) == INF


def test_any_flow_of_the_tree_can_be_analysed():
    """A flow leaving before the root is analysed in the subtree rooted at its last server."""
    assert plp_delay(toy_tree(), foi="f1", options=NO_CUTS) == pytest.approx(1.25 + 1 / 4)


def test_cuts_tighten_two_hop():
    net = two_hop(5)
    with_cuts = plp_delay(net)
    assert with_cuts <= plp_delay(net, options=NO_CUTS) + 1e-12
    assert with_cuts <= min(tfa_pp(net).delay, sfa(net).delay) * (1 + 1e-9)


def test_time_scale_invariance():
    base = toy_tree()
    slow = Network([Server(j, RateLatency(s.rate / 10, s.latency * 10),
                           TokenBucket(s.shaper.burst, s.shaper.rate / 10) if s.shaper else None)
                    for j, s in base.servers.items()],
                   [Flow(f.name, TokenBucket(f.burst, f.rate / 10), f.path) for f in base.flows], foi="f0")
    assert plp_delay(slow) == pytest.approx(10 * plp_delay(base), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(trees())
def test_program_below_tfa_pp_and_sfa(net):
    d = plp_delay(net)
    assert d <= min(tfa_pp(net).delay, sfa(net).delay) * (1 + 1e-7) + 1e-12
    assert d >= 0


@settings(max_examples=30, deadline=None)
@given(trees())
def test_cuts_never_loosen(net):
    assert plp_delay(net) <= plp_delay(net, options=NO_CUTS) * (1 + 1e-7) + 1e-12
