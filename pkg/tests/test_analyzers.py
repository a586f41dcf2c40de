"""TFA, TFA++, SFA and REG on hand-computed cases and random trees."""
import math

import pytest
from hypothesis import given, settings

from fifonc.analyzers import ANALYZERS, reg_bound, sfa, sfa_details, tfa, tfa_pp, tfa_pp_servers
from fifonc.curves import INF, RateLatency, TokenBucket
from fifonc.network import Flow, Network, NetworkError, Server, mesh, ring, toy_tree, two_hop
from strategies import trees


def single(b=1.0, r=1.0, R=4.0, T=1.0):
    return Network([Server(1, RateLatency(R, T))], [Flow("f", TokenBucket(b, r), (1,))])


# hand-computed values on the two-server toy tandem
# server 1: 2 + 2t against 4(t-1)_+  -> 1 + 2/4 = 1.5
# server 2 (plain TFA): f0 leaves with burst 1 + 1.5, plus f2 -> 1 + 3.5/4 = 1.875
# server 2 (TFA++): min(4t, 2.5 + t) + 1 + t peaks at t = 5/6 -> 1 + (1 + 5/6 - 4/6 ... ) = 1 + 11/24

def test_toy_tfa():
    b = tfa(toy_tree())
    assert b.details.delays == {1: 1.5, 2: 1.875}
    assert b.delay == pytest.approx(3.375)


def test_toy_tfa_pp():
    d = tfa_pp_servers(toy_tree()).delays
    assert d[1] == pytest.approx(1.5)
    assert d[2] == pytest.approx(1 + 11 / 24)
    assert tfa_pp(toy_tree()).delay == pytest.approx(2.9583333333)


def test_toy_sfa():
    # residual curves beta_{3, 1.25} twice: 2.5 + 1/3
    assert sfa(toy_tree()).delay == pytest.approx(2.5 + 1 / 3)


def test_toy_reg():
    # server 1: 1 + 2/4, server 2: 1 + 2/4
    assert reg_bound(toy_tree()).delay == pytest.approx(3.0)


@pytest.mark.parametrize("name", sorted(ANALYZERS))
def test_single_server_all_methods_agree(name):
    assert ANALYZERS[name](single()).delay == pytest.approx(1.25)


@pytest.mark.parametrize("name", ["tfa", "tfa++", "sfa", "reg"])
def test_null_flow_zero_latency(name):
    assert ANALYZERS[name](single(b=0.0, r=0.0, T=0.0)).delay == 0.0


def test_unstable_server_gives_inf():
    net = two_hop(3, load=1.5)
    assert tfa(net).delay == INF and tfa_pp(net).delay == INF and sfa(net).delay == INF


def test_sfa_saturated_server_is_finite():
    # residual rate 5 - 3 equals the flow rate 2
    net = Network([Server(1, RateLatency(5, 0))],
                  [Flow("a", TokenBucket(1, 2), (1,)), Flow("b", TokenBucket(1, 3), (1,))], "a")
    assert sfa(net).delay == pytest.approx(1 / 5 + 1 / 2)


def test_sfa_details_subpath():
    det = sfa_details(two_hop(3))
    assert det.subpath_delay(0, (1, 2, 3)) == pytest.approx(sfa(two_hop(3)).delay)


def test_cyclic_input_rejected():
    with pytest.raises(NetworkError):
        tfa(ring(4))
    with pytest.raises(NetworkError):
        sfa(ring(4))


def test_reg_works_on_cycles():
    assert math.isfinite(reg_bound(ring(4)).delay)


def test_mesh_known_values():
    # TFA++ and SFA of the mesh, foi (0, 2, 4, 6, 8), U = 0.5
    assert tfa_pp(mesh()).delay == pytest.approx(0.011570370370, rel=1e-9)
    assert sfa(mesh()).delay == pytest.approx(0.020590333, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(trees())
def test_orderings_on_random_trees(net):
    d_tfa, d_pp, d_sfa = tfa(net).delay, tfa_pp(net).delay, sfa(net).delay
    lat = sum(net.servers[j].latency for j in net.flows[0].path)
    assert d_pp <= d_tfa * (1 + 1e-12) + 1e-12
    assert d_pp >= lat - 1e-12 and d_sfa >= lat - 1e-12


@settings(max_examples=40, deadline=None)
@given(trees(max_servers=1, shapers=False))
def test_sfa_equals_tfa_on_one_server_when_alone(net):
    if len(net.flows) == 1:
        assert sfa(net).delay == pytest.approx(tfa(net).delay)
