"""Unfolding and splitting of feed-forward networks."""
from functools import lru_cache

import pytest
from hypothesis import given, settings

from fifonc.analyzers import tfa_pp
from fifonc.curves import RateLatency, TokenBucket
from fifonc.network import Flow, Network, NetworkError, Server, mesh, ring, toy_feedforward, toy_tree
from fifonc.feedforward import (UnfoldTooLarge, feedforward_cuts, propagate_bursts, select_feedback_arcs,
                                split, split_analyze, split_cuts_from, split_tree, unfold, unfold_analyze)
from fifonc.plp import PlpOptions, auto_scale, plp_delay
from strategies import feedforward_nets, trees


def path_count_oracle(net, root):
    """Number of paths ending at ``root``, by memoised recursion over predecessors."""
    @lru_cache(maxsize=None)
    def count(j):
        return 1 + sum(count(h) for h in net.predecessors(j))
    return count(root)


def mirrored(net, swap):
    """Same network with server ids exchanged according to ``swap``."""
    m = lambda j: swap.get(j, j)  # noqa: E731
    servers = [Server(m(j), s.service, s.shaper) for j, s in net.servers.items()]
    flows = [Flow(f.name, f.arrival, tuple(m(j) for j in f.path), f.shaper) for f in net.flows]
    return Network(servers, flows, net.foi)


# unfolding

def test_mesh_unfold_size_matches_path_count():
    net = mesh()
    u = unfold(net)
    assert u.n_nodes == path_count_oracle(net, 8) == 31


@settings(max_examples=60, deadline=None)
@given(feedforward_nets())
def test_unfold_size_matches_path_count(net):
    u = unfold(net)
    assert u.n_nodes == path_count_oracle(net, net.flows[0].last)
    assert u.network.is_acyclic
    assert all(len(u.network.successors(k)) <= 1 for k in u.network.server_ids)


def test_toy_feedforward_unfolding():
    u = unfold(toy_feedforward())
    assert sorted(u.paths.values()) == [(0, 1, 3), (0, 2, 3), (1, 3), (2, 3), (3,)]
    copies = [k for k, (i, _) in enumerate(u.origin) if i == 0]
    assert len(copies) == 2
    assert u.origin[u.foi] == (0, (0, 1, 3))


def test_unfold_cap():
    with pytest.raises(UnfoldTooLarge):
        unfold(mesh(), max_nodes=10)


def test_unfold_rejects_cycles():
    with pytest.raises(NetworkError):
        unfold(ring(3))


def test_unfold_symmetric_flows_agree():
    net = toy_feedforward()
    assert unfold_analyze(net, "f0") == pytest.approx(unfold_analyze(net, "f1"), rel=1e-9)


# splitting

def test_toy_feedforward_split():
    sp = split(toy_feedforward())
    assert sp.removed == ((0, 2),)
    assert sp.succ == {3: None, 1: 3, 2: 3, 0: 1}
    labels = {s.label: (s.path, s.entry) for s in sp.segments}
    assert labels == {"0.1": ((0, 1, 3), None), "1.1": ((0,), None), "1.2": ((2, 3), (0, 2))}


def test_feedback_arcs_of_mesh_leave_a_tree():
    net = mesh()
    removed = set(select_feedback_arcs(net))
    kept = [a for a in net.arcs if a not in removed]
    tails = [a[0] for a in kept]
    assert len(tails) == len(set(tails))


@settings(max_examples=60, deadline=None)
@given(feedforward_nets())
def test_segments_concatenate_to_paths(net):
    sp = split(net)
    rem = set(sp.removed)
    for i, f in enumerate(sp.net.flows):
        segs = [sp.segments[z] for z in sp.segments_of(net.flow_index(f.name))]
        assert sum((s.path for s in segs), ()) == f.path
        assert [s.k for s in segs] == list(range(1, len(segs) + 1))
        for a, b in zip(segs, segs[1:]):
            assert b.entry == (a.path[-1], b.path[0]) and b.entry in rem
        for s in segs:
            assert all(sp.succ[x] == y for x, y in zip(s.path, s.path[1:]))


def test_segment_left_out_of_its_own_entry_group():
    net = mesh(eta=2)
    sp = split(net)
    scale = auto_scale(net)
    bursts = {z: 0.0 for z in sp.unknown}
    for z in sp.unknown:
        tree = split_tree(sp, bursts, scale, exclude=z)
        entry = [g for g in tree.entry_groups if g.node == sp.segments[z].path[0]]
        assert all(z not in g.flows for g in entry)
    full = split_tree(sp, bursts, scale)
    grouped = {z for g in full.entry_groups for z in g.flows}
    assert set(sp.unknown) <= grouped


def test_manual_removal_must_leave_a_forest():
    with pytest.raises(NetworkError, match="two successors"):
        split(toy_feedforward(), removed=[])


def test_split_with_explicit_arcs():
    net = toy_feedforward()
    sp = split(net, removed=[(0, 1)])
    assert sp.succ[0] == 2
    assert [s.label for s in sp.segments if s.flow == 0] == ["0.1", "0.2"]


def test_split_mirror_symmetry():
    """Exchanging servers 1 and 2 turns the analysis of f1 into that of f0."""
    net = toy_feedforward()
    assert split_analyze(mirrored(net, {1: 2, 2: 1}), "f1") == pytest.approx(split_analyze(net, "f0"), rel=1e-9)


def test_bursts_propagate_in_topological_order():
    net = mesh()
    sp = split(net)
    opts = PlpOptions()
    server, det = feedforward_cuts(net, opts)
    bursts = propagate_bursts(sp, opts, auto_scale(net), split_cuts_from(sp, server, det))
    assert set(bursts) == set(sp.unknown)
    for z, b in bursts.items():
        f = net.flows[sp.segments[z].flow]
        assert b >= f.burst


# both modes on trees reduce to the tree program

@settings(max_examples=30, deadline=None)
@given(trees(max_servers=4, max_flows=4))
def test_tree_identity(net):
    d = plp_delay(net)
    assert unfold_analyze(net) == pytest.approx(d, rel=1e-7, abs=1e-12)
    assert split_analyze(net) == pytest.approx(d, rel=1e-7, abs=1e-12)


def test_tree_identity_toy():
    d = plp_delay(toy_tree())
    assert unfold_analyze(toy_tree()) == pytest.approx(d)
    assert split_analyze(toy_tree()) == pytest.approx(d)


@settings(max_examples=40, deadline=None)
@given(feedforward_nets())
def test_both_modes_below_tfa_pp(net):
    bound = tfa_pp(net).delay
    assert unfold_analyze(net) <= bound * (1 + 1e-7) + 1e-12
    assert split_analyze(net) <= bound * (1 + 1e-7) + 1e-12


def test_split_rejects_cycles():
    with pytest.raises(NetworkError):
        split_analyze(ring(3))


def test_mesh_split_and_unfold_below_tfa_pp():
    net = mesh()
    assert unfold_analyze(net) <= tfa_pp(net).delay
    assert split_analyze(net) <= tfa_pp(net).delay
