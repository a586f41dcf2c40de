"""
Feed-forward networks reduced to trees.

Two reductions are offered.

*Unfolding* builds a tree whose servers are the paths of the network ending
at the last server of the flow of interest; a flow is copied once for every
such path that starts at its first server, following the common prefix.
The delay of the copy of the flow of interest bounds the original delay,
but the tree can be exponentially large.

*Splitting* removes arcs until the network is a tree (a breadth-first
in-tree towards the root is kept) and cuts flows at the removed arcs.  The
burst of a segment is the backlog bound of the previous segment, computed by
the program of the sub-tree ending where that segment ends.  Segments
entering through a removed arc ``(j, j')`` are shaped together by the
shaper of ``j``, except the segment whose backlog or delay is being
computed.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .analyzers import sfa_details, tfa_pp_servers
from .curves import INF
from .network.model import Flow, FlowRef, Network, NetworkError, Server
from .plp import (Burst, CutValues, EntryGroup, PlpOptions, Scale, TreeFlow, TreeProblem,
                  auto_scale, plp_delay, solve_tree)

log = logging.getLogger(__name__)

DEFAULT_MAX_UNFOLD_NODES = 10_000

Arc = Tuple[int, int]


class UnfoldTooLarge(NetworkError):
    """The unfolded tree would exceed the node cap."""


def _foi(net: Network, foi: Optional[FlowRef]) -> int:
    return net.default_foi() if foi is None else net.flow_index(foi)


def trim_to(net: Network, root: int) -> Network:
    """Restrict to the servers from which ``root`` is reachable."""
    return net.restrict(net.ancestors(root))


def feedforward_cuts(net: Network, options: PlpOptions) -> Tuple[Dict[int, float], Optional[object]]:
    """Per-server TFA++ bounds and SFA details (or None) of a feed-forward network."""
    server = dict(tfa_pp_servers(net).delays) if "tfa" in options.cuts else {}
    det = sfa_details(net) if "sfa" in options.cuts else None
    return server, det


# unfolding

@dataclass
class UnfoldedNetwork:
    """
    :ivar network: the unfolded tree as a network; server ``k`` stands for
        the path ``paths[k]`` and offers the service of its first server
    :ivar paths: original path of each unfolded server
    :ivar origin: original flow index and original sub-path of each flow
    :ivar foi: index of the copy of the flow of interest
    """
    network: Network
    paths: Dict[int, Tuple[int, ...]]
    origin: List[Tuple[int, Tuple[int, ...]]]
    foi: int

    @property
    def n_nodes(self) -> int:
        return len(self.paths)


def _paths_to(net: Network, root: int, cap: int) -> List[Tuple[int, ...]]:
    out = [(root,)]
    queue = deque(out)
    while queue:
        p = queue.popleft()
        for h in net.predecessors(p[0]):
            q = (h,) + p
            out.append(q)
            if len(out) > cap:
                raise UnfoldTooLarge("unfolding has more than %d nodes; use the split mode "
                                     "or raise the cap" % cap)
            queue.append(q)
    return out


def unfold(net: Network, foi: Optional[FlowRef] = None, max_nodes: int = DEFAULT_MAX_UNFOLD_NODES) -> UnfoldedNetwork:
    """
    Unfold a feed-forward network into a tree rooted at the last server of
    the flow of interest.

    :param max_nodes: abort when the number of paths exceeds this cap
    :rtype: UnfoldedNetwork
    """
    if not net.is_acyclic:
        raise NetworkError("unfolding needs a feed-forward network")
    i0 = _foi(net, foi)
    root = net.flows[i0].last
    sub = trim_to(net, root)
    paths = sorted(_paths_to(sub, root, max_nodes), key=lambda p: (len(p), p))
    node = {p: k for k, p in enumerate(paths)}
    servers = []
    for p, k in node.items():
        s = sub.servers[p[0]]
        servers.append(Server(k, s.service, s.shaper))
    flows, origin = [], []
    foi_copy = None
    orig_index = {f.name: net.flow_index(f.name) for f in sub.flows}
    for p in paths:
        for f in sub.flows:
            if f.first != p[0]:
                continue
            m = 0
            while m < min(len(p), len(f.path)) and p[m] == f.path[m]:
                m += 1
            upath = tuple(node[p[a:]] for a in range(m))
            i = orig_index[f.name]
            if i == i0 and p == f.path:
                foi_copy = len(flows)
            flows.append(Flow("%s@%d" % (f.name, node[p]), f.arrival, upath, f.shaper))
            origin.append((i, f.path[:m]))
    unet = Network(servers, flows, flows[foi_copy].name)
    return UnfoldedNetwork(unet, {k: p for p, k in node.items()}, origin, foi_copy)


def unfold_analyze(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
                   max_nodes: int = DEFAULT_MAX_UNFOLD_NODES) -> float:
    """
    Delay bound of the flow of interest through the unfolded tree.  The cuts
    use the TFA++ and SFA bounds of the original network.
    """
    u = unfold(net, foi, max_nodes)
    server, det = feedforward_cuts(net, options)
    cuts = CutValues()
    if server:
        cuts.server = {k: server[p[0]] for k, p in u.paths.items()}
    if det is not None:
        cuts.flow = {k: det.subpath_delay(i, sp) for k, (i, sp) in enumerate(u.origin)}
    return plp_delay(u.network, u.foi, options, cuts)


# splitting

@dataclass(frozen=True)
class Segment:
    """Segment ``k`` (1-based) of flow ``flow``; ``entry`` is the removed arc it enters by."""
    flow: int
    k: int
    path: Tuple[int, ...]
    entry: Optional[Arc] = None

    @property
    def label(self) -> str:
        return "%d.%d" % (self.flow, self.k)


@dataclass
class SplitNetwork:
    """
    :ivar net: the (trimmed) network that was split
    :ivar removed: removed arcs
    :ivar succ: successor of each server in the remaining tree
    :ivar segments: all flow segments, grouped by flow in path order
    :ivar flows: flows of the original network; ``Segment.flow`` indexes them
    """
    net: Network
    removed: Tuple[Arc, ...]
    succ: Dict[int, Optional[int]]
    segments: List[Segment]
    root: int
    flows: Tuple[Flow, ...] = ()

    def segments_of(self, i: int) -> List[int]:
        return [z for z, s in enumerate(self.segments) if s.flow == i]

    def previous(self, z: int) -> Optional[int]:
        s = self.segments[z]
        if s.k == 1:
            return None
        return z - 1

    @property
    def unknown(self) -> List[int]:
        """Segments whose burst must be computed."""
        return [z for z, s in enumerate(self.segments) if s.k > 1]

    def entry_groups(self) -> Dict[Arc, List[int]]:
        out: Dict[Arc, List[int]] = {}
        for z, s in enumerate(self.segments):
            if s.entry is not None:
                out.setdefault(s.entry, []).append(z)
        return out

    def ancestors(self, j: int) -> List[int]:
        keep = {j}
        changed = True
        while changed:
            changed = False
            for k, h in self.succ.items():
                if h in keep and k not in keep:
                    keep.add(k)
                    changed = True
        return sorted(keep)


def select_feedback_arcs(net: Network, root: Optional[int] = None) -> Tuple[Arc, ...]:
    """
    Arcs outside a breadth-first in-tree towards ``root`` (default: the last
    server of the flow of interest).  Predecessors are visited in increasing
    id order.  Servers that cannot reach ``root`` are ignored.

    >>> from fifonc.network import ring
    >>> select_feedback_arcs(ring(4))
    ((4, 1),)
    """
    if root is None:
        root = net.flows[net.default_foi()].last
    succ = _bfs_tree(net, root)
    return tuple(a for a in net.arcs if a[0] in succ and a[1] in succ and succ[a[0]] != a[1])


def _bfs_tree(net: Network, root: int) -> Dict[int, Optional[int]]:
    succ: Dict[int, Optional[int]] = {root: None}
    queue = deque([root])
    while queue:
        j = queue.popleft()
        for h in net.predecessors(j):
            if h not in succ:
                succ[h] = j
                queue.append(h)
    return succ


def split(net: Network, foi: Optional[FlowRef] = None, removed: Optional[Sequence[Arc]] = None) -> SplitNetwork:
    """
    Trim the network to the servers that reach the last server of the flow of
    interest and cut the flows at the removed arcs.

    :param removed: arcs to remove; default :func:`select_feedback_arcs`.
        The remaining arcs must form an in-tree.
    :rtype: SplitNetwork
    """
    i0 = _foi(net, foi)
    root = net.flows[i0].last
    sub = trim_to(net, root)
    if removed is None:
        succ = _bfs_tree(sub, root)
        removed = tuple(a for a in sub.arcs if succ[a[0]] != a[1])
    else:
        removed = tuple(tuple(a) for a in removed)
        succ = {j: None for j in sub.server_ids}
        for h, j in sub.arcs:
            if (h, j) in removed:
                continue
            if succ[h] is not None:
                raise NetworkError("server %r keeps two successors" % h)
            succ[h] = j
        probe = Network([Server(j, sub.servers[j].service) for j in sub.server_ids],
                        [Flow("a%d" % k, sub.flows[0].arrival, (h, j)) for k, (h, j) in
                         enumerate((h, j) for h, j in succ.items() if j is not None)])
        if not probe.is_acyclic:
            raise NetworkError("the remaining arcs do not form a forest")
    rem = set(removed)
    segments = []
    for f in sub.flows:
        i = net.flow_index(f.name)
        cur = [f.path[0]]
        k, entry = 1, None
        for a, b in zip(f.path, f.path[1:]):
            if (a, b) in rem:
                segments.append(Segment(i, k, tuple(cur), entry))
                k, entry, cur = k + 1, (a, b), [b]
            else:
                cur.append(b)
        segments.append(Segment(i, k, tuple(cur), entry))
    return SplitNetwork(sub, tuple(sorted(removed)), succ, segments, root, tuple(net.flows))


@dataclass
class SplitCuts:
    """Cut constants for split networks: per-server bounds and per-segment bounds."""
    server: Dict[int, float] = field(default_factory=dict)
    segment: Dict[int, float] = field(default_factory=dict)


def split_cuts_from(sp: SplitNetwork, server: Mapping[int, float], det) -> SplitCuts:
    cuts = SplitCuts(dict(server))
    if det is not None:
        cuts.segment = {z: det.subpath_delay(s.flow, s.path) for z, s in enumerate(sp.segments)}
    return cuts


def split_tree(sp: SplitNetwork, bursts: Mapping[int, Burst], scale: Scale,
               cuts: Optional[SplitCuts] = None, exclude: Optional[int] = None) -> TreeProblem:
    """
    Tree problem of a split network.  ``bursts`` maps each segment with
    ``k > 1`` to its burst in bits, or to the name of an LP variable holding
    it in program units.  Segment ``exclude`` is left out of its entry
    shaping group.
    """
    net = sp.net
    cuts = cuts or SplitCuts()
    flows = []
    for z, s in enumerate(sp.segments):
        f = sp.flows[s.flow]
        if s.k == 1:
            b: Burst = f.burst / scale.data
        elif z not in bursts:
            b = -1.0  # placeholder, must not survive the restriction to a sub-tree
        else:
            b = bursts[z]
            if not isinstance(b, str):
                b = b / scale.data
        flows.append(TreeFlow("%s.%d" % (f.name, s.k), b, f.rate, s.path, cuts.segment.get(z, INF)))
    groups = []
    for arc, members in sorted(sp.entry_groups().items()):
        sigma = net.servers[arc[0]].shaper
        members = tuple(z for z in members if z != exclude)
        if sigma is not None and members:
            groups.append(EntryGroup(arc[1], sigma, members))
    for z, s in enumerate(sp.segments):
        shaper = sp.flows[s.flow].shaper
        if s.k == 1 and shaper is not None:
            groups.append(EntryGroup(s.path[0], shaper, (z,)))
    return TreeProblem({j: net.servers[j].service for j in sp.succ},
                       {j: net.servers[j].shaper for j in sp.succ},
                       dict(sp.succ), flows, groups, dict(cuts.server))


def segment_subtree(sp: SplitNetwork, z: int, tree: TreeProblem) -> Tuple[TreeProblem, int]:
    """Sub-tree ending at the last server of segment ``z`` and the index of ``z`` in it."""
    end = sp.segments[z].path[-1]
    sub = tree.subtree(end)
    keep = set(sub.nodes)
    k = sum(1 for y in range(z) if any(j in keep for j in sp.segments[y].path))
    for f in sub.flows:
        if not isinstance(f.burst, str) and f.burst < 0:
            raise NetworkError("burst of segment %s is needed before it is known" % f.name)
    return sub, k


def segment_backlog(sp: SplitNetwork, z: int, bursts: Mapping[int, float], options: PlpOptions,
                    scale: Scale, cuts: Optional[SplitCuts] = None) -> float:
    """Backlog bound (bits) of segment ``z`` with the given bursts."""
    tree = split_tree(sp, bursts, scale, cuts, exclude=z)
    sub, k = segment_subtree(sp, z, tree)
    return solve_tree(sub, k, "backlog", options, scale)


def segment_delay(sp: SplitNetwork, z: int, bursts: Mapping[int, float], options: PlpOptions,
                  scale: Scale, cuts: Optional[SplitCuts] = None) -> float:
    """Delay bound (s) of segment ``z`` with the given bursts."""
    tree = split_tree(sp, bursts, scale, cuts, exclude=z)
    sub, k = segment_subtree(sp, z, tree)
    return solve_tree(sub, k, "delay", options, scale)


def propagate_bursts(sp: SplitNetwork, options: PlpOptions, scale: Scale,
                     cuts: Optional[SplitCuts] = None) -> Dict[int, float]:
    """
    Bursts of all segments of a feed-forward split network, processing the
    removed arcs in topological order of their tail.
    """
    order = {j: k for k, j in enumerate(sp.net.topological_order())}
    todo = sorted(sp.unknown, key=lambda z: (order[sp.segments[z].entry[0]], sp.segments[z].entry[1], z))
    bursts: Dict[int, float] = {}
    for z in todo:
        prev = sp.previous(z)
        bursts[z] = segment_backlog(sp, prev, bursts, options, scale, cuts)
        log.debug("segment %s burst %.6g", sp.segments[z].label, bursts[z])
    return bursts


def assemble_delay(sp: SplitNetwork, i: int, bursts: Mapping[int, float], options: PlpOptions,
                   scale: Scale, cuts: Optional[SplitCuts] = None) -> float:
    """Sum of the delay bounds of the segments of flow ``i``."""
    total = 0.0
    for z in sp.segments_of(i):
        total += segment_delay(sp, z, bursts, options, scale, cuts)
        if total == INF:
            break
    return total


def split_analyze(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions()) -> float:
    """
    Delay bound of the flow of interest in a feed-forward network by flow
    splitting.

    :rtype: float
    """
    if not net.is_acyclic:
        raise NetworkError("the network is cyclic; use the cyclic analysis")
    i0 = _foi(net, foi)
    sp = split(net, i0)
    scale = auto_scale(sp.net)
    server, det = feedforward_cuts(net, options)
    cuts = split_cuts_from(sp, server, det)
    bursts = propagate_bursts(sp, options, scale, cuts)
    return assemble_delay(sp, i0, bursts, options, scale, cuts)
