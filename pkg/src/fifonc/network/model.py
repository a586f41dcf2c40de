"""Servers, flows and the induced graph of a FIFO network."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from ..curves import RateLatency, TokenBucket


class NetworkError(ValueError):
    """Raised when a network description is invalid."""


@dataclass(frozen=True)
class Server:
    """
    A FIFO server.

    :param id: server identifier
    :type id: int
    :param service: minimal (strict) service curve
    :type service: RateLatency
    :param shaper: maximal service curve of the output link, or None
    :type shaper: TokenBucket
    """
    id: int
    service: RateLatency
    shaper: Optional[TokenBucket] = None

    @property
    def rate(self) -> float:
        return self.service.rate

    @property
    def latency(self) -> float:
        return self.service.latency


@dataclass(frozen=True)
class Flow:
    """
    A flow with a token-bucket arrival curve and a path of servers.

    :param name: unique flow name
    :param arrival: arrival curve at the first server
    :param path: sequence of server ids, without repetition
    :param shaper: optional per-flow shaping curve applied at the source
    """
    name: str
    arrival: TokenBucket
    path: Tuple[int, ...]
    shaper: Optional[TokenBucket] = None

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(j) for j in self.path))

    @property
    def burst(self) -> float:
        return self.arrival.burst

    @property
    def rate(self) -> float:
        return self.arrival.rate

    @property
    def first(self) -> int:
        return self.path[0]

    @property
    def last(self) -> int:
        return self.path[-1]


FlowRef = Union[int, str, Flow]


class Network:
    """
    A FIFO network: servers, flows and the graph induced by the flow paths.

    >>> net = Network([Server(1, RateLatency(5, 1)), Server(2, RateLatency(4, 1))],
    ...               [Flow("f0", TokenBucket(1, 1), (1, 2)), Flow("f1", TokenBucket(1, 1), (1,))])
    >>> net.arcs
    ((1, 2),)
    >>> net.flows_at(1), net.successor(0, 1), net.successor(0, 2)
    ((0, 1), 2, None)
    """

    def __init__(self, servers: Iterable[Server], flows: Iterable[Flow], foi: Optional[str] = None):
        self.servers: Dict[int, Server] = {}
        for s in servers:
            if s.id in self.servers:
                raise NetworkError("duplicate server id %r" % s.id)
            self.servers[s.id] = s
        self.flows: List[Flow] = list(flows)
        names = set()
        for i, f in enumerate(self.flows):
            if f.name in names:
                raise NetworkError("duplicate flow name %r" % f.name)
            names.add(f.name)
            if not f.path:
                raise NetworkError("flow %r has an empty path" % f.name)
            if len(set(f.path)) != len(f.path):
                raise NetworkError("flow %r visits a server twice" % f.name)
            for j in f.path:
                if j not in self.servers:
                    raise NetworkError("flow %r crosses unknown server %r" % (f.name, j))
        self._index = {f.name: i for i, f in enumerate(self.flows)}
        if foi is not None and foi not in self._index:
            raise NetworkError("flow of interest %r is not a flow" % foi)
        self.foi = foi
        self._build()

    def _build(self):
        fl = {j: [] for j in self.servers}
        arcs = {}
        nxt = {}
        for i, f in enumerate(self.flows):
            for k, j in enumerate(f.path):
                fl[j].append(i)
                if k + 1 < len(f.path):
                    arcs.setdefault((j, f.path[k + 1]), []).append(i)
                    nxt[(i, j)] = f.path[k + 1]
        self._fl = {j: tuple(v) for j, v in fl.items()}
        self._arcs = {a: tuple(v) for a, v in sorted(arcs.items())}
        self._next = nxt
        self._succ = {j: [] for j in self.servers}
        self._pred = {j: [] for j in self.servers}
        for h, j in self._arcs:
            self._succ[h].append(j)
            self._pred[j].append(h)
        self._topo = self._toposort()

    def _toposort(self) -> Optional[Tuple[int, ...]]:
        indeg = {j: len(self._pred[j]) for j in self.servers}
        heap = [j for j, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            j = heapq.heappop(heap)
            order.append(j)
            for k in self._succ[j]:
                indeg[k] -= 1
                if indeg[k] == 0:
                    heapq.heappush(heap, k)
        if len(order) != len(self.servers):
            return None
        return tuple(order)

    # queries
    @property
    def server_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(self.servers))

    @property
    def arcs(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(self._arcs)

    def flows_at(self, j: int) -> Tuple[int, ...]:
        """Indices of the flows crossing server ``j``."""
        return self._fl[j]

    def flows_on_arc(self, h: int, j: int) -> Tuple[int, ...]:
        """Indices of the flows crossing ``h`` then ``j``."""
        return self._arcs.get((h, j), ())

    def successor(self, i: int, j: int) -> Optional[int]:
        """Server following ``j`` on the path of flow ``i`` (None at its end)."""
        return self._next.get((i, j))

    def predecessors(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(self._pred[j]))

    def successors(self, j: int) -> Tuple[int, ...]:
        return tuple(sorted(self._succ[j]))

    @property
    def is_acyclic(self) -> bool:
        return self._topo is not None

    def topological_order(self) -> Tuple[int, ...]:
        if self._topo is None:
            raise NetworkError("the network is cyclic")
        return self._topo

    def flow_index(self, ref: FlowRef) -> int:
        if isinstance(ref, Flow):
            ref = ref.name
        if isinstance(ref, str):
            try:
                return self._index[ref]
            except KeyError:
                raise NetworkError("unknown flow %r" % ref) from None
        if isinstance(ref, int) and 0 <= ref < len(self.flows):
            return ref
        raise NetworkError("unknown flow %r" % (ref,))

    def flow(self, ref: FlowRef) -> Flow:
        return self.flows[self.flow_index(ref)]

    def default_foi(self) -> int:
        """Index of the flow of interest: the declared one, else the first flow."""
        if self.foi is not None:
            return self._index[self.foi]
        if not self.flows:
            raise NetworkError("the network has no flow")
        return 0

    def utilization(self, j: int) -> float:
        return sum(self.flows[i].rate for i in self._fl[j]) / self.servers[j].rate

    # trees
    def tree_successor(self, j: int) -> Optional[int]:
        succ = self._succ[j]
        if len(succ) > 1:
            raise NetworkError("server %r has several successors" % j)
        return succ[0] if succ else None

    def sinks(self) -> Tuple[int, ...]:
        return tuple(j for j in sorted(self.servers) if not self._succ[j])

    def ancestors(self, j: int) -> Tuple[int, ...]:
        """Servers from which ``j`` can be reached, ``j`` included."""
        seen = {j}
        stack = [j]
        while stack:
            k = stack.pop()
            for h in self._pred[k]:
                if h not in seen:
                    seen.add(h)
                    stack.append(h)
        return tuple(sorted(seen))

    def restrict(self, keep: Iterable[int]) -> "Network":
        """
        Sub-network on the servers ``keep``.  Each flow is cut to the part of
        its path inside ``keep``, which must be contiguous; flows that do not
        cross ``keep`` are dropped.  The arrival curve is left unchanged, so
        this is only meaningful when the kept part is a prefix of each path.
        """
        keep = set(keep)
        flows = []
        for f in self.flows:
            part = tuple(j for j in f.path if j in keep)
            if not part:
                continue
            flows.append(Flow(f.name, f.arrival, part, f.shaper))
        foi = self.foi if self.foi in {f.name for f in flows} else None
        return Network([self.servers[j] for j in sorted(keep)], flows, foi)

    def with_flows(self, flows: Sequence[Flow], foi: Optional[str] = None) -> "Network":
        return Network(self.servers.values(), flows, foi)

    def __repr__(self):
        return "Network(%d servers, %d flows)" % (len(self.servers), len(self.flows))


@dataclass(frozen=True)
class Classification:
    """
    Topology and stability summary of a network.

    ``kind`` is one of ``tandem``, ``tree``, ``feed-forward``, ``cyclic``.
    """
    kind: str
    locally_stable: bool
    saturated: Tuple[int, ...] = field(default=())
    utilization: Dict[int, float] = field(default_factory=dict)


def classify(net: Network) -> Classification:
    """
    Classify the topology and check local stability (the total rate at each
    server does not exceed its service rate).  Servers loaded at exactly
    their rate are reported in ``saturated``.
    """
    util = {j: net.utilization(j) for j in net.server_ids}
    overloaded = [j for j, u in util.items() if u > 1 + 1e-12]
    saturated = tuple(j for j, u in util.items() if abs(u - 1) <= 1e-12)
    if not net.is_acyclic:
        kind = "cyclic"
    else:
        outdeg = {j: len(net.successors(j)) for j in net.server_ids}
        indeg = {j: len(net.predecessors(j)) for j in net.server_ids}
        n_sinks = sum(1 for d in outdeg.values() if d == 0)
        if all(d <= 1 for d in outdeg.values()) and n_sinks == 1:
            if all(d <= 1 for d in indeg.values()):
                kind = "tandem"
            else:
                kind = "tree"
        else:
            kind = "feed-forward"
    return Classification(kind, not overloaded, saturated, util)


def is_tree(net: Network) -> bool:
    return classify(net).kind in ("tandem", "tree")
