"""
Per-server and per-flow delay bounds for feed-forward FIFO networks.

* :func:`tfa` - total flow analysis, bursts grow by ``r * d_j`` at each hop;
* :func:`tfa_pp` - same, with the output shaping of each link taken into
  account when aggregating the traffic entering a server;
* :func:`sfa` - separated flow analysis through the FIFO residual service
  curves :math:`\\beta_{R_j - \\sum_{k\\ne i} r_k,\\ T_j + \\sum_{k\\ne i} b_k / R_j}`;
* :func:`reg_bound` - per-server bounds summed without burst growth, valid
  when every flow is re-shaped to its arrival curve at each server.

Every analyzer returns ``(delay, details)``; ``INF`` means no bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

from .curves import (INF, TokenBucket, as_concave, h_dev, min_concave, sum_curves)
from .network.model import FlowRef, Network, NetworkError


@dataclass
class ServerDelays:
    """
    Result of a per-server analysis.

    :ivar delays: delay bound of each server
    :ivar bursts: burst of flow ``i`` entering server ``j``, keyed ``(i, j)``
    """
    delays: Dict[int, float]
    bursts: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def path_delay(self, path: Iterable[int]) -> float:
        return sum(self.delays[j] for j in path)


@dataclass
class SfaDetails:
    """
    Per-flow residual service curves of the separated flow analysis.

    ``latency[i, j]`` and ``rate[i, j]`` describe the residual rate-latency
    curve offered to flow ``i`` at server ``j``, ``bursts[i, j]`` is the burst
    of flow ``i`` entering ``j``.
    """
    latency: Dict[Tuple[int, int], float]
    rate: Dict[Tuple[int, int], float]
    bursts: Dict[Tuple[int, int], float]
    flow_rate: Dict[int, float]

    def subpath_delay(self, i: int, path: Sequence[int]) -> float:
        """SFA delay of flow ``i`` across the consecutive servers ``path``."""
        b = self.bursts[i, path[0]]
        lat = sum(self.latency[i, j] for j in path)
        rmin = min(self.rate[i, j] for j in path)
        if math.isinf(b) or math.isinf(lat) or rmin <= 0 or self.flow_rate[i] > rmin * (1 + 1e-12):
            return INF
        return lat + b / rmin


class Bound(NamedTuple):
    delay: float
    details: object


def _foi(net: Network, foi: Optional[FlowRef]) -> int:
    return net.default_foi() if foi is None else net.flow_index(foi)


def _topo(net: Network) -> Tuple[int, ...]:
    if not net.is_acyclic:
        raise NetworkError("this analysis needs a feed-forward network")
    return net.topological_order()


def _grow(b: float, r: float, d: float) -> float:
    if math.isinf(b) or math.isinf(d):
        return INF if (r > 0 or math.isinf(b)) else b
    return b + r * d


def tfa_servers(net: Network) -> ServerDelays:
    """Per-server delay bounds of the total flow analysis."""
    bursts = {(i, f.first): f.burst for i, f in enumerate(net.flows)}
    delays = {}
    for j in _topo(net):
        fl = net.flows_at(j)
        agg = TokenBucket(sum(bursts[i, j] for i in fl), sum(net.flows[i].rate for i in fl))
        d = h_dev(agg, net.servers[j].service)
        delays[j] = d
        for i in fl:
            k = net.successor(i, j)
            if k is not None:
                bursts[i, k] = _grow(bursts[i, j], net.flows[i].rate, d)
    return ServerDelays(delays, bursts)


def tfa(net: Network, foi: Optional[FlowRef] = None) -> Bound:
    """
    Total flow analysis.

    :param net: feed-forward network
    :param foi: flow of interest (index, name or flow); default is the
        network's flow of interest
    :return: end-to-end delay bound of the flow and the per-server bounds
    :rtype: Bound
    """
    i = _foi(net, foi)
    res = tfa_servers(net)
    return Bound(res.path_delay(net.flows[i].path), res)


def _fresh_curve(flow, burst):
    tb = TokenBucket(burst, flow.rate)
    if flow.shaper is None:
        return tb
    return min_concave(tb, flow.shaper)


def tfa_pp_servers(net: Network) -> ServerDelays:
    """Per-server delay bounds of TFA with output shaping (TFA++)."""
    bursts = {(i, f.first): f.burst for i, f in enumerate(net.flows)}
    delays = {}
    for j in _topo(net):
        parts = []
        for h in net.predecessors(j):
            group = [TokenBucket(bursts[i, j], net.flows[i].rate) for i in net.flows_on_arc(h, j)]
            agg = sum_curves(*group)
            shaper = net.servers[h].shaper
            if shaper is not None:
                agg = min_concave(agg, shaper)
            parts.append(agg)
        for i in net.flows_at(j):
            f = net.flows[i]
            if f.first == j:
                parts.append(_fresh_curve(f, bursts[i, j]))
        d = h_dev(sum_curves(*parts), net.servers[j].service)
        delays[j] = d
        for i in net.flows_at(j):
            k = net.successor(i, j)
            if k is not None:
                bursts[i, k] = _grow(bursts[i, j], net.flows[i].rate, d)
    return ServerDelays(delays, bursts)


def tfa_pp(net: Network, foi: Optional[FlowRef] = None) -> Bound:
    """
    TFA++: total flow analysis where the traffic coming from each predecessor
    ``h`` is also bounded by the shaping curve of ``h``.

    :rtype: Bound
    """
    i = _foi(net, foi)
    res = tfa_pp_servers(net)
    return Bound(res.path_delay(net.flows[i].path), res)


def sfa_details(net: Network) -> SfaDetails:
    """Residual service curves and burst propagation of SFA for all flows."""
    bursts = {(i, f.first): f.burst for i, f in enumerate(net.flows)}
    lat, rate = {}, {}
    for j in _topo(net):
        _sfa_server(net, j, bursts, lat, rate, write_bursts=bursts)
    return SfaDetails(lat, rate, bursts, {i: f.rate for i, f in enumerate(net.flows)})


def _sfa_server(net, j, bursts, lat, rate, write_bursts):
    fl = net.flows_at(j)
    srv = net.servers[j]
    total_b = sum(bursts[i, j] for i in fl)
    total_r = sum(net.flows[i].rate for i in fl)
    for i in fl:
        others_b = total_b - bursts[i, j] if math.isfinite(total_b) else _sum_except(bursts, fl, i, j)
        lat[i, j] = srv.latency + (others_b / srv.rate if math.isfinite(srv.rate) else 0.0)
        rate[i, j] = srv.rate - (total_r - net.flows[i].rate)
        k = net.successor(i, j)
        if k is not None:
            write_bursts[i, k] = _grow(bursts[i, j], net.flows[i].rate, lat[i, j])


def _sum_except(bursts, fl, i, j):
    return sum(bursts[k, j] for k in fl if k != i)


def sfa(net: Network, foi: Optional[FlowRef] = None) -> Bound:
    """
    Separated flow analysis with FIFO residual service curves.

    The result is ``INF`` when some residual rate on the path is not
    positive or is below the flow's own rate.

    :rtype: Bound
    """
    i = _foi(net, foi)
    det = sfa_details(net)
    return Bound(det.subpath_delay(i, net.flows[i].path), det)


def reg_servers(net: Network) -> ServerDelays:
    """Per-server bounds ``T_j + sum_i b_i / R_j`` with the initial bursts."""
    delays = {}
    for j in net.server_ids:
        fl = net.flows_at(j)
        agg = TokenBucket(sum(net.flows[i].burst for i in fl), sum(net.flows[i].rate for i in fl))
        delays[j] = h_dev(agg, net.servers[j].service)
    return ServerDelays(delays, {})


def reg_bound(net: Network, foi: Optional[FlowRef] = None) -> Bound:
    """
    Delay bound when per-flow regulators restore the initial arrival curves
    at every server: the sum along the path of the per-server TFA bounds
    computed without burst increase.  Works on any topology.

    :rtype: Bound
    """
    i = _foi(net, foi)
    res = reg_servers(net)
    return Bound(res.path_delay(net.flows[i].path), res)


ANALYZERS = {"tfa": tfa, "tfa++": tfa_pp, "sfa": sfa, "reg": reg_bound}
