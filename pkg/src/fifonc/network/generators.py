"""
Parametric benchmark networks.

All generators share the same defaults: latency ``T = 1 ms``, flow burst
``b = 1000`` bits and service rate ``R = 10 Mb/s``.  Every server has the
output shaper :math:`\\gamma_{0, \\eta R}`.
"""
from __future__ import annotations

from typing import List

from ..curves import RateLatency, TokenBucket
from .model import Flow, Network, Server

DEFAULT_RATE = 1e7
DEFAULT_LATENCY = 1e-3
DEFAULT_BURST = 1000.0

#: arcs of the nine-server mesh
MESH_ARCS = ((0, 2), (2, 4), (4, 6), (6, 8), (0, 3), (3, 4), (4, 7), (1, 3),
             (3, 5), (5, 7), (7, 8), (1, 2), (2, 5), (5, 6))


def _servers(ids, rate, latency, eta, rates=None) -> List[Server]:
    out = []
    for j in ids:
        r = rates.get(j, rate) if rates else rate
        out.append(Server(j, RateLatency(r, latency), TokenBucket(0.0, eta * r)))
    return out


def two_hop(n: int, load: float = 0.5, eta: float = 1.0, rate: float = DEFAULT_RATE,
            latency: float = DEFAULT_LATENCY, burst: float = DEFAULT_BURST) -> Network:
    """
    Tandem of ``n`` servers crossed by the flow of interest ``foi`` and by one
    interfering flow on each pair of consecutive servers.  Each flow has rate
    ``load * rate / 3``.

    >>> [f.path for f in two_hop(3).flows]
    [(1, 2, 3), (1, 2), (2, 3)]
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    r = load * rate / 3
    flows = [Flow("foi", TokenBucket(burst, r), tuple(range(1, n + 1)))]
    flows += [Flow("f%d" % i, TokenBucket(burst, r), (i, i + 1)) for i in range(1, n)]
    return Network(_servers(range(1, n + 1), rate, latency, eta), flows, "foi")


def source_sink(n: int, load: float = 0.5, eta: float = 1.0, rate: float = DEFAULT_RATE,
                latency: float = DEFAULT_LATENCY, burst: float = DEFAULT_BURST) -> Network:
    """
    Tandem of ``n`` servers with ``2n - 1`` flows: the flow of interest
    crosses everything, the others either start at server 1 or end at
    server ``n``.  Each flow has rate ``load * rate / n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    r = load * rate / n
    flows = [Flow("foi", TokenBucket(burst, r), tuple(range(1, n + 1)))]
    flows += [Flow("s%d" % k, TokenBucket(burst, r), tuple(range(1, k + 1))) for k in range(1, n)]
    flows += [Flow("e%d" % k, TokenBucket(burst, r), tuple(range(k, n + 1))) for k in range(2, n + 1)]
    return Network(_servers(range(1, n + 1), rate, latency, eta), flows, "foi")


def ring(n: int, load: float = 0.5, eta: float = 1.0, rate: float = DEFAULT_RATE,
         latency: float = DEFAULT_LATENCY, burst: float = DEFAULT_BURST) -> Network:
    """
    Ring of ``n`` servers with ``n`` flows of length ``n``; flow ``k`` starts
    at server ``k``.  The flow of interest is the one starting at server 1.
    With ``n = 1`` the ring degenerates to a single server and one flow.

    >>> ring(3).flows[1].path
    (2, 3, 1)
    """
    if n < 1:
        raise ValueError("a ring needs at least one server")
    r = load * rate / n
    flows = []
    for k in range(1, n + 1):
        path = tuple((k - 1 + m) % n + 1 for m in range(n))
        flows.append(Flow("foi" if k == 1 else "f%d" % k, TokenBucket(burst, r), path))
    return Network(_servers(range(1, n + 1), rate, latency, eta), flows, "foi")


def _mesh_paths():
    succ = {}
    for h, j in MESH_ARCS:
        succ.setdefault(h, []).append(j)
    paths = []

    def walk(p):
        if p[-1] == 8:
            paths.append(tuple(p))
            return
        for j in sorted(succ.get(p[-1], ())):
            walk(p + [j])
    for src in (0, 1):
        walk([src])
    return paths


def mesh(load: float = 0.5, eta: float = 1.0, rate: float = DEFAULT_RATE,
         latency: float = DEFAULT_LATENCY, burst: float = DEFAULT_BURST) -> Network:
    """
    Nine-server mesh with one flow per path from server 0 or 1 to server 8
    (16 flows).  Server 8 has twice the rate of the others.  Every server
    other than 8 is crossed by eight flows, each of rate ``load * rate / 8``.
    The flow of interest follows ``0, 2, 4, 6, 8``.
    """
    r = load * rate / 8
    flows = []
    for p in _mesh_paths():
        name = "foi" if p == (0, 2, 4, 6, 8) else "p" + "".join(str(j) for j in p)
        flows.append(Flow(name, TokenBucket(burst, r), p))
    flows.sort(key=lambda f: f.name != "foi")
    servers = _servers(range(9), rate, latency, eta, rates={8: 2 * rate})
    return Network(servers, flows, "foi")


def toy_tree(burst: float = 1.0, rate: float = 1.0, service_rate: float = 4.0,
             latency: float = 1.0) -> Network:
    """
    Two-server tandem used to illustrate the tree program: ``f0`` crosses
    both servers, ``f1`` only server 1 and ``f2`` only server 2.  Server 1 has
    the output shaper :math:`\\gamma_{0, R}`; server 2 has none.

    >>> [f.path for f in toy_tree().flows]
    [(1, 2), (1,), (2,)]
    """
    servers = [Server(1, RateLatency(service_rate, latency), TokenBucket(0.0, service_rate)),
               Server(2, RateLatency(service_rate, latency))]
    flows = [Flow("f%d" % i, TokenBucket(burst, rate), p)
             for i, p in enumerate(((1, 2), (1,), (2,)))]
    return Network(servers, flows, "f0")


def toy_feedforward(load: float = 0.5, eta: float = 1.0, rate: float = DEFAULT_RATE,
                    latency: float = DEFAULT_LATENCY, burst: float = DEFAULT_BURST) -> Network:
    """
    Four-server diamond: ``f0`` follows ``0, 1, 3`` and ``f1`` follows
    ``0, 2, 3``.  Each flow has rate ``load * rate / 2``.
    """
    r = load * rate / 2
    flows = [Flow("f0", TokenBucket(burst, r), (0, 1, 3)),
             Flow("f1", TokenBucket(burst, r), (0, 2, 3))]
    return Network(_servers(range(4), rate, latency, eta), flows, "f0")


GENERATORS = {
    "two-hop": two_hop,
    "source-sink": source_sink,
    "ring": ring,
}


def generate(kind: str, n: int = 0, load: float = 0.5, eta: float = 1.0) -> Network:
    """Build a benchmark network by name (``mesh``, ``toy`` and ``toy-ff`` ignore ``n``)."""
    if kind == "mesh":
        return mesh(load, eta)
    if kind == "toy":
        return toy_tree()
    if kind == "toy-ff":
        return toy_feedforward(load, eta)
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValueError("unknown generator %r" % kind) from None
    return gen(n, load, eta)


def drr_service(rate: float, quantum: float) -> RateLatency:
    """
    Residual service curve of one class in a four-class deficit round robin
    scheduler with equal quanta ``quantum`` (bits): :math:`\\beta_{R/4, 3Q/R}`.
    """
    return RateLatency(rate / 4, 3 * quantum / rate)
