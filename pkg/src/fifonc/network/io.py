"""
JSON network description.

A file looks like::

    {"format": 1,
     "servers": [{"id": 1, "rate_bps": 1e7, "latency_s": 0.001,
                  "shaper": {"burst_bits": 0, "rate_bps": 1e7}}],
     "flows": [{"name": "foi", "burst_bits": 1000, "rate_bps": 1e6, "path": [1]}],
     "foi": "foi"}

``shaper`` is optional on servers and flows.  Keys starting with ``_`` are
annotations and are ignored.  Unknown keys are dropped with a warning that
lists them, or raise :class:`NetworkError` when ``strict`` is set.
"""
from __future__ import annotations

import json
import math
import warnings
from typing import Any, Dict, List, Optional

from ..curves import RateLatency, TokenBucket
from .model import Flow, Network, NetworkError, Server

FORMAT_VERSION = 1

_TOP = {"format", "servers", "flows", "foi", "name"}
_SERVER = {"id", "rate_bps", "latency_s", "shaper"}
_FLOW = {"name", "burst_bits", "rate_bps", "path", "shaper"}
_SHAPER = {"burst_bits", "rate_bps"}


def _unknown(d: dict, allowed: set, where: str, sink: List[str]):
    if not isinstance(d, dict):
        raise NetworkError("%s must be an object" % where)
    for k in d:
        if k not in allowed and not str(k).startswith("_"):
            sink.append("%s.%s" % (where, k))


def _num(d: dict, key: str, where: str) -> float:
    if key not in d:
        raise NetworkError("%s: missing %r" % (where, key))
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NetworkError("%s: %r must be a number" % (where, key))
    v = float(v)
    if math.isnan(v) or v < 0 or math.isinf(v):
        raise NetworkError("%s: %r must be finite and non-negative" % (where, key))
    return v


def _shaper(d: Optional[dict], where: str, unknown: List[str]) -> Optional[TokenBucket]:
    if d is None:
        return None
    _unknown(d, _SHAPER, where, unknown)
    return TokenBucket(_num(d, "burst_bits", where), _num(d, "rate_bps", where))


def network_from_dict(data: Dict[str, Any], strict: bool = False) -> Network:
    """
    Build a :class:`Network` from its JSON object.

    :param data: decoded JSON object
    :param strict: raise on unknown keys instead of warning
    :rtype: Network
    """
    unknown: List[str] = []
    _unknown(data, _TOP, "network", unknown)
    if data.get("format") != FORMAT_VERSION:
        raise NetworkError("unsupported format %r (expected %d)" % (data.get("format"), FORMAT_VERSION))
    servers = []
    for k, s in enumerate(data.get("servers") or []):
        where = "servers[%d]" % k
        _unknown(s, _SERVER, where, unknown)
        if not isinstance(s.get("id"), int) or isinstance(s.get("id"), bool):
            raise NetworkError("%s: 'id' must be an integer" % where)
        rate = _num(s, "rate_bps", where)
        if rate <= 0:
            raise NetworkError("%s: 'rate_bps' must be positive" % where)
        servers.append(Server(s["id"], RateLatency(rate, _num(s, "latency_s", where)),
                              _shaper(s.get("shaper"), where + ".shaper", unknown)))
    if not servers:
        raise NetworkError("the network has no server")
    flows = []
    for k, f in enumerate(data.get("flows") or []):
        where = "flows[%d]" % k
        _unknown(f, _FLOW, where, unknown)
        name = f.get("name")
        if not isinstance(name, str) or not name:
            raise NetworkError("%s: 'name' must be a non-empty string" % where)
        path = f.get("path")
        if not isinstance(path, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in path):
            raise NetworkError("%s: 'path' must be a list of server ids" % where)
        flows.append(Flow(name, TokenBucket(_num(f, "burst_bits", where), _num(f, "rate_bps", where)),
                          tuple(path), _shaper(f.get("shaper"), where + ".shaper", unknown)))
    if unknown:
        msg = "unknown fields ignored: " + ", ".join(unknown)
        if strict:
            raise NetworkError(msg)
        warnings.warn(msg, stacklevel=2)
    foi = data.get("foi")
    if foi is not None and not isinstance(foi, str):
        raise NetworkError("'foi' must be a flow name")
    return Network(servers, flows, foi)


def _shaper_dict(tb: Optional[TokenBucket]):
    if tb is None:
        return None
    return {"burst_bits": tb.burst, "rate_bps": tb.rate}


def network_to_dict(net: Network) -> Dict[str, Any]:
    servers = []
    for j in net.server_ids:
        s = net.servers[j]
        d = {"id": j, "rate_bps": s.rate, "latency_s": s.latency}
        if s.shaper is not None:
            d["shaper"] = _shaper_dict(s.shaper)
        servers.append(d)
    flows = []
    for f in net.flows:
        d = {"name": f.name, "burst_bits": f.burst, "rate_bps": f.rate, "path": list(f.path)}
        if f.shaper is not None:
            d["shaper"] = _shaper_dict(f.shaper)
        flows.append(d)
    out = {"format": FORMAT_VERSION, "servers": servers, "flows": flows}
    if net.foi is not None:
        out["foi"] = net.foi
    return out


def load_network(path: str, strict: bool = False) -> Network:
    """Read a network file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkError("%s: invalid JSON (%s)" % (path, exc)) from None
    return network_from_dict(data, strict=strict)


def dump_network(net: Network, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, indent=2)
        fh.write("\n")
