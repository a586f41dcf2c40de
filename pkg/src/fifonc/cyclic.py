"""
Networks with cyclic dependencies.

Bursts inside a cycle depend on themselves, so the analyses are posed as
fixed points:

* :func:`sfa_fixpoint` solves the linear burst recursion of SFA;
* :func:`lp_tfa_fixpoint` encodes TFA++ for all servers at once in one
  linear program whose optimum is the fixed point of the per-server bounds;
* :func:`fixpoint_bursts` splits the flows at feedback arcs and computes the
  largest burst vector ``x`` with ``x <= L(x)``, where ``L_z(x)`` is the
  backlog bound of the segment preceding ``z`` given the bursts ``x``.  All
  the backlog programs share the ``x`` variables and are solved together.
* :func:`kleene_iterate` reaches the same vector by iterating ``L`` from 0
  and serves as a cross-check.

In every case an unbounded program or a diverging iteration means that no
bound was found and is reported as ``INF``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .analyzers import SfaDetails, _grow
from .curves import INF
from .feedforward import (SplitCuts, SplitNetwork, assemble_delay, segment_backlog,
                          segment_subtree, split, split_cuts_from, split_tree)
from .lpcore import LinearProgram, solve
from .network.model import FlowRef, Network, NetworkError
from .plp import PlpInfeasible, PlpOptions, Scale, SolverFailure, auto_scale, build_tree_lp

log = logging.getLogger(__name__)

#: bursts above this many bits are treated as divergence by the iteration
DIVERGENCE_CEILING = 1e12


def _foi(net: Network, foi: Optional[FlowRef]) -> int:
    return net.default_foi() if foi is None else net.flow_index(foi)


# SFA

def sfa_fixpoint(net: Network) -> Optional[SfaDetails]:
    """
    SFA on any topology.  The bursts satisfy
    ``b_i^(k) = b_i^(j) + r_i (T_j + sum_{l != i} b_l^(j) / R_j)`` for
    consecutive servers ``j, k`` of flow ``i``, a linear system ``x = c + Mx``
    with ``M >= 0``; its least non-negative solution exists iff the spectral
    radius of ``M`` is below 1.  Returns None when it does not.
    """
    keys = [(i, j) for i, f in enumerate(net.flows) for j in f.path]
    pos = {k: n for n, k in enumerate(keys)}
    n = len(keys)
    M = np.zeros((n, n))
    c = np.zeros(n)
    for i, f in enumerate(net.flows):
        c[pos[i, f.first]] = f.burst
        for j, k in zip(f.path, f.path[1:]):
            srv = net.servers[j]
            row = pos[i, k]
            M[row, pos[i, j]] += 1.0
            c[row] += f.rate * srv.latency
            for l in net.flows_at(j):
                if l != i:
                    M[row, pos[l, j]] += f.rate / srv.rate
    if n and max(abs(np.linalg.eigvals(M))) >= 1 - 1e-12:
        return None
    x = np.linalg.solve(np.eye(n) - M, c) if n else c
    if np.any(x < -1e-9):
        return None
    bursts = {k: float(max(x[pos[k]], 0.0)) for k in keys}
    lat, rate = {}, {}
    for j in net.server_ids:
        fl = net.flows_at(j)
        srv = net.servers[j]
        tot_r = sum(net.flows[i].rate for i in fl)
        for i in fl:
            lat[i, j] = srv.latency + sum(bursts[l, j] for l in fl if l != i) / srv.rate
            rate[i, j] = srv.rate - (tot_r - net.flows[i].rate)
    return SfaDetails(lat, rate, bursts, {i: f.rate for i, f in enumerate(net.flows)})


def sfa_cyclic(net: Network, foi: Optional[FlowRef] = None) -> float:
    """SFA delay bound of the flow of interest on any topology."""
    i = _foi(net, foi)
    det = sfa_fixpoint(net)
    if det is None:
        return INF
    return det.subpath_delay(i, net.flows[i].path)


# TFA++ as one linear program

@dataclass
class TfaFixpoint:
    """Per-server delays (``INF`` everywhere when unstable)."""
    stable: bool
    delays: Dict[int, float]
    bursts: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def path_delay(self, path) -> float:
        return sum(self.delays[j] for j in path) if self.stable else INF


def build_tfa_lp(net: Network, scale: Optional[Scale] = None) -> LinearProgram:
    """
    Program maximising the sum of the per-server TFA++ delay bounds with the
    bursts propagated along the paths; one block of variables per server
    (start ``s_j`` and end ``t_j`` of the worst backlogged period, delay
    ``d_j``, arrivals and departures of each flow, entering bursts).
    """
    scale = scale or auto_scale(net)
    tu, du = scale.time, scale.data
    lp = LinearProgram("tfa-fixpoint")
    for j in net.server_ids:
        srv = net.servers[j]
        s, t, d = "s%d" % j, "t%d" % j, "d%d" % j
        lp.var(s), lp.var(t), lp.var(d)
        lp.add({s: 1, t: -1}, "<=", 0, "dates")
        fl = net.flows_at(j)
        if not fl:
            # an idle server delays nothing
            lp.add({d: 1, t: -1, s: 1}, "=", 0, "delay")
            lp.add({d: 1}, "=", 0, "delay")
            continue
        for i in fl:
            f = net.flows[i]
            A, D, x = "A%d_%d" % (i, j), "D%d_%d" % (i, j), "x%d_%d" % (i, j)
            lp.add({A: 1, x: -1, s: -f.rate * tu / du}, "<=", 0, "arrival")
            lp.add({A: 1, D: -1}, "=", 0, "fifo")
            if f.first == j:
                lp.add({x: 1}, "=", f.burst / du, "initial-burst")
                if f.shaper is not None:
                    lp.add({A: 1, s: -f.shaper.rate * tu / du}, "<=", f.shaper.burst / du, "shaping")
            else:
                k = f.path[f.path.index(j) - 1]
                lp.add({x: 1, "x%d_%d" % (i, k): -1, "d%d" % k: -f.rate * tu / du}, "=", 0, "propagation")
        for h in net.predecessors(j):
            sigma = net.servers[h].shaper
            if sigma is None:
                continue
            row = {"A%d_%d" % (i, j): 1.0 for i in net.flows_on_arc(h, j)}
            row[s] = -sigma.rate * tu / du
            lp.add(row, "<=", sigma.burst / du, "shaping")
        R = srv.rate * tu / du
        deps = {"D%d_%d" % (i, j): 1.0 for i in fl}
        lp.add(dict(deps, **{t: -R}), ">=", -R * srv.latency / tu, "service")
        if deps:
            lp.add(deps, ">=", 0, "service")
        lp.add({d: 1, t: -1, s: 1}, "=", 0, "delay")
    lp.maximize({"d%d" % j: 1.0 for j in net.server_ids})
    lp.scale = scale
    return lp


def lp_tfa_fixpoint(net: Network, solver: Optional[str] = None) -> TfaFixpoint:
    """
    TFA++ bounds of all servers as the optimum of :func:`build_tfa_lp`.
    Unbounded means no bound is found (``stable`` is False).
    """
    if any(u > 1 + 1e-12 for u in (net.utilization(j) for j in net.server_ids)):
        return TfaFixpoint(False, {j: INF for j in net.server_ids})
    lp = build_tfa_lp(net)
    out = solve(lp, solver)
    if out.status == "unbounded":
        return TfaFixpoint(False, {j: INF for j in net.server_ids})
    if out.status == "infeasible":
        raise PlpInfeasible("TFA++ fixed-point program is infeasible")
    if not out.ok:
        raise SolverFailure("TFA++ fixed-point program: %s" % (out.message or out.status))
    sc = lp.scale
    delays = {j: out.values["d%d" % j] * sc.time for j in net.server_ids}
    bursts = {(i, j): out.values["x%d_%d" % (i, j)] * sc.data
              for j in net.server_ids for i in net.flows_at(j)}
    return TfaFixpoint(True, delays, bursts)


def lp_tfa_delay(net: Network, foi: Optional[FlowRef] = None, solver: Optional[str] = None) -> float:
    i = _foi(net, foi)
    return lp_tfa_fixpoint(net, solver).path_delay(net.flows[i].path)


# split-flow fixed point

@dataclass
class FixpointOutcome:
    """
    :ivar status: ``stable``, ``unstable`` or ``inconclusive``
    :ivar bursts: burst of each segment with ``k > 1``, in bits
    :ivar objective: sum of the bursts
    """
    status: str
    bursts: Dict[int, float] = field(default_factory=dict)
    objective: float = math.nan
    iterations: int = 0
    degenerate: bool = False

    @property
    def stable(self) -> bool:
        return self.status == "stable"


def xname(z: int) -> str:
    return "x%d" % z


@dataclass
class CyclicSetup:
    split: SplitNetwork
    scale: Scale
    cuts: SplitCuts


def prepare(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
            solver: Optional[str] = None) -> CyclicSetup:
    """
    Split the network at the arcs outside a breadth-first in-tree and compute
    the cut constants: TFA++ fixed-point server bounds and SFA fixed-point
    segment bounds (dropped when infinite).
    """
    sp = split(net, foi)
    server: Dict[int, float] = {}
    det = None
    if "tfa" in options.cuts:
        server = dict(lp_tfa_fixpoint(net, solver or options.solver).delays)
    if "sfa" in options.cuts:
        det = sfa_fixpoint(net)
    return CyclicSetup(sp, auto_scale(sp.net), split_cuts_from(sp, server, det))


def build_combined_fixpoint_lp(setup: CyclicSetup, options: PlpOptions) -> LinearProgram:
    """
    One program with a shared burst variable ``x<z>`` per segment ``z`` with
    ``k > 1`` and, for each such ``z``, a renamed copy of the backlog program
    of the segment preceding ``z``.  The constraints ``x_z <= backlog`` link
    them and the objective is the sum of the ``x_z``.
    """
    sp, scale = setup.split, setup.scale
    lp = LinearProgram("fixpoint")
    unknown = sp.unknown
    for z in unknown:
        lp.var(xname(z))
    names = {z: xname(z) for z in unknown}
    for z in unknown:
        prev = sp.previous(z)
        tree = split_tree(sp, names, scale, setup.cuts, exclude=prev)
        sub, k = segment_subtree(sp, prev, tree)
        part = LinearProgram()
        model = build_tree_lp(sub, k, "backlog", options, scale, lp=part)
        shared = [n for n in part.names if n in names.values()]
        ren = lp.merge(part, "z%d_" % z, shared)
        row = {ren[v]: -c for v, c in model.objective_coeffs.items()}
        row[xname(z)] = row.get(xname(z), 0.0) + 1.0
        lp.add(row, "<=", 0, "fixpoint")
    lp.maximize({xname(z): 1.0 for z in unknown})
    return lp


def check_structure(lp: LinearProgram, xs) -> Tuple[bool, bool]:
    """
    (P1) no row holds more than one burst variable apart from the linking
    rows; (P2) in the linking rows the backlog expression does not involve
    burst variables other than the one being bounded.
    """
    xs = set(xs)
    idx = {lp.index(n) for n in xs}
    p1 = p2 = True
    for r in lp.rows:
        inside = [k for k in r.coeffs if k in idx]
        if r.origin == "fixpoint":
            p2 = p2 and len(inside) == 1 and r.coeffs[inside[0]] > 0
        elif len(inside) > 1:
            p1 = False
        elif inside and r.coeffs[inside[0]] > 0 and r.sense == "<=":
            p1 = False
    return p1, p2


def fixpoint_bursts(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
                    setup: Optional[CyclicSetup] = None) -> FixpointOutcome:
    """
    Largest burst vector with ``x <= L(x)``, from one combined program.
    Unbounded means the method cannot prove stability.

    :rtype: FixpointOutcome
    """
    if any(net.utilization(j) > 1 + 1e-12 for j in net.server_ids):
        return FixpointOutcome("unstable")
    setup = setup or prepare(net, foi, options)
    sp = setup.split
    if not sp.unknown:
        return FixpointOutcome("stable", {}, 0.0)
    lp = build_combined_fixpoint_lp(setup, options)
    out = solve(lp, options.solver)
    if out.status == "unbounded":
        return FixpointOutcome("unstable", objective=INF)
    if out.status == "infeasible":
        raise PlpInfeasible("combined fixed-point program is infeasible")
    if not out.ok:
        raise SolverFailure("combined fixed-point program: %s" % (out.message or out.status))
    bursts = {z: out.values[xname(z)] * setup.scale.data for z in sp.unknown}
    degenerate = all(v == 0 for v in bursts.values())
    return FixpointOutcome("stable", bursts, sum(bursts.values()), degenerate=degenerate)


def apply_L(setup: CyclicSetup, bursts: Dict[int, float], options: PlpOptions) -> Dict[int, float]:
    """One evaluation of ``L``: the backlog bound of each predecessor segment."""
    sp = setup.split
    return {z: segment_backlog(sp, sp.previous(z), bursts, options, setup.scale, setup.cuts)
            for z in sp.unknown}


def kleene_iterate(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
                   tol: float = 1e-9, max_iters: int = 10_000,
                   ceiling: float = DIVERGENCE_CEILING, setup: Optional[CyclicSetup] = None) -> FixpointOutcome:
    """
    Iterate ``x <- L(x)`` from ``x = 0`` until the largest relative change is
    below ``tol``.  Divergence (a burst above ``ceiling`` or infinite) gives
    ``unstable``; running out of iterations gives ``inconclusive``.
    """
    if any(net.utilization(j) > 1 + 1e-12 for j in net.server_ids):
        return FixpointOutcome("unstable")
    setup = setup or prepare(net, foi, options)
    x = {z: 0.0 for z in setup.split.unknown}
    for it in range(1, max_iters + 1):
        y = apply_L(setup, x, options)
        if any(not math.isfinite(v) or v > ceiling for v in y.values()):
            return FixpointOutcome("unstable", y, INF, it)
        change = max((abs(y[z] - x[z]) / max(abs(y[z]), 1e-300) for z in y), default=0.0)
        x = y
        if change <= tol:
            return FixpointOutcome("stable", x, sum(x.values()), it,
                                   degenerate=all(v == 0 for v in x.values()))
    return FixpointOutcome("inconclusive", x, sum(x.values()), max_iters)


def cyclic_delay(net: Network, foi: Optional[FlowRef] = None, method: str = "plp-fixpoint",
                 options: PlpOptions = PlpOptions()) -> float:
    """
    Delay bound of the flow of interest.

    :param method: ``plp-fixpoint`` (split flows, combined fixed-point
        program, then the per-segment delay programs), ``lp-tfa`` (TFA++
        fixed-point program) or ``sfa`` (SFA fixed point)
    """
    i = _foi(net, foi)
    if method == "lp-tfa":
        return lp_tfa_delay(net, i, options.solver)
    if method == "sfa":
        return sfa_cyclic(net, i)
    if method != "plp-fixpoint":
        raise ValueError("unknown cyclic method %r" % method)
    setup = prepare(net, i, options)
    fp = fixpoint_bursts(net, i, options, setup)
    if not fp.stable:
        return INF
    return assemble_delay(setup.split, i, fp.bursts, options, setup.scale, setup.cuts)
