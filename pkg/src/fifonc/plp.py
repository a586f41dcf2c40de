"""
Polynomial-size linear program for FIFO tree networks.

The program describes, for a handful of well-chosen dates, the cumulative
arrival and departure processes of every flow at every server of a tree
(each server has at most one successor).  Each server ``j`` at depth
``d(j)`` (the root has depth 1) owns ``d(j) + 1`` consecutive date indices;
index 0 is the date at which the flow of interest leaves the tree.  The
dates of ``j`` are ordered decreasingly and linked by FIFO to the dates of
its successor, the service constraints relate the last date of ``j`` to the
last date of its successor, and arrival curves constrain the processes at
the first server of each flow.  Maximising ``t_0`` minus the entry date of
the flow of interest gives a delay bound.

Optional families tighten the program: per-server delay bounds (``tfa``
cuts), per-flow end-to-end bounds (``sfa`` cuts) and the output shaping of
each server (``shaping``).

Times are divided by ``scale.time`` and amounts of data by ``scale.data``
inside the program to keep coefficients near 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .analyzers import sfa_details, tfa_pp_servers
from .curves import INF, RateLatency, TokenBucket
from .lpcore import LinearProgram, LPError, SolveOutcome, solve
from .network.model import FlowRef, Network, NetworkError

EXIT = "x"

Burst = Union[float, str]


class PlpInfeasible(LPError):
    """The program has no solution: the model is inconsistent."""


class SolverFailure(LPError):
    """The LP solver did not return a usable answer."""


@dataclass(frozen=True)
class Scale:
    """Units used inside the program (seconds and bits per unit)."""
    time: float = 1.0
    data: float = 1.0


@dataclass
class TreeFlow:
    """
    A flow of a tree problem.  ``burst`` is a number or the name of an LP
    variable holding the burst (in program units).
    """
    name: str
    burst: Burst
    rate: float
    path: Tuple[int, ...]
    sfa_cut: float = INF


@dataclass
class EntryGroup:
    """Flows starting at ``node`` whose aggregate is shaped by ``shaper``."""
    node: int
    shaper: TokenBucket
    flows: Tuple[int, ...]


@dataclass
class TreeProblem:
    """
    Everything the program builder needs: servers of a tree, flows, entry
    shaping groups and the constants of the optional cuts.
    """
    service: Dict[int, RateLatency]
    shaper: Dict[int, Optional[TokenBucket]]
    succ: Dict[int, Optional[int]]
    flows: List[TreeFlow]
    entry_groups: List[EntryGroup] = field(default_factory=list)
    tfa_cut: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for j, h in self.succ.items():
            if h is not None and h not in self.succ:
                raise NetworkError("successor %r of %r is not a server" % (h, j))
        for f in self.flows:
            for a, b in zip(f.path, f.path[1:]):
                if self.succ.get(a) != b:
                    raise NetworkError("path of %r does not follow the tree" % f.name)

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(sorted(self.succ))

    def flows_at(self, j: int) -> List[int]:
        return [i for i, f in enumerate(self.flows) if j in f.path]

    def children(self, j: int) -> List[int]:
        return sorted(k for k, h in self.succ.items() if h == j)

    def roots(self) -> List[int]:
        return sorted(k for k, h in self.succ.items() if h is None)

    def subtree(self, root: int) -> "TreeProblem":
        """Restriction to ``root`` and the servers that reach it."""
        keep = {root}
        stack = [root]
        while stack:
            j = stack.pop()
            for k in self.children(j):
                keep.add(k)
                stack.append(k)
        remap = {}
        flows = []
        for i, f in enumerate(self.flows):
            part = tuple(j for j in f.path if j in keep)
            if part:
                remap[i] = len(flows)
                flows.append(TreeFlow(f.name, f.burst, f.rate, part, f.sfa_cut if part == f.path else INF))
        groups = []
        for g in self.entry_groups:
            members = tuple(remap[i] for i in g.flows if i in remap)
            if g.node in keep and members:
                groups.append(EntryGroup(g.node, g.shaper, members))
        succ = {j: (self.succ[j] if j != root else None) for j in keep}
        return TreeProblem({j: self.service[j] for j in keep}, {j: self.shaper.get(j) for j in keep},
                           succ, flows, groups, {j: d for j, d in self.tfa_cut.items() if j in keep})


@dataclass(frozen=True)
class TimeIndexPlan:
    """
    Date indices of each server: ``u_min[j] .. u_max[j]`` (inclusive), with
    ``u_max[j] - u_min[j] == depth[j]``.  Index 0 is the exit date.
    """
    depth: Dict[int, int]
    u_min: Dict[int, int]
    u_max: Dict[int, int]
    root: int

    @property
    def n_dates(self) -> int:
        return 1 + sum(d + 1 for d in self.depth.values())

    def rng(self, j) -> range:
        if j == EXIT:
            return range(0, 1)
        return range(self.u_min[j], self.u_max[j] + 1)

    def start(self, j) -> int:
        return 0 if j == EXIT else self.u_min[j]

    def last(self, j) -> int:
        return 0 if j == EXIT else self.u_max[j]


def plan_time_indices(tree: Union[TreeProblem, Network]) -> TimeIndexPlan:
    """
    Allocate date indices by a depth-first traversal from the root, children
    in increasing id order.

    >>> from fifonc.network import two_hop
    >>> p = plan_time_indices(two_hop(2))
    >>> p.u_min, p.u_max
    ({2: 1, 1: 3}, {2: 2, 1: 5})
    """
    if isinstance(tree, Network):
        tree = tree_problem(tree)
    roots = tree.roots()
    if len(roots) != 1:
        raise NetworkError("a tree must have exactly one root, found %d" % len(roots))
    root = roots[0]
    depth, u_min, u_max = {}, {}, {}
    nxt = 1
    stack = [(root, 1)]
    while stack:
        j, d = stack.pop()
        depth[j] = d
        u_min[j] = nxt
        u_max[j] = nxt + d
        nxt += d + 1
        for k in reversed(tree.children(j)):
            stack.append((k, d + 1))
    return TimeIndexPlan(depth, u_min, u_max, root)


@dataclass
class CutValues:
    """Constants used by the optional cuts, in seconds."""
    server: Dict[int, float] = field(default_factory=dict)
    flow: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class PlpOptions:
    """
    :param cuts: subset of ``{"tfa", "sfa"}``
    :param shaping: add the output shaping constraints of the servers
    :param solver: solver string passed to :func:`fifonc.lpcore.solve`
    """
    cuts: FrozenSet[str] = frozenset({"tfa", "sfa"})
    shaping: bool = True
    solver: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "cuts", frozenset(self.cuts))
        bad = self.cuts - {"tfa", "sfa"}
        if bad:
            raise ValueError("unknown cut families %s" % sorted(bad))


def network_cuts(net: Network, options: PlpOptions) -> CutValues:
    """TFA++ per-server and SFA per-flow bounds of a feed-forward network."""
    cuts = CutValues()
    if "tfa" in options.cuts:
        cuts.server = dict(tfa_pp_servers(net).delays)
    if "sfa" in options.cuts:
        det = sfa_details(net)
        cuts.flow = {i: det.subpath_delay(i, f.path) for i, f in enumerate(net.flows)}
    return cuts


def tree_problem(net: Network, cuts: Optional[CutValues] = None, scale: Scale = Scale()) -> TreeProblem:
    """Build the tree problem of a tree network."""
    succ = {}
    for j in net.server_ids:
        succ[j] = net.tree_successor(j)
    cuts = cuts or CutValues()
    flows = [TreeFlow(f.name, f.burst / scale.data, f.rate, f.path, cuts.flow.get(i, INF))
             for i, f in enumerate(net.flows)]
    groups = [EntryGroup(f.first, f.shaper, (i,)) for i, f in enumerate(net.flows) if f.shaper is not None]
    return TreeProblem({j: s.service for j, s in net.servers.items()},
                       {j: s.shaper for j, s in net.servers.items()},
                       succ, flows, groups, dict(cuts.server))


def auto_scale(net: Network) -> Scale:
    """
    Time and data units of the program: the largest latency and the largest
    burst, unless they are negligible next to the delays and volumes the
    network can produce.

    >>> from fifonc.network import toy_tree
    >>> auto_scale(toy_tree())
    Scale(time=1.0, data=1.0)
    """
    lat = max((s.latency for s in net.servers.values()), default=0.0)
    shapers = [s.shaper.burst for s in net.servers.values() if s.shaper is not None]
    shapers += [f.shaper.burst for f in net.flows if f.shaper is not None]
    shapers = [b for b in shapers if b < INF]
    burst = max([f.burst for f in net.flows] + shapers, default=0.0)
    total = sum(f.burst for f in net.flows) + sum(shapers)
    rates = [s.rate for s in net.servers.values() if s.rate < INF]
    horizon = max((s.latency + total / s.rate for s in net.servers.values()), default=0.0)
    time = lat if lat > 1e-6 * horizon else horizon
    time = time if 0 < time < INF else 1.0
    volume = max(rates, default=0.0) * time
    data = burst if burst > 1e-6 * volume else volume
    data = data if 0 < data < INF else 1.0
    # keep the scaled service rates within a sane range
    if volume > 0 and not 1e-6 <= volume / data <= 1e6:
        data = volume
    return Scale(time, data)


@dataclass
class PlpModel:
    """A built program and the information needed to read it."""
    lp: LinearProgram
    plan: TimeIndexPlan
    tree: TreeProblem
    scale: Scale
    objective: str


class _Builder:
    def __init__(self, tree: TreeProblem, options: PlpOptions, scale: Scale, lp: LinearProgram):
        self.tree = tree
        self.opt = options
        self.scale = scale
        self.lp = lp
        self.plan = plan_time_indices(tree)
        self.fl = {j: tree.flows_at(j) for j in tree.nodes}

    # names
    @staticmethod
    def t(k: int) -> str:
        return "t%d" % k

    @staticmethod
    def F(i: int, j, k: int) -> str:
        return "F%d_%s_%d" % (i, j, k)

    def succ(self, j):
        h = self.tree.succ[j]
        return EXIT if h is None else h

    def rate(self, r: float) -> float:
        return r * self.scale.time / self.scale.data

    def exit_node(self, i: int):
        return self.succ(self.tree.flows[i].path[-1])

    def add(self, coeffs, sense, rhs, origin):
        self.lp.add(coeffs, sense, rhs, origin)

    def build(self):
        lp, plan = self.lp, self.plan
        for k in range(plan.n_dates):
            lp.free(self.t(k))
        self.time_constraints()
        self.fifo_constraints()
        self.service_constraints()
        self.arrival_constraints()
        self.monotony_constraints()
        if self.opt.shaping:
            self.shaping_constraints()
        if "tfa" in self.opt.cuts:
            self.tfa_cuts()
        if "sfa" in self.opt.cuts:
            self.sfa_cuts()

    def _dfs_nodes(self):
        return sorted(self.tree.nodes, key=lambda j: self.plan.u_min[j])

    def time_constraints(self):
        t, plan = self.t, self.plan
        for j in self._dfs_nodes():
            h = self.succ(j)
            for k in range(plan.depth[j]):
                self.add({t(plan.u_min[j] + k): 1, t(plan.start(h) + k): -1}, "<=", 0, "time")
            for u in range(plan.u_min[j], plan.u_max[j]):
                self.add({t(u + 1): 1, t(u): -1}, "<=", 0, "time")

    def fifo_constraints(self):
        plan = self.plan
        for j in self._dfs_nodes():
            h = self.succ(j)
            for k in range(plan.depth[j]):
                for i in self.fl[j]:
                    self.add({self.F(i, j, plan.u_min[j] + k): 1, self.F(i, h, plan.start(h) + k): -1},
                             "=", 0, "fifo")

    def service_constraints(self):
        plan, t = self.plan, self.t
        for j in self._dfs_nodes():
            beta = self.tree.service[j]
            if math.isinf(beta.rate):
                raise NetworkError("server %r: infinite rates are not supported in the program" % j)
            h = self.succ(j)
            uj, uh = plan.u_max[j], plan.last(h)
            base = {}
            for i in self.fl[j]:
                base[self.F(i, h, uh)] = 1.0
                base[self.F(i, j, uj)] = -1.0
            self.add(dict(base), ">=", 0, "service")
            R = self.rate(beta.rate)
            row = dict(base)
            row[t(uh)] = row.get(t(uh), 0.0) - R
            row[t(uj)] = row.get(t(uj), 0.0) + R
            self.add(row, ">=", -R * beta.latency / self.scale.time, "service")

    def _curve_pairs(self, terms_at, rng, burst: Burst, rate: float, origin: str):
        """``sum(F(u) - F(v)) <= burst + rate (t_u - t_v)`` for ``u < v``."""
        t = self.t
        rr = self.rate(rate)
        for a, u in enumerate(rng):
            for v in rng[a + 1:]:
                row = {}
                for name_u, name_v in terms_at(u, v):
                    row[name_u] = row.get(name_u, 0.0) + 1
                    row[name_v] = row.get(name_v, 0.0) - 1
                if rr:
                    row[t(u)] = row.get(t(u), 0.0) - rr
                    row[t(v)] = row.get(t(v), 0.0) + rr
                if isinstance(burst, str):
                    row[burst] = row.get(burst, 0.0) - 1
                    self.add(row, "<=", 0, origin)
                else:
                    self.add(row, "<=", burst, origin)

    def arrival_constraints(self):
        plan = self.plan
        for i, f in enumerate(self.tree.flows):
            j = f.path[0]
            self._curve_pairs(lambda u, v: [(self.F(i, j, u), self.F(i, j, v))], list(plan.rng(j)),
                              f.burst, f.rate, "arrival")
        for g in self.tree.entry_groups:
            j = g.node
            self._curve_pairs(lambda u, v: [(self.F(i, j, u), self.F(i, j, v)) for i in g.flows],
                              list(plan.rng(j)), g.shaper.burst / self.scale.data, g.shaper.rate, "entry-shaping")

    def monotony_constraints(self):
        plan = self.plan
        for i, f in enumerate(self.tree.flows):
            j = f.path[0]
            for u in range(plan.u_min[j], plan.u_max[j]):
                self.add({self.F(i, j, u): 1, self.F(i, j, u + 1): -1}, ">=", 0, "monotony")

    def shaping_constraints(self):
        plan = self.plan
        for j in self._dfs_nodes():
            sigma = self.tree.shaper.get(j)
            h = self.succ(j)
            if sigma is None or h == EXIT:
                continue
            self._curve_pairs(lambda u, v: [(self.F(i, h, u), self.F(i, h, v)) for i in self.fl[j]],
                              list(plan.rng(h)), sigma.burst / self.scale.data, sigma.rate, "shaping")

    def tfa_cuts(self):
        plan, t = self.plan, self.t
        for j in self._dfs_nodes():
            d = self.tree.tfa_cut.get(j, INF)
            if math.isinf(d):
                continue
            h = self.succ(j)
            for k in range(plan.depth[j]):
                self.add({t(plan.start(h) + k): 1, t(plan.u_min[j] + k): -1}, "<=",
                         d / self.scale.time, "tfa-cut")

    def sfa_cuts(self):
        plan, t = self.plan, self.t
        for i, f in enumerate(self.tree.flows):
            if math.isinf(f.sfa_cut):
                continue
            j = f.path[0]
            h = self.exit_node(i)
            for k in range(len(plan.rng(h))):
                self.add({t(plan.start(h) + k): 1, t(plan.u_min[j] + k): -1}, "<=",
                         f.sfa_cut / self.scale.time, "sfa-cut")

    # objectives
    def delay_objective(self, foi: int) -> Dict[str, float]:
        j = self.tree.flows[foi].path[0]
        return {self.t(0): 1.0, self.t(self.plan.u_min[j]): -1.0}

    def backlog_objective(self, q: int) -> Dict[str, float]:
        f = self.tree.flows[q]
        j = f.path[0]
        at0 = self.F(q, j, 0)
        rr = self.rate(f.rate)
        for u in self.plan.rng(j):
            row = {at0: 1.0, self.F(q, j, u): -1.0, self.t(0): -rr, self.t(u): rr}
            if isinstance(f.burst, str):
                row[f.burst] = -1.0
                self.add(row, "<=", 0, "backlog")
            else:
                self.add(row, "<=", f.burst, "backlog")
        self.add({at0: 1.0, self.F(q, j, self.plan.u_min[j]): -1.0}, ">=", 0, "backlog")
        return {at0: 1.0, self.F(q, self.exit_node(q), 0): -1.0}


def _check_tree_flow(tree: TreeProblem, i: int):
    root = plan_time_indices(tree).root
    if tree.flows[i].path[-1] != root:
        raise NetworkError("flow %r must end at the root of the tree" % tree.flows[i].name)


def build_tree_lp(tree: TreeProblem, target: int, objective: str, options: PlpOptions,
                  scale: Scale = Scale(), lp: Optional[LinearProgram] = None) -> PlpModel:
    """
    Build the program of ``tree`` for flow ``target``, which must end at the
    root.  ``objective`` is ``delay`` or ``backlog``.  When ``lp`` is given
    the rows are added to it but its objective is left alone; the objective
    coefficients are returned in ``PlpModel.lp.objective`` only when a fresh
    program is built.
    """
    _check_tree_flow(tree, target)
    own = lp is None
    lp = lp if lp is not None else LinearProgram("plp")
    b = _Builder(tree, options, scale, lp)
    b.build()
    if objective == "delay":
        obj = b.delay_objective(target)
    elif objective == "backlog":
        obj = b.backlog_objective(target)
    else:
        raise ValueError("unknown objective %r" % objective)
    if own:
        lp.maximize(obj)
    model = PlpModel(lp, b.plan, tree, scale, objective)
    model.objective_coeffs = obj
    return model


def _interpret(out: SolveOutcome, what: str) -> float:
    if out.status == "optimal":
        return out.objective
    if out.status == "unbounded":
        return INF
    if out.status == "infeasible":
        raise PlpInfeasible("%s: the program is infeasible" % what)
    raise SolverFailure("%s: solver failed (%s)" % (what, out.message or out.status))


def solve_tree(tree: TreeProblem, target: int, objective: str, options: PlpOptions,
               scale: Scale = Scale()) -> float:
    """Optimum of the tree program in seconds (delay) or bits (backlog)."""
    model = build_tree_lp(tree, target, objective, options, scale)
    value = _interpret(solve(model.lp, options.solver), "plp")
    unit = scale.time if objective == "delay" else scale.data
    return value * unit


def _as_tree_for(net: Network, i: int, options: PlpOptions, cuts: Optional[CutValues]):
    if cuts is None:
        cuts = network_cuts(net, options) if options.cuts else CutValues()
    scale = auto_scale(net.restrict(net.ancestors(net.flows[i].last)))
    tree = tree_problem(net, cuts, scale)
    return tree.subtree(net.flows[i].last), tree_index(tree, net.flows[i].last, i), scale


def tree_index(tree: TreeProblem, root: int, i: int) -> int:
    """Index of flow ``i`` of ``tree`` inside ``tree.subtree(root)``."""
    keep = set(tree.subtree(root).nodes)
    return sum(1 for k in range(i) if any(j in keep for j in tree.flows[k].path))


def build_plp(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
              cuts: Optional[CutValues] = None, objective: str = "delay") -> PlpModel:
    """
    Program of a tree network for the delay (or backlog) of ``foi``.  The
    tree is first restricted to the servers that reach the last server of
    ``foi``.

    :rtype: PlpModel
    """
    i = net.default_foi() if foi is None else net.flow_index(foi)
    tree, k, scale = _as_tree_for(net, i, options, cuts)
    return build_tree_lp(tree, k, objective, options, scale)


def plp_delay(net: Network, foi: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
              cuts: Optional[CutValues] = None) -> float:
    """
    Delay bound of ``foi`` in a tree network; ``INF`` if the program is
    unbounded.

    >>> from fifonc.network import two_hop
    >>> round(plp_delay(two_hop(2)), 6)
    0.0022
    """
    i = net.default_foi() if foi is None else net.flow_index(foi)
    tree, k, scale = _as_tree_for(net, i, options, cuts)
    return solve_tree(tree, k, "delay", options, scale)


def plp_backlog(net: Network, flow: Optional[FlowRef] = None, options: PlpOptions = PlpOptions(),
                cuts: Optional[CutValues] = None) -> float:
    """Bound on the amount of data of ``flow`` inside the tree, in bits."""
    i = net.default_foi() if flow is None else net.flow_index(flow)
    tree, k, scale = _as_tree_for(net, i, options, cuts)
    return solve_tree(tree, k, "backlog", options, scale)
