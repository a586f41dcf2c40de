"""
Command-line interface.

Subcommands: ``analyze`` (one network, one or more methods), ``sweep`` (CSV
over a generator parameter), ``export-lp`` (LP text of a program) and
``check`` (validate and classify a network file).

Exit status: 0 on success, 1 on invalid input, 2 when a solver fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

from .analyzers import reg_bound, sfa, tfa, tfa_pp
from .cyclic import (build_combined_fixpoint_lp, build_tfa_lp, cyclic_delay, prepare)
from .feedforward import DEFAULT_MAX_UNFOLD_NODES, UnfoldTooLarge, split_analyze, unfold, unfold_analyze
from .lpcore import ENV_SOLVER, LPError, export_lp_text
from .network import Network, NetworkError, classify, generate, load_network
from .plp import PlpOptions, build_plp, plp_backlog, plp_delay

METHODS = ("tfa", "tfa++", "sfa", "reg", "plp", "plp-unfold", "plp-split", "plp-fixpoint", "lp-tfa")
GENERATORS = ("two-hop", "source-sink", "ring", "mesh", "toy", "toy-ff")

EXIT_INPUT = 1
EXIT_SOLVER = 2


class UsageError(Exception):
    """Invalid command-line input; the message names the offending option."""


class _Parser(argparse.ArgumentParser):
    """Argument errors exit with the input-error status rather than argparse's 2."""

    def error(self, message):
        raise UsageError(message)


# method dispatch

def applicable(kind: str, method: str) -> Optional[str]:
    """
    None if ``method`` runs on a network of class ``kind``, otherwise the
    reason it does not.
    """
    cyclic = kind == "cyclic"
    tree = kind in ("tandem", "tree")
    if method == "tfa" and cyclic:
        return "tfa needs a feed-forward network; use tfa++ (computed as lp-tfa) or plp-fixpoint"
    if method == "plp" and not tree:
        hint = "plp-fixpoint" if cyclic else "plp-unfold or plp-split"
        return "plp needs a tree network; use %s" % hint
    if method in ("plp-unfold", "plp-split") and cyclic:
        return "%s needs a feed-forward network; use plp-fixpoint" % method
    return None


def methods_for(kind: str, ff_mode: str = "unfold") -> List[str]:
    """Methods run by ``--method all``, in their fixed column order."""
    if kind == "cyclic":
        return ["tfa++", "sfa", "reg", "plp-fixpoint"]
    out = ["tfa", "tfa++", "sfa", "reg"]
    if kind in ("tandem", "tree"):
        out.append("plp")
    else:
        out.append("plp-" + ff_mode)
    return out


def run_method(net: Network, foi, method: str, options: PlpOptions,
               max_unfold: int = DEFAULT_MAX_UNFOLD_NODES) -> float:
    """Delay bound of ``foi`` by ``method``, in seconds."""
    kind = classify(net).kind
    reason = applicable(kind, method)
    if reason:
        raise UsageError("--method: " + reason)
    if kind == "cyclic" and method in ("tfa++", "sfa"):
        return cyclic_delay(net, foi, "lp-tfa" if method == "tfa++" else "sfa", options)
    if method == "tfa":
        return tfa(net, foi).delay
    if method == "tfa++":
        return tfa_pp(net, foi).delay
    if method == "sfa":
        return sfa(net, foi).delay
    if method == "reg":
        return reg_bound(net, foi).delay
    if method == "plp":
        return plp_delay(net, foi, options)
    if method == "plp-unfold":
        return unfold_analyze(net, foi, options, max_unfold)
    if method == "plp-split":
        return split_analyze(net, foi, options)
    if method in ("plp-fixpoint", "lp-tfa"):
        return cyclic_delay(net, foi, method, options)
    raise UsageError("--method: unknown method %r" % method)


def lp_size(net: Network, foi, method: str, options: PlpOptions,
            max_unfold: int = DEFAULT_MAX_UNFOLD_NODES) -> Optional[Dict[str, int]]:
    """Variables and rows of the main program of an LP-based method."""
    if method == "plp":
        lp = build_plp(net, foi, options).lp
    elif method == "plp-unfold":
        u = unfold(net, foi, max_unfold)
        lp = build_plp(u.network, u.foi, options).lp
    elif method == "lp-tfa":
        lp = build_tfa_lp(net)
    elif method == "plp-fixpoint":
        lp = build_combined_fixpoint_lp(prepare(net, foi, options), options)
    else:
        return None
    return {"variables": lp.n_vars, "rows": lp.n_rows}


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return "%.10g" % x


# option parsing

def _parse_cuts(text: str) -> frozenset:
    if text == "none":
        return frozenset()
    cuts = frozenset(c.strip() for c in text.split(",") if c.strip())
    bad = cuts - {"tfa", "sfa"}
    if bad:
        raise UsageError("--cuts: unknown cut family %s" % ", ".join(sorted(bad)))
    return cuts


def _options(args) -> PlpOptions:
    solver = args.solver
    if solver is None:
        solver = os.environ.get(ENV_SOLVER) or None
    return PlpOptions(cuts=_parse_cuts(args.cuts), shaping=args.shaping == "on", solver=solver)


def _network(args) -> Network:
    if args.net and args.gen:
        raise UsageError("--net and --gen are mutually exclusive")
    if args.net:
        return load_network(args.net)
    if not args.gen:
        raise UsageError("--net or --gen is required")
    if args.gen in ("two-hop", "source-sink", "ring") and args.n is None:
        raise UsageError("--n is required with --gen %s" % args.gen)
    try:
        return generate(args.gen, args.n or 0, args.load, args.eta)
    except ValueError as exc:
        raise UsageError("--n: %s" % exc) from None


def _methods(arg: str, kind: str, ff_mode: str) -> List[str]:
    if arg == "all":
        return methods_for(kind, ff_mode)
    out = [m.strip() for m in arg.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise UsageError("--method: unknown method %s" % ", ".join(bad or [arg]))
    return out


def _add_network_args(p: argparse.ArgumentParser, sweep: bool = False):
    if not sweep:
        p.add_argument("--net", help="network file (JSON)")
    p.add_argument("--gen", choices=GENERATORS, help="benchmark generator")
    p.add_argument("--n", type=int, help="number of servers (generators)")
    p.add_argument("--load", type=float, default=0.5, help="utilization U (default 0.5)")
    p.add_argument("--eta", type=float, default=1.0, help="shaper rate factor (default 1)")
    p.add_argument("--foi", help="flow of interest (default: the file's foi)")


def _add_lp_args(p: argparse.ArgumentParser):
    p.add_argument("--cuts", default="tfa,sfa", help="cut families: tfa,sfa | tfa | sfa | none")
    p.add_argument("--shaping", choices=("on", "off"), default="on")
    p.add_argument("--solver", help='highs | internal | cmd:"TEMPLATE" (default: $%s or highs)'
                   % ENV_SOLVER)
    p.add_argument("--ff-mode", choices=("unfold", "split"), default="unfold",
                   help="feed-forward reduction used by --method all")
    p.add_argument("--max-unfold-nodes", type=int, default=DEFAULT_MAX_UNFOLD_NODES)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fifonc", description="Delay bounds for FIFO networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="bound the delay of one flow")
    _add_network_args(p)
    _add_lp_args(p)
    p.add_argument("--method", default="all", help="method name, comma-separated list or all")
    p.add_argument("--backlog", action="store_true", help="also report the PLP backlog bound (trees)")
    p.add_argument("--json", action="store_true", help="machine-readable report")

    p = sub.add_parser("sweep", help="CSV of bounds over a generator parameter")
    _add_network_args(p, sweep=True)
    _add_lp_args(p)
    p.add_argument("--method", default="all")
    p.add_argument("--param", choices=("n", "load", "eta"), required=True)
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--values", help="comma-separated abscissa values")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("export-lp", help="write the LP text of a program")
    _add_network_args(p)
    _add_lp_args(p)
    p.add_argument("--method", default="plp", choices=("plp", "plp-unfold", "plp-fixpoint", "lp-tfa"))
    p.add_argument("--objective", choices=("delay", "backlog"), default="delay")
    p.add_argument("--dialect", choices=("lp_solve", "cplex"), default="lp_solve")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("check", help="validate and classify a network")
    _add_network_args(p)
    p.add_argument("--strict", action="store_true", help="reject unknown keys")
    p.add_argument("--json", action="store_true")
    return parser


# subcommands

def _foi(net: Network, args):
    foi = args.foi
    if foi is not None and foi not in [f.name for f in net.flows]:
        raise UsageError("--foi: no flow named %r" % foi)
    return foi


def cmd_analyze(args, out) -> int:
    net = _network(args)
    options = _options(args)
    foi = _foi(net, args)
    cls = classify(net)
    methods = _methods(args.method, cls.kind, args.ff_mode)
    if args.method != "all":
        for m in methods:
            reason = applicable(cls.kind, m)
            if reason:
                raise UsageError("--method: " + reason)
    report = {"network": {"kind": cls.kind, "servers": len(net.servers), "flows": len(net.flows),
                          "foi": net.flows[net.default_foi() if foi is None else net.flow_index(foi)].name,
                          "locally_stable": cls.locally_stable},
              "solver": options.solver or "highs", "results": []}
    status = 0
    for m in methods:
        entry = {"method": m}
        t0 = time.perf_counter()
        try:
            d = run_method(net, foi, m, options, args.max_unfold_nodes)
            entry.update(status="ok" if math.isfinite(d) else "unbounded", delay=_fmt(d))
            if args.json:
                size = lp_size(net, foi, m, options, args.max_unfold_nodes)
                if size:
                    entry["lp"] = size
        except (UnfoldTooLarge, UsageError) as exc:
            entry.update(status="error", error=str(exc))
            status = max(status, EXIT_INPUT)
        except LPError as exc:
            entry.update(status="solver-failure", error=str(exc))
            status = EXIT_SOLVER
        entry["seconds"] = round(time.perf_counter() - t0, 6)
        if args.backlog and m == "plp" and entry["status"] != "error":
            entry["backlog"] = _fmt(plp_backlog(net, foi, options))
        report["results"].append(entry)
    if args.json:
        json.dump(report, out, indent=2)
        out.write("\n")
    else:
        for e in report["results"]:
            line = "%-13s %s" % (e["method"], e.get("delay", e["status"]))
            if "backlog" in e:
                line += "  backlog %s" % e["backlog"]
            if "error" in e:
                line += "  (%s)" % e["error"]
            out.write(line + "\n")
    return status


def _abscissae(args) -> List[float]:
    if args.values:
        try:
            xs = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise UsageError("--values: not a list of numbers") from None
    else:
        if args.start is None or args.stop is None or args.step is None:
            raise UsageError("--from, --to and --step (or --values) are required")
        if args.step <= 0:
            raise UsageError("--step must be positive")
        count = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
        xs = [round(args.start + k * args.step, 12) for k in range(max(count, 0))]
    if not xs:
        raise UsageError("--values: empty sweep")
    if args.param == "n" and any(x != int(x) or x < 1 for x in xs):
        raise UsageError("--param n takes positive integers")
    return xs


def _sweep_point(gen, n, load, eta, methods, options, max_unfold, foi):
    """One CSV row (without the abscissa); runs in a worker process."""
    try:
        net = generate(gen, n, load, eta)
    except ValueError:
        return ["error"] * len(methods), EXIT_INPUT
    cells, code = [], 0
    for m in methods:
        try:
            cells.append(_fmt(run_method(net, foi, m, options, max_unfold)))
        except (UsageError, NetworkError, UnfoldTooLarge):
            cells.append("error")
            code = max(code, EXIT_INPUT)
        except LPError:
            cells.append("error")
            code = EXIT_SOLVER
    return cells, code


def cmd_sweep(args, out) -> int:
    if not args.gen:
        raise UsageError("--gen is required")
    options = _options(args)
    xs = _abscissae(args)
    base = {"n": args.n or 0, "load": args.load, "eta": args.eta}
    if args.gen in ("two-hop", "source-sink", "ring") and args.param != "n" and not args.n:
        raise UsageError("--n is required with --gen %s" % args.gen)
    kind = classify(generate(args.gen, int(xs[0]) if args.param == "n" else base["n"],
                             args.load, args.eta)).kind
    methods = _methods(args.method, kind, args.ff_mode)
    jobs = []
    for x in xs:
        p = dict(base)
        p[args.param] = int(x) if args.param == "n" else x
        jobs.append((args.gen, p["n"], p["load"], p["eta"], methods, options,
                     args.max_unfold_nodes, args.foi))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, *zip(*jobs)))
    else:
        rows = [_sweep_point(*j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Abscissa"] + methods)
    status = 0
    for x, (cells, code) in zip(xs, rows):
        w.writerow([str(int(x)) if args.param == "n" else "%g" % x] + cells)
        status = max(status, code)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        out.write(buf.getvalue())
    return status


def cmd_export_lp(args, out) -> int:
    net = _network(args)
    options = _options(args)
    foi = _foi(net, args)
    kind = classify(net).kind
    reason = applicable(kind, args.method)
    if reason:
        raise UsageError("--method: " + reason)
    if args.method == "plp":
        lp = build_plp(net, foi, options, objective=args.objective).lp
    elif args.method == "plp-unfold":
        u = unfold(net, foi, args.max_unfold_nodes)
        lp = build_plp(u.network, u.foi, options, objective=args.objective).lp
    elif args.method == "lp-tfa":
        lp = build_tfa_lp(net)
    else:
        lp = build_combined_fixpoint_lp(prepare(net, foi, options), options)
    text = export_lp_text(lp, args.dialect)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_check(args, out) -> int:
    if args.net:
        net = load_network(args.net, strict=args.strict)
    else:
        net = _network(args)
    c = classify(net)
    info = {"kind": c.kind, "servers": len(net.servers), "flows": len(net.flows),
            "locally_stable": c.locally_stable, "saturated": list(c.saturated),
            "max_utilization": max(c.utilization.values()) if c.utilization else 0.0}
    if args.json:
        json.dump(info, out, indent=2)
        out.write("\n")
    else:
        for k, v in info.items():
            out.write("%s: %s\n" % (k, v))
    return 0


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "export-lp": cmd_export_lp,
            "check": cmd_check}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    """Entry point; returns the exit status."""
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except (UsageError, NetworkError, ValueError) as exc:
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_INPUT
    except LPError as exc:
        sys.stderr.write("solver failure: %s\n" % exc)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
