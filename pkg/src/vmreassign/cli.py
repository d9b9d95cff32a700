"""``vmreassign`` command line: run, solve-assign, heterogeneity, gen-trace."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .errors import ConfigError, InvariantViolation, TraceError
from .experiment import (
    ExperimentConfig, FILTER_NAMES, apply_settings, assignment_report, load_config_file,
    load_trace, render_json, render_table, report_header, run_cells, synth_config,
    write_reports,
)
from .trace import synth_generate, write_csv

EXIT_CONFIG, EXIT_TRACE, EXIT_INVARIANT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not argparse's default code 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("cluster and workload")
    g.add_argument("--config", help="YAML file with experiment settings; flags override it")
    g.add_argument("--trace", help="CSV trace (vmid,cpu,memory,time,type); default is synthetic")
    g.add_argument("--pms", type=int, help="number of machines")
    g.add_argument("--pm-cpu", type=int, help="CPU units per machine")
    g.add_argument("--pm-mem", type=int, help="memory units per machine")
    g.add_argument("--numa", type=int, help="NUMA nodes per machine")
    g.add_argument("--seed", type=int, help="scenario sampling and random-search seed")
    g.add_argument("--json", action="store_true", help="print JSON instead of a table")


def _experiment(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--scheduler", help="comma list of ff, bf, bf2, random")
    g.add_argument("--reassigner", action="store_true", default=None,
                   help="also run every scheduler under the role-assignment intensifier")
    g.add_argument("--no-baseline", dest="baseline", action="store_false", default=None,
                   help="with --reassigner, skip the plain scheduler rows")
    g.add_argument("--alpha", help="imbalance threshold(s), e.g. 0.3N or 0.05N,0.1N,0.2N,0.3N")
    g.add_argument("--lambda", dest="lam", type=float, help="CPU weight of the waste objective")
    g.add_argument("--plan", help="fixed CPU-region size c1,m1 instead of solving")
    g.add_argument("--scenarios", type=int, help="number of sampled start points")
    g.add_argument("--filter", help="comma list of " + ", ".join(FILTER_NAMES))
    g.add_argument("--restarts", type=int, help="random rollouts for the optimal proxy")
    g.add_argument("--workers", type=int, help="parallel worker processes")
    g.add_argument("--out", help="directory for CSV/JSON reports")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vmreassign", description="Trace-driven VM placement benchmarks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="length/ALW table for scheduler x intensifier cells")
    _common(p)
    _experiment(p)

    p = sub.add_parser("heterogeneity", help="filter x algorithm table including the optimal proxy")
    _common(p)
    _experiment(p)

    p = sub.add_parser("solve-assign", help="print the CPU/MEM region sizes")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, help="CPU weight of the waste objective")
    p.add_argument("--flavors", help="comma list like 12U8G,2U4G (default: trace or built-in set)")
    p.add_argument("--plan", help="evaluate a fixed c1,m1 instead of solving")

    p = sub.add_parser("gen-trace", help="write a synthetic trace as CSV")
    p.add_argument("--config", help="YAML file; its 'synth' mapping is used")
    p.add_argument("--preset", choices=("mixed", "uniform"))
    p.add_argument("--length", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--delete-prob", type=float)
    p.add_argument("--weights", help="flavor weights, e.g. 12U8G=1 (must sum to 1)")
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


_FLAG_KEYS = {
    "pms": "pms", "pm_cpu": "pm_cpu", "pm_mem": "pm_mem", "numa": "numa", "seed": "seed",
    "trace": "trace", "scheduler": "schedulers", "reassigner": "reassigner",
    "baseline": "baseline", "alpha": "alpha", "lam": "lambda", "plan": "plan",
    "scenarios": "scenarios", "filter": "filters", "restarts": "restarts",
    "workers": "workers", "out": "out", "flavors": "flavors",
}


def resolve_config(args: argparse.Namespace, **defaults) -> ExperimentConfig:
    cfg = apply_settings(ExperimentConfig(), defaults, "defaults")
    if getattr(args, "config", None):
        cfg = apply_settings(cfg, load_config_file(args.config), args.config)
    flags = {key: getattr(args, attr) for attr, key in _FLAG_KEYS.items() if hasattr(args, attr)}
    return apply_settings(cfg, flags, "command line").validate()


def _emit(args, command: str, cfg: ExperimentConfig, rows, trace) -> None:
    header = report_header(command, cfg, trace)
    if cfg.out:
        for path in write_reports(cfg.out, command, rows, header):
            print(f"wrote {path}", file=sys.stderr)
    sys.stdout.write(render_json(rows, header) if args.json else render_table(rows))


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    trace = load_trace(cfg)
    _emit(args, "run", cfg, run_cells(cfg, trace), trace)
    return 0


def cmd_heterogeneity(args) -> int:
    cfg = resolve_config(args, schedulers="ff,bf,bf2", filters=",".join(FILTER_NAMES))
    trace = load_trace(cfg)
    _emit(args, "heterogeneity", cfg, run_cells(cfg, trace, optimal=True), trace)
    return 0


def cmd_solve_assign(args) -> int:
    cfg = resolve_config(args)
    trace = load_trace(cfg) if cfg.trace else None
    plan = assignment_report(cfg, trace)
    if args.json:
        print(json.dumps(plan, sort_keys=True))
    else:
        obj = "n/a" if plan["objective"] is None else f"{plan['objective']:g}"
        print(f"CPU-intensive region: {plan['c1']}U{plan['m1']}G")
        print(f"MEM-intensive region: {plan['c2']}U{plan['m2']}G")
        print(f"objective: {obj} (lambda={plan['lambda']:g})")
    return 0


def cmd_gen_trace(args) -> int:
    settings = {}
    if args.config:
        settings.update(load_config_file(args.config).get("synth", {}) or {})
    for key in ("preset", "length", "seed"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    if args.delete_prob is not None:
        settings["delete_prob"] = args.delete_prob
    if args.weights:
        weights = {}
        for part in args.weights.split(","):
            name, _, value = part.partition("=")
            try:
                weights[name.strip().upper()] = float(value)
            except ValueError:
                raise ConfigError(f"--weights: bad entry {part!r}") from None
        settings["flavor_weights"] = weights
        settings.setdefault("delete_weights", {})
    trace = synth_generate(synth_config(settings))
    write_csv(trace, args.out)
    print(f"wrote {len(trace)} requests to {args.out}", file=sys.stderr)
    return 0


COMMANDS = {"run": cmd_run, "heterogeneity": cmd_heterogeneity,
            "solve-assign": cmd_solve_assign, "gen-trace": cmd_gen_trace}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TraceError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_TRACE


if __name__ == "__main__":
    sys.exit(main())
