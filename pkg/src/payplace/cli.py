"""payplace command line: run scenarios, the attack suite, cost sweeps, and trace inspection."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from . import cost_model
from .simulator import (Scenario, ScenarioError, attack_suite, builtin, builtin_names,
                        format_report, read_trace, run)
from .simulator.attacks import CASES


class UsageError(Exception):
    pass


def _write(text: str, dest: Optional[str]) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def _load_scenario(ref: str) -> Scenario:
    path = Path(ref)
    if path.is_file():
        return Scenario.loads(path.read_text())
    try:
        return builtin(ref)
    except KeyError:
        raise UsageError(f"{ref}: no such file or built-in scenario "
                         f"(built-ins: {', '.join(builtin_names())})") from None


def cmd_run(args: argparse.Namespace) -> int:
    if args.list:
        print("\n".join(builtin_names()))
        return 0
    if not args.scenario:
        raise UsageError("run: --scenario is required")
    scenario = _load_scenario(args.scenario)
    if args.backend:
        scenario.backend = args.backend
    trace = run(scenario)
    _write(trace.dumps(), args.trace)
    for v in trace.violations:
        print(f"violation {v.probe} at tick {v.tick}: {v.detail}", file=sys.stderr)
    print(f"{scenario.name}: {len(trace.records)} records, {len(trace.notarizations)} notarizations, "
          f"{len(trace.violations)} violations", file=sys.stderr)
    return 0 if trace.ok else 1


def cmd_attacks(args: argparse.Namespace) -> int:
    unknown = [c for c in args.case or [] if c not in CASES]
    if unknown:
        raise UsageError(f"unknown attack case(s): {', '.join(unknown)}")
    outcomes = attack_suite(args.seed, args.case)
    _write(format_report(outcomes), args.report)
    failed = [o.case for o in outcomes if not o.passed]
    for case in failed:
        print(f"attack case {case} did not match the expected outcome", file=sys.stderr)
    return 1 if failed else 0


_PARAM_FIELDS = {f.name for f in fields(cost_model.WorkloadParams)}


def _grid_from_file(path: str) -> List[cost_model.GridPoint]:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(raw, dict) or not isinstance(raw.get("points"), list):
        raise ScenarioError("points", "grid file needs a 'points' list")
    grid = []
    for i, entry in enumerate(raw["points"]):
        if not isinstance(entry, dict):
            raise ScenarioError(f"points[{i}]", "must be a mapping")
        entry = dict(entry)
        series = str(entry.pop("series", ""))
        bad = sorted(set(entry) - _PARAM_FIELDS)
        if bad:
            raise ScenarioError(f"points[{i}].{bad[0]}", "unknown workload parameter")
        try:
            grid.append(cost_model.GridPoint("custom", series, cost_model.WorkloadParams(**entry)))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"points[{i}]", str(exc)) from None
    return grid


def cmd_cost(args: argparse.Namespace) -> int:
    chosen = sum(x is not None for x in (args.fig, args.grid)) + bool(args.param)
    if chosen != 1:
        raise UsageError("cost: give exactly one of --fig, --grid, or --param")
    if args.fig is not None:
        text = cost_model.figure_csv(args.fig)
    else:
        if args.grid is not None:
            grid = _grid_from_file(args.grid)
        else:
            params = {}
            for item in args.param:
                key, sep, value = item.partition("=")
                if not sep or key not in _PARAM_FIELDS:
                    raise UsageError(f"--param {item!r}: expected NAME=INT with NAME a workload parameter")
                try:
                    params[key] = int(value)
                except ValueError:
                    raise UsageError(f"--param {item!r}: value must be an integer") from None
            try:
                grid = [cost_model.GridPoint("custom", "", cost_model.WorkloadParams(**params))]
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        text = cost_model.to_csv(cost_model.sweep(grid))
    _write(text, args.out)
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        with open(args.trace) as fh:
            trace = read_trace(fh)
    except OSError as exc:
        raise UsageError(f"{args.trace}: {exc.strerror}") from None
    except ValueError as exc:
        raise ScenarioError("trace", str(exc)) from None
    out = []
    if args.violations:
        out = [f"{v.tick}\t{v.probe}\t{v.detail}" for v in trace.violations]
    else:
        for r in trace.select(args.action, args.actor):
            if args.since is not None and r.tick < args.since:
                continue
            if args.until is not None and r.tick > args.until:
                continue
            if args.reason is not None and r.reason != args.reason:
                continue
            line = f"{r.tick}\t{r.actor}\t{r.action}\t{r.reason or '-'}\t{r.state_hash}"
            if args.data:
                line += "\t" + json.dumps(r.data, sort_keys=True)
            out.append(line)
    _write("".join(line + "\n" for line in out), None)
    return 1 if trace.violations else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="payplace", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its trace")
    r.add_argument("--scenario", help="scenario YAML file or built-in name")
    r.add_argument("--trace", help="trace output path (default stdout)")
    r.add_argument("--backend", choices=("transparent", "bls12-381"), help="override the crypto backend")
    r.add_argument("--list", action="store_true", help="list built-in scenarios")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("attacks", help="run the adversary matrix")
    a.add_argument("--report", help="report output path (default stdout)")
    a.add_argument("--seed", type=int, default=7)
    a.add_argument("--case", action="append", help="restrict to a case; repeatable")
    a.set_defaults(func=cmd_attacks)

    c = sub.add_parser("cost", help="cost-model sweep to CSV")
    c.add_argument("--fig", choices=sorted(cost_model.FIGURES))
    c.add_argument("--grid", help="YAML file with a 'points' list of workload parameters")
    c.add_argument("--param", action="append", default=[], metavar="NAME=INT",
                   help="single workload point; repeatable")
    c.add_argument("--out", help="CSV output path (default stdout)")
    c.set_defaults(func=cmd_cost)

    i = sub.add_parser("inspect", help="filter a trace file")
    i.add_argument("trace")
    i.add_argument("--action")
    i.add_argument("--actor")
    i.add_argument("--reason")
    i.add_argument("--since", type=int)
    i.add_argument("--until", type=int)
    i.add_argument("--data", action="store_true", help="include record payloads")
    i.add_argument("--violations", action="store_true", help="list probe violations only")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"payplace: invalid input at {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"payplace: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
