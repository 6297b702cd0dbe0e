"""Command line: ``evaba run ...`` and ``evaba audit --log FILE``."""

from __future__ import annotations

import argparse
import json
import sys

from .audit import audit_event_log
from .harness import (build_config, parse_behavior_arg, parse_scenario, report, run_batch,
                      run_once)
from .sim_core import ConfigError, SchedulerPolicy


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evaba", description="Committee-restricted VABA simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="execute a batch of seeded runs")
    run.add_argument("--config", help="flat key = value scenario file")
    run.add_argument("--n", type=int)
    run.add_argument("--f", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--scheduler", help="fifo | random-delay[:seed] | worst-case-rotation[:period]"
                                         " | partition-then-heal:<heal step>")
    run.add_argument("--behavior", action="append", default=[], metavar="ID=KIND",
                     help="e.g. 2=crash:10 or 3=equivocate-send; repeatable")
    run.add_argument("--max-views", type=int)
    run.add_argument("--trace", metavar="FILE", help="write the first run's event log (JSON lines)")
    run.add_argument("--format", choices=("json", "table"), default="table")

    audit = sub.add_parser("audit", help="audit a JSON-lines event log")
    audit.add_argument("--log", required=True)
    return ap


def _cmd_run(args) -> int:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = parse_scenario(fh.read())
    behaviors = dict(parse_behavior_arg(b) for b in args.behavior)
    f = args.f
    if f is None and args.n is not None and "f" not in base:
        f = (args.n - 1) // 3
    config = build_config(
        base, n=args.n, f=f, seed=args.seed, runs=args.runs, max_views=args.max_views,
        scheduler=SchedulerPolicy.parse(args.scheduler) if args.scheduler else None,
        behaviors=behaviors)
    batch = run_batch(config)
    sys.stdout.write(report(batch, args.format))
    if args.trace and config.runs:
        events = run_once(config, 0, audit=False).events
        with open(args.trace, "w") as fh:
            for rec in events:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return 0 if batch.ok else 1


def _cmd_audit(args) -> int:
    with open(args.log) as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    found = audit_event_log(events)
    for v in found:
        print(json.dumps(v.as_dict(), sort_keys=True))
    print(f"{len(found)} violation(s) in {len(events)} records")
    return 0 if not found else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _cmd_run(args)
        return _cmd_audit(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"evaba: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
