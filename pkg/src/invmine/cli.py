"""Command line: simulate a model, check obligations, discover invariants."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .heuristics import (
    ACCEPT_ALL, ACCEPT_INTERACTIVE, ACCEPT_TOP, ALL_DISCHARGED, STALLED,
    discover,
)
from .model import Machine, check_model, compose_pair
from .oracle import entails, generate_obligations, po_to_json, verdict_to_json
from .parser import ParseError, parse_model
from .simulator import read_trace, simulate, trace_text

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_STALLED = 3
EXIT_BUDGET = 4


def _load_machine(path: str) -> Machine:
    try:
        machine = parse_model(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SystemExit2(f"{path}: no such file")
    except ParseError as e:
        raise SystemExit2(f"{path}:{e}")
    diags = check_model(machine)
    if diags:
        msg = "\n".join(f"{path}: {d}" for d in diags)
        raise SystemExit2(msg)
    return machine


class SystemExit2(Exception):
    pass


def _machine_for(args) -> Machine:
    if getattr(args, "model", None):
        return _load_machine(args.model)
    abstract = _load_machine(args.abstract)
    concrete = _load_machine(args.concrete)
    return compose_pair(abstract, concrete)


def cmd_simulate(args) -> int:
    machine = _machine_for(args)
    trace = simulate(machine, args.seed, args.runs, args.depth)
    text = trace_text(trace, machine)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    deadlocks = 0
    print(f"simulated {machine.name}: {len(trace.snapshots)} distinct states "
          f"(seed={args.seed}, runs={args.runs}, depth={args.depth})",
          file=sys.stderr)
    return EXIT_OK


def cmd_pos(args) -> int:
    abstract = _load_machine(args.abstract)
    concrete = _load_machine(args.concrete)
    pair = compose_pair(abstract, concrete)
    pos = generate_obligations(abstract, concrete)
    rows = []
    out = []
    for po in pos:
        v = entails(po.hypotheses, po.goal, po.free_vars, pair, args.cap)
        status = {"valid": "valid", "counterexample": "failed",
                  "unknown_sampled": "unknown"}[v.status]
        rows.append((po.label, status))
        entry = po_to_json(po)
        entry["verdict"] = verdict_to_json(v)
        out.append(entry)
    if args.output:
        Path(args.output).write_text(json.dumps(out, indent=2) + "\n",
                                     encoding="utf-8")
    width = max((len(r[0]) for r in rows), default=5)
    for label, status in rows:
        print(f"{label:<{width}}  {status}")
    failed = sum(1 for _, s in rows if s == "failed")
    print(f"{len(rows)} obligations, {failed} failed", file=sys.stderr)
    return EXIT_OK


def cmd_discover(args) -> int:
    abstract = _load_machine(args.abstract)
    concrete = _load_machine(args.concrete)
    trace = read_trace(args.trace)
    pair = compose_pair(abstract, concrete)
    if trace.machine_name not in (concrete.name, pair.name):
        raise SystemExit2(
            f"trace was recorded for {trace.machine_name}, not "
            f"{pair.name} or {concrete.name}")
    report = discover(
        abstract, concrete, trace,
        budget=args.steps, max_iterations=args.max_iters, cap=args.cap,
        accept_policy=args.accept, explain=args.explain,
        record_timing=not args.no_timing,
    )
    if args.output:
        Path(args.output).write_text(report.text(), encoding="utf-8")
    for it in report.iterations:
        print(f"iteration {it.index}: {len(it.failed)} failed obligations, "
              f"rules={','.join(it.rules)}")
        for tier in ("goal", "hypothesis"):
            if tier in it.stages:
                s = it.stages[tier]
                print(f"  {tier}: anchored={s['anchored']} "
                      f"disjoint={s['variable_disjoint']} "
                      f"general={s['most_general']} "
                      f"discharging={s['discharging']}")
        for acc in it.accepted:
            print(f"  accepted: {acc['predicate']}")
    print(f"status: {report.status}")
    if report.invariants:
        print("invariant block:")
        for i, inv in enumerate(report.invariants):
            print(f"  invariant {inv['label']}: {inv['predicate']}")
    if report.status == ALL_DISCHARGED:
        return EXIT_OK
    if report.status == STALLED:
        return EXIT_STALLED
    return EXIT_BUDGET


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="invmine",
        description="Discover refinement invariants from simulation traces.")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="animate a model into a trace file")
    sim.add_argument("--model", help="single model file")
    sim.add_argument("--abstract", help="abstract model (pair animation)")
    sim.add_argument("--concrete", help="concrete model (pair animation)")
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--runs", type=int, default=10)
    sim.add_argument("--depth", type=int, default=20)
    sim.add_argument("-o", "--output")
    sim.set_defaults(fn=cmd_simulate)

    pos = sub.add_parser("pos", help="generate and check proof obligations")
    pos.add_argument("--abstract", required=True)
    pos.add_argument("--concrete", required=True)
    pos.add_argument("--cap", type=int, default=1_000_000)
    pos.add_argument("-o", "--output")
    pos.set_defaults(fn=cmd_pos)

    disc = sub.add_parser("discover", help="run the invariant discovery loop")
    disc.add_argument("--abstract", required=True)
    disc.add_argument("--concrete", required=True)
    disc.add_argument("--trace", required=True)
    disc.add_argument("--steps", type=int, default=1000,
                      help="theory formation step budget")
    disc.add_argument("--max-iters", type=int, default=5)
    disc.add_argument("--cap", type=int, default=1_000_000,
                      help="oracle enumeration/sampling cap")
    disc.add_argument("--accept", choices=[ACCEPT_INTERACTIVE, ACCEPT_TOP,
                                           ACCEPT_ALL], default=ACCEPT_TOP)
    disc.add_argument("--explain", action="store_true",
                      help="record per-conjecture audit entries")
    disc.add_argument("--no-timing", action="store_true",
                      help="omit wall-clock data from the report")
    disc.add_argument("-o", "--output")
    disc.set_defaults(fn=cmd_discover)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "simulate" and not (
            args.model or (args.abstract and args.concrete)):
        ap.error("simulate needs --model or both --abstract and --concrete")
    try:
        return args.fn(args)
    except SystemExit2 as e:
        print(str(e), file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
