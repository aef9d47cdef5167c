"""Seeded random animation of a machine into a trace of state snapshots.

Walks choose uniformly among enabled (event, parameter-binding) pairs via
`random.Random(seed).randrange`, so a trace is a pure function of
(machine, seed, runs, depth) and can be replayed exactly.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass

from .model import Machine, action_substitution
from .semantics import (
    EvalError, eval_expr, eval_predicate, shape_domain, sort_domain,
    value_from_json, value_to_json,
)
from .syntax import Node


class SimulationError(Exception):
    """A snapshot violated a machine invariant or variable shape."""


@dataclass(frozen=True)
class StateSnapshot:
    state_id: str
    valuation: dict

    def key(self, machine: Machine) -> tuple:
        return tuple((n, self.valuation[n]) for n, _ in machine.variables)


@dataclass(frozen=True)
class Trace:
    machine_name: str
    seed: int
    runs: int
    depth: int
    snapshots: tuple[StateSnapshot, ...]

    @property
    def state_ids(self) -> tuple[str, ...]:
        return tuple(s.state_id for s in self.snapshots)


def enabled_events(machine: Machine, valuation: dict,
                   warnings: list | None = None):
    """All (event, binding) pairs whose guards hold, in canonical order."""
    out = []
    for ev in machine.events:
        domains = [sort_domain(machine, s).parts for _, s in ev.params]
        names = [n for n, _ in ev.params]
        for combo in itertools.product(*domains):
            env = dict(valuation)
            env.update(zip(names, combo))
            ok = True
            for g in ev.guards:
                try:
                    if not eval_predicate(g.pred, env, machine):
                        ok = False
                        break
                except EvalError as e:
                    if warnings is not None:
                        warnings.append(
                            f"{ev.name}{combo}: guard {g.label} failed to "
                            f"evaluate: {e}")
                    ok = False
                    break
            if ok:
                out.append((ev, dict(zip(names, combo))))
    return out


def _apply_event(machine: Machine, ev, binding: dict, valuation: dict) -> dict:
    env = dict(valuation)
    env.update(binding)
    subst = action_substitution(machine, ev.actions)
    new = dict(valuation)
    for var, expr in subst.items():
        new[var] = eval_expr(expr, env, machine)
    return new


def _check_snapshot(machine: Machine, valuation: dict, state_id: str) -> None:
    for name, shape in machine.variables:
        dom = shape_domain(machine, shape)
        if not dom.contains(valuation[name]):
            raise SimulationError(
                f"state {state_id}: variable {name} left its shape")
    for inv in machine.invariants:
        try:
            holds = eval_predicate(inv.pred, valuation, machine)
        except EvalError as e:
            raise SimulationError(
                f"state {state_id}: invariant {inv.label} failed to "
                f"evaluate: {e}") from None
        if not holds:
            raise SimulationError(
                f"state {state_id}: invariant {inv.label} violated")


def initial_valuation(machine: Machine) -> dict:
    env: dict = {}
    for act in machine.init:
        env[act.var] = eval_expr(act.expr, {}, machine)
    return env


def simulate(machine: Machine, seed: int, runs: int, depth: int) -> Trace:
    """Deterministic random walks; snapshots deduplicated globally."""
    rng = random.Random(seed)
    snapshots: list[StateSnapshot] = []
    seen: dict[tuple, str] = {}

    def record(valuation: dict) -> str:
        key = tuple((n, valuation[n]) for n, _ in machine.variables)
        if key in seen:
            return seen[key]
        sid = f"S{len(snapshots)}"
        _check_snapshot(machine, valuation, sid)
        snap = StateSnapshot(sid, dict(valuation))
        snapshots.append(snap)
        seen[key] = sid
        return sid

    for _ in range(runs):
        valuation = initial_valuation(machine)
        record(valuation)
        for _ in range(depth):
            pairs = enabled_events(machine, valuation)
            if not pairs:
                break
            ev, binding = pairs[rng.randrange(len(pairs))]
            valuation = _apply_event(machine, ev, binding, valuation)
            record(valuation)

    return Trace(machine.name, seed, runs, depth, tuple(snapshots))


# ---------------------------------------------------------------------------
# Trace files: one JSON header line, one JSON object per snapshot

def trace_text(trace: Trace, machine: Machine) -> str:
    lines = [json.dumps({"machine": trace.machine_name, "seed": trace.seed,
                         "runs": trace.runs, "depth": trace.depth})]
    order = [n for n, _ in machine.variables]
    for snap in trace.snapshots:
        lines.append(json.dumps({
            "state": snap.state_id,
            "vars": {n: value_to_json(snap.valuation[n]) for n in order},
        }))
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, path, machine: Machine) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace_text(trace, machine))


class TraceFormatError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def read_trace(path) -> Trace:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceFormatError("empty trace file", 1)
    try:
        header = json.loads(lines[0])
        machine_name = header["machine"]
        seed, runs, depth = header["seed"], header["runs"], header["depth"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise TraceFormatError(f"bad header: {e}", 1) from None
    snapshots = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            state = obj["state"]
            valuation = {k: value_from_json(v) for k, v in obj["vars"].items()}
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise TraceFormatError(f"bad snapshot: {e}", i) from None
        snapshots.append(StateSnapshot(state, valuation))
    return Trace(machine_name, seed, runs, depth, tuple(snapshots))
