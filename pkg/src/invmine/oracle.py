"""Proof obligations and the finite-domain entailment oracle.

Guard-strengthening (GRD) obligations say concrete guards imply the
refined abstract guard; invariant (INV/INIT) obligations say events and
initialisation preserve/establish each concrete invariant. Sequents are
decided by exhaustive enumeration of free-variable valuations, with two
rescue strategies for spaces above the cap: eliminating variables that are
defined by an equality hypothesis, then seeded random sampling.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from dataclasses import dataclass, field

from .model import (
    Action, Labelled, Machine, ModelError, action_substitution, shape_text,
)
from .parser import parse_predicate
from .semantics import (
    Domain, EvalError, eval_predicate, free_domain, value_from_json,
    value_text, value_to_json,
)
from .syntax import Compare, Node, Var, VarShape, free_vars, substitute

GRD = "GRD"
INV = "INV"
INIT = "INIT"

INIT_EVENT = "INITIALISATION"


@dataclass(frozen=True)
class PO:
    """A sequent `hypotheses |- goal` with its provenance."""

    label: str
    kind: str
    event: str
    hypotheses: tuple[Node, ...]
    goal: Node
    free_vars: tuple[tuple[str, object], ...]   # (name, sort-name or VarShape)


@dataclass(frozen=True)
class Verdict:
    status: str                     # "valid" | "counterexample" | "unknown_sampled"
    valuation: dict | None = None   # for counterexample
    passed: int = 0                 # for unknown_sampled
    budget: int = 0

    @property
    def is_valid(self) -> bool:
        return self.status == "valid"

    @property
    def is_failed(self) -> bool:
        return self.status == "counterexample"


VALID = Verdict("valid")


# ---------------------------------------------------------------------------
# Obligation generation

def generate_obligations(abstract: Machine, concrete: Machine) -> list[PO]:
    """Deterministic GRD/INV/INIT obligations for a refinement pair.

    Hypotheses for event obligations are the concrete guards, both
    machines' invariants, and the axioms; the goal of a GRD obligation is
    an abstract guard (parameters identified by name), and the goal of an
    INV obligation is the invariant under the combined post-state
    substitution of the concrete event and its refined abstract event.
    """
    pos: list[PO] = []
    axioms = tuple(ax.pred for ax in abstract.context.axioms) + tuple(
        ax.pred for ax in concrete.context.axioms
        if ax not in abstract.context.axioms)

    state_frees = tuple((n, s) for n, s in abstract.variables) + tuple(
        (n, s) for n, s in concrete.variables
        if abstract.var_shape(n) is None)

    init_map = action_substitution(concrete, concrete.init)
    for act in abstract.init:
        if act.var not in init_map:
            init_map.update(action_substitution(abstract, (act,)))
    for inv in concrete.invariants:
        pos.append(PO(
            label=f"{INIT_EVENT}/{inv.label}/INIT",
            kind=INIT,
            event=INIT_EVENT,
            hypotheses=axioms,
            goal=substitute(inv.pred, init_map),
            free_vars=(),
        ))

    for ce in concrete.events:
        ae = None
        if ce.refines is not None:
            ae = abstract.event(ce.refines)
            if ae is None:
                raise ModelError(
                    f"event {ce.name} refines unknown abstract event {ce.refines}")
            cparams = dict(ce.params)
            for pname, psort in ae.params:
                if cparams.get(pname) != psort:
                    raise ModelError(
                        f"abstract parameter {pname}:{psort} of {ae.name} not "
                        f"present in {ce.name}")
        frees = tuple(ce.params) + state_frees
        hyps = (tuple(g.pred for g in ce.guards)
                + tuple(i.pred for i in concrete.invariants)
                + tuple(i.pred for i in abstract.invariants)
                + axioms)
        if ae is not None:
            for g in ae.guards:
                pos.append(PO(
                    label=f"{ce.name}/{g.label}/GRD",
                    kind=GRD,
                    event=ce.name,
                    hypotheses=hyps,
                    goal=g.pred,
                    free_vars=frees,
                ))
        combined: tuple[Action, ...] = ce.actions + (ae.actions if ae else ())
        subst = action_substitution(concrete, combined)
        for inv in concrete.invariants:
            pos.append(PO(
                label=f"{ce.name}/{inv.label}/INV",
                kind=INV,
                event=ce.name,
                hypotheses=hyps,
                goal=substitute(inv.pred, subst),
                free_vars=frees,
            ))
    return pos


# ---------------------------------------------------------------------------
# The entailment oracle

def _hyp_holds(hyp: Node, env: dict, machine: Machine) -> bool:
    """A hypothesis that fails to evaluate is treated as unsatisfied."""
    try:
        return eval_predicate(hyp, env, machine)
    except EvalError:
        return False


def _goal_holds(goal: Node, env: dict, machine: Machine) -> bool:
    """A goal that fails to evaluate counts as false."""
    try:
        return eval_predicate(goal, env, machine)
    except EvalError:
        return False


def _space_size(domains: list[Domain]) -> int:
    size = 1
    for d in domains:
        size *= d.size
    return size


def _find_definitions(hyps, names):
    """Hypotheses of the form `v = E` (or `E = v`) defining v, topologically.

    Returns (order, defs) where defs maps a variable to its defining
    expression and order lists defined variables so each definition only
    references earlier-defined or surviving variables.
    """
    candidates: dict[str, Node] = {}
    for h in hyps:
        if not (isinstance(h, Compare) and h.op == "eq"):
            continue
        for var_side, expr_side in ((h.left, h.right), (h.right, h.left)):
            if isinstance(var_side, Var) and var_side.name in names \
                    and var_side.name not in candidates \
                    and var_side.name not in free_vars(expr_side):
                candidates[var_side.name] = expr_side
                break
    # keep only definitions whose dependencies resolve without cycles
    order: list[str] = []
    placed: set[str] = set()
    changed = True
    while changed:
        changed = False
        for v, e in candidates.items():
            if v in placed:
                continue
            deps = free_vars(e) & frozenset(candidates) - placed
            if not deps - {v}:
                order.append(v)
                placed.add(v)
                changed = True
    return order, {v: candidates[v] for v in order}


def _seed_for(hyps, goal, frees, cap: int) -> int:
    text = "|".join(h.text() for h in hyps) + "#" + goal.text() + "#" + \
        ",".join(f"{n}" for n, _ in frees) + f"#{cap}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def entails(hyps, goal: Node, frees, machine: Machine, cap: int = 1_000_000,
            ) -> Verdict:
    """Decide `hyps |- goal` over all type-consistent valuations of frees.

    Exact (enumeration) when the valuation space fits under `cap`,
    otherwise tries equality-definition elimination to shrink the space,
    and finally falls back to `cap` seeded random samples. Counterexample
    valuations always satisfy every hypothesis and falsify the goal.
    """
    hyps = tuple(hyps)
    for h in hyps:
        if h == goal:
            return VALID

    occurring = set()
    for h in hyps:
        occurring |= free_vars(h)
    occurring |= free_vars(goal)

    base_env: dict = {}
    active: list[tuple[str, object]] = []
    for name, spec in frees:
        if name in occurring:
            active.append((name, spec))
        else:
            base_env[name] = free_domain(machine, spec).first()

    domains = [free_domain(machine, spec) for _, spec in active]
    space = _space_size(domains)
    if space <= cap:
        return _exhaustive(hyps, goal, active, domains, base_env, machine)

    order, defs = _find_definitions(hyps, {n for n, _ in active})
    if defs:
        survivors = [(n, s) for n, s in active if n not in defs]
        sdomains = [free_domain(machine, spec) for _, spec in survivors]
        elim_domains = {n: free_domain(machine, spec)
                        for n, spec in active if n in defs}
        if _space_size(sdomains) <= cap:
            return _exhaustive(hyps, goal, survivors, sdomains, base_env,
                               machine, order, defs, elim_domains)
        return _sampled(hyps, goal, survivors, sdomains, base_env, machine,
                        cap, order, defs, elim_domains,
                        seed=_seed_for(hyps, goal, frees, cap))
    return _sampled(hyps, goal, active, domains, base_env, machine, cap,
                    [], {}, {}, seed=_seed_for(hyps, goal, frees, cap))


def _compute_defined(env: dict, order, defs, elim_domains, machine) -> bool:
    """Fill eliminated variables into env; False if any value is ill-shaped."""
    for v in order:
        try:
            val = _eval_defined(defs[v], env, machine)
        except EvalError:
            return False
        if not elim_domains[v].contains(val):
            return False
        env[v] = val
    return True


def _eval_defined(expr: Node, env: dict, machine: Machine):
    from .semantics import eval_expr
    return eval_expr(expr, env, machine)


def _exhaustive(hyps, goal, active, domains, base_env, machine,
                order=(), defs=None, elim_domains=None) -> Verdict:
    defs = defs or {}
    names = [n for n, _ in active]

    # evaluate each hypothesis as soon as its variables are bound
    known = set(base_env) | set(defs)
    stages: list[list[Node]] = [[] for _ in range(len(names) + 1)]
    late: list[Node] = []
    for h in hyps:
        need = free_vars(h) - known
        depth = 0
        for i, n in enumerate(names):
            if n in need:
                depth = i + 1
        if free_vars(h) & set(defs):
            late.append(h)
        else:
            stages[depth].append(h)

    env = dict(base_env)

    def walk(depth: int):
        if depth == len(names):
            if defs:
                scratch = dict(env)
                if not _compute_defined(scratch, order, defs, elim_domains,
                                        machine):
                    return None
                for h in late:
                    if not _hyp_holds(h, scratch, machine):
                        return None
                if not _goal_holds(goal, scratch, machine):
                    return dict(scratch)
                return None
            if not _goal_holds(goal, env, machine):
                return dict(env)
            return None
        name = names[depth]
        for value in domains[depth].iterate():
            env[name] = value
            ok = True
            for h in stages[depth + 1]:
                if not _hyp_holds(h, env, machine):
                    ok = False
                    break
            if ok:
                found = walk(depth + 1)
                if found is not None:
                    return found
        env.pop(name, None)
        return None

    # stage-0 hypotheses involve no active variables at all
    for h in stages[0]:
        if not _hyp_holds(h, env, machine):
            return VALID
    cex = walk(0)
    if cex is None:
        return VALID
    return Verdict("counterexample", valuation=cex)


def _sampled(hyps, goal, active, domains, base_env, machine, cap,
             order, defs, elim_domains, seed: int) -> Verdict:
    rng = random.Random(seed)
    names = [n for n, _ in active]
    passed = 0
    for _ in range(cap):
        env = dict(base_env)
        for n, d in zip(names, domains):
            env[n] = d.sample(rng)
        if defs and not _compute_defined(env, order, defs, elim_domains,
                                         machine):
            continue
        ok = True
        for h in hyps:
            if not _hyp_holds(h, env, machine):
                ok = False
                break
        if not ok:
            continue
        if not _goal_holds(goal, env, machine):
            return Verdict("counterexample", valuation=env)
        passed += 1
    return Verdict("unknown_sampled", passed=passed, budget=cap)


def check_discharge(po: PO, candidates, machine: Machine,
                    cap: int = 1_000_000) -> Verdict:
    """entails with the candidate predicates added to the hypotheses."""
    return entails(tuple(po.hypotheses) + tuple(candidates), po.goal,
                   po.free_vars, machine, cap)


# ---------------------------------------------------------------------------
# PO JSON interchange

def po_to_json(po: PO) -> dict:
    return {
        "label": po.label,
        "kind": po.kind,
        "event": po.event,
        "frees": [{"name": n, "sort": s if isinstance(s, str) else shape_text(s)}
                  for n, s in po.free_vars],
        "hypotheses": [h.text() for h in po.hypotheses],
        "goal": po.goal.text(),
    }


def pos_to_json(pos) -> str:
    return json.dumps([po_to_json(p) for p in pos], indent=2) + "\n"


def po_from_json(data: dict, machine: Machine) -> PO:
    from .parser import _parse_shape, _Parser, tokenize
    frees = []
    for f in data["frees"]:
        text = f["sort"]
        p = _Parser(tokenize(text))
        shape = _parse_shape(p)
        if shape.kind == "scalar" and " " not in text:
            frees.append((f["name"], shape.sort))
        else:
            frees.append((f["name"], shape))
    extra = [n for n, _ in frees]
    return PO(
        label=data["label"],
        kind=data["kind"],
        event=data["event"],
        hypotheses=tuple(parse_predicate(h, machine, extra)
                         for h in data["hypotheses"]),
        goal=parse_predicate(data["goal"], machine, extra),
        free_vars=tuple(frees),
    )


def verdict_to_json(v: Verdict) -> dict:
    if v.is_valid:
        return {"status": "valid"}
    if v.is_failed:
        return {"status": "counterexample",
                "valuation": {k: value_to_json(val)
                              for k, val in sorted(v.valuation.items())}}
    return {"status": "unknown_sampled", "passed": v.passed, "budget": v.budget}
