"""Proof-failure heuristics: configure formation, then prune conjectures.

Failed obligations drive everything. Concepts named in failed goals get
the top agenda tier, hypothesis concepts the middle tier; rule selection
reads the syntax of the failed sequents. The selection cascade then keeps
conjectures anchored in prioritised concepts, with variable-disjoint
sides, maximally general, actually discharging a failure, and finally
ranks survivors by how few fresh failures they introduce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .concepts import (
    Concept, GOAL, HYPOTHESIS, OTHER, STATE_COL, core_concepts,
    lineage_base, lineage_leaves, lineage_text,
)
from .formation import (
    ARITH_OPS, EQUIVALENCE, IMPLICATION, NON_EXISTENCE, Conjecture,
    DisjunctSeed, REL_OPS, RuleConfig, SplitSeed, Theory, form_theory,
)
from .model import Labelled, Machine, compose_pair
from .oracle import PO, Verdict, check_discharge, entails, generate_obligations
from .semantics import EvalError, eval_predicate
from .simulator import Trace
from .syntax import (
    AtomLit, BinOp, Compare, ConstRef, Maplet, Node, Var, atoms_used,
    comparison_ops, const_refs, free_vars, uses_arithmetic,
)
from .translate import (
    InvariantSyntax, TranslationUnsupported, conjecture_to_invariant,
)

ACCEPT_TOP = "top"
ACCEPT_ALL = "all"
ACCEPT_INTERACTIVE = "interactive"

ALL_DISCHARGED = "all_discharged"
STALLED = "stalled"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class PrioritizedConcepts:
    goal_tier: tuple[str, ...]
    hyp_tier: tuple[str, ...]
    other_tier: tuple[str, ...]
    noncore_seeds: tuple = ()


@dataclass
class CandidateInvariant:
    conjecture: Conjecture
    syntax: InvariantSyntax
    discharges: frozenset[str]
    new_failures: int = -1
    approximate: bool = False
    iteration: int = 0

    @property
    def predicate(self) -> Node:
        return self.syntax.predicate


# ---------------------------------------------------------------------------
# Configuration heuristics

def _concept_names_in(pred: Node, machine: Machine) -> list[str]:
    """Core concept names a predicate mentions, in a stable order.

    Variables name their own concepts; atom literals and scalar constants
    contribute their carrier-set concept; set/relation/integer constants
    contribute their own table concept.
    """
    out: list[str] = []

    def add(name: str):
        if name not in out:
            out.append(name)

    for v in sorted(free_vars(pred)):
        if machine.var_shape(v) is not None:
            add(v)
    for a, sort in sorted(atoms_used(pred)):
        add(sort)
    for cname in sorted(const_refs(pred)):
        for c in machine.context.constants:
            if c.name == cname:
                if c.shape.kind == "scalar":
                    add(c.shape.sort)
                else:
                    add(cname)
    return out


def prioritize_from_failures(failed: list[PO], machine: Machine,
                             ) -> PrioritizedConcepts:
    """Tier core concepts by where they occur in the failed sequents, and
    derive non-core seed concepts from hypothesis patterns.

    Seeds: `x |-> K : f` suggests splitting f's table at K; `x : S1 \\/ S2`
    suggests the union concept (right-hand sides only; event parameters
    are not concepts and contribute nothing).
    """
    goal: list[str] = []
    hyp: list[str] = []
    for po in failed:
        for name in _concept_names_in(po.goal, machine):
            if name not in goal:
                goal.append(name)
    for po in failed:
        for h in po.hypotheses:
            for name in _concept_names_in(h, machine):
                if name not in goal and name not in hyp:
                    hyp.append(name)

    seeds: list = []

    def add_seed(seed):
        if seed not in seeds:
            seeds.append(seed)

    for po in failed:
        for h in po.hypotheses:
            _collect_seeds(h, machine, add_seed)

    all_names = [STATE_COL]
    all_names += [s.name for s in machine.context.sorts]
    all_names += [n for n, _ in machine.variables]
    all_names += [c.name for c in machine.context.constants
                  if c.shape.kind != "scalar"]
    other = [n for n in all_names if n not in goal and n not in hyp]
    return PrioritizedConcepts(tuple(goal), tuple(hyp), tuple(other),
                               tuple(seeds))


def _collect_seeds(h: Node, machine: Machine, add_seed) -> None:
    if not (isinstance(h, Compare) and h.op == "in"):
        return
    lhs, rhs = h.left, h.right
    if isinstance(lhs, Maplet) and isinstance(rhs, Var):
        shape = machine.var_shape(rhs.name)
        if shape is not None and shape.kind == "relation":
            if isinstance(lhs.right, AtomLit) and \
                    lhs.right.sort == shape.range_sort:
                add_seed(SplitSeed(rhs.name, 2, lhs.right.name))
            elif isinstance(lhs.left, AtomLit) and \
                    lhs.left.sort == shape.domain_sort:
                add_seed(SplitSeed(rhs.name, 1, lhs.left.name))
    if isinstance(rhs, BinOp) and rhs.op == "union" \
            and isinstance(rhs.left, Var) and isinstance(rhs.right, Var):
        if machine.var_shape(rhs.left.name) is not None \
                and machine.var_shape(rhs.right.name) is not None:
            add_seed(DisjunctSeed(rhs.left.name, rhs.right.name))


def rules_from_failures(failed: list[PO], machine: Machine) -> RuleConfig:
    """compose/disjunct/negate always; split when set members occur,
    arithmetic/numrelation when their operators occur in the sequents."""
    rules = {"compose", "disjunct", "negate"}
    split_values: dict = {}
    arith: set[str] = set()
    rels: set[str] = set()
    for po in failed:
        for pred in list(po.hypotheses) + [po.goal]:
            for _, sort in atoms_used(pred):
                s = machine.context.sort(sort)
                if s is not None and not s.is_int_range:
                    split_values[sort] = list(s.values())
            if uses_arithmetic(pred):
                arith |= _arith_ops_in(pred)
            rels |= comparison_ops(pred)
    if split_values:
        rules.add("split")
    if arith:
        rules.add("arithmetic")
    if rels:
        rules.add("numrelation")
    return RuleConfig(
        enabled_rules=frozenset(rules),
        split_values=split_values,
        arithmetic_ops=frozenset(arith),
        relations=frozenset(rels),
    )


def _arith_ops_in(node: Node) -> set[str]:
    from .syntax import children
    out: set[str] = set()
    if isinstance(node, BinOp) and node.op in ARITH_OPS:
        out.add(node.op)
    for c in children(node):
        out |= _arith_ops_in(c)
    return out


# ---------------------------------------------------------------------------
# Selection cascade

@dataclass
class AuditLog:
    entries: list = field(default_factory=list)

    def drop(self, tier: str, stage: str, conj: Conjecture, reason: str):
        self.entries.append({"tier": tier, "stage": stage,
                             "conjecture": list(conj.pair_ids()),
                             "kind": conj.kind, "action": "dropped",
                             "reason": reason})

    def to_list(self):
        return list(self.entries)


def select_anchored(conjs, theory: Theory, pc: PrioritizedConcepts,
                    tier: str, audit: AuditLog | None = None):
    """Keep conjectures anchored in a prioritised tier concept.

    An equivalence/implication side anchors a tier concept when its
    lineage is rooted in exactly that one core concept; non-existence
    conjectures pass when any lineage leaf is a tier concept.
    """
    names = set(pc.goal_tier if tier == GOAL else pc.hyp_tier)
    reg = theory.concepts
    out = []
    for c in conjs:
        if c.kind == NON_EXISTENCE:
            if lineage_leaves(reg[c.lhs], reg) & names:
                out.append(c)
            elif audit:
                audit.drop(tier, "anchored", c, "no prioritised concept in lineage")
            continue
        bl = lineage_base(reg[c.lhs], reg)
        br = lineage_base(reg[c.rhs], reg)
        if (bl in names) or (br in names):
            out.append(c)
        elif audit:
            audit.drop(tier, "anchored", c, "neither side rooted in tier concept")
    return out


def _side_vars(concept: Concept, theory: Theory, machine: Machine,
               ) -> frozenset[str]:
    return frozenset(n for n in lineage_leaves(concept, theory.concepts)
                     if machine.var_shape(n) is not None)


def select_variable_disjoint(conjs, theory: Theory, machine: Machine,
                             tier: str = "", audit: AuditLog | None = None):
    """Keep conjectures whose sides share no model variables."""
    out = []
    for c in conjs:
        if c.kind == NON_EXISTENCE:
            out.append(c)
            continue
        lv = _side_vars(theory.concepts[c.lhs], theory, machine)
        rv = _side_vars(theory.concepts[c.rhs], theory, machine)
        if lv & rv:
            if audit:
                audit.drop(tier, "variable_disjoint", c,
                           f"sides share {sorted(lv & rv)}")
        else:
            out.append(c)
    return out


def _state_frees(machine: Machine, names) -> tuple:
    return tuple((n, s) for n, s in machine.variables if n in names)


def _translate_all(conjs, theory: Theory, machine: Machine):
    table: dict = {}
    for c in conjs:
        try:
            table[c.key()] = conjecture_to_invariant(c, theory, machine)
        except TranslationUnsupported as e:
            table[c.key()] = e
    return table


def select_most_general(conjs, theory: Theory, machine: Machine,
                        cap: int = 1_000_000, tier: str = "",
                        audit: AuditLog | None = None,
                        translations: dict | None = None):
    """Drop conjectures semantically entailed by another kept conjecture.

    Entailment is decided by the finite-domain oracle; unknown verdicts
    count as non-entailment (conservative). Mutual entailment keeps the
    conjecture with the smaller concept-id pair.
    """
    if translations is None:
        translations = _translate_all(conjs, theory, machine)
    ordered = sorted(conjs, key=lambda c: c.pair_ids())

    # conjectures translating to the same predicate are mutually entailed:
    # keep only the lowest concept-id pair of each group
    reps: dict[str, Conjecture] = {}
    survivors = []
    for c in ordered:
        syntax = translations.get(c.key())
        if not isinstance(syntax, InvariantSyntax):
            survivors.append(c)       # untranslatable: cannot be compared
            continue
        text = syntax.predicate.text()
        if text in reps:
            if audit:
                audit.drop(tier, "most_general", c,
                           f"entailed by {reps[text].pair_ids()} (same predicate)")
            continue
        reps[text] = c
        survivors.append(c)

    pred_vars: dict = {}
    for c in survivors:
        syntax = translations.get(c.key())
        if isinstance(syntax, InvariantSyntax):
            pred_vars[c.key()] = free_vars(syntax.predicate)

    verdicts: dict = {}

    def entailed(by: Conjecture, what: Conjecture) -> bool:
        if by.key() not in pred_vars or what.key() not in pred_vars:
            return False
        # a conjecture over extra variables is (quasi-)never entailed by one
        # that does not mention them
        if not pred_vars[what.key()] <= pred_vars[by.key()]:
            return False
        key = (by.key(), what.key())
        if key in verdicts:
            return verdicts[key]
        p2 = translations[by.key()].predicate
        p1 = translations[what.key()].predicate
        names = pred_vars[by.key()] | pred_vars[what.key()]
        v = entails([p2], p1, _state_frees(machine, names), machine, cap)
        verdicts[key] = v.is_valid
        return v.is_valid

    out = []
    for c1 in survivors:
        drop_reason = None
        for c2 in survivors:
            if c2.key() == c1.key():
                continue
            if entailed(c2, c1):
                if entailed(c1, c2) and c1.pair_ids() < c2.pair_ids():
                    continue
                drop_reason = f"entailed by {c2.pair_ids()}"
                break
        if drop_reason is None:
            out.append(c1)
        elif audit:
            audit.drop(tier, "most_general", c1, drop_reason)
    return out


def select_discharging(conjs, theory: Theory, machine: Machine,
                       failed: list[tuple[PO, Verdict]],
                       cap: int = 1_000_000, tier: str = "",
                       audit: AuditLog | None = None,
                       translations: dict | None = None,
                       ) -> list[CandidateInvariant]:
    """Keep conjectures that discharge at least one failed obligation.

    A candidate discharges an obligation when the oracle no longer finds a
    counterexample with the candidate added to the hypotheses. The stored
    counterexample of the failure is re-tested first: if the candidate
    holds on it, the obligation is still refuted and the full check is
    skipped.
    """
    if translations is None:
        translations = _translate_all(conjs, theory, machine)
    out = []
    for c in sorted(conjs, key=lambda c: c.pair_ids()):
        syntax = translations.get(c.key())
        if not isinstance(syntax, InvariantSyntax):
            if audit:
                audit.drop(tier, "discharging", c, f"untranslatable: {syntax}")
            continue
        pred = syntax.predicate
        discharges = set()
        for po, verdict in failed:
            if verdict.valuation is not None:
                try:
                    if eval_predicate(pred, verdict.valuation, machine):
                        continue   # old counterexample survives the candidate
                except EvalError:
                    pass
            v = check_discharge(po, [pred], machine, cap)
            if not v.is_failed:
                discharges.add(po.label)
        if discharges:
            out.append(CandidateInvariant(c, syntax, frozenset(discharges)))
        elif audit:
            audit.drop(tier, "discharging", c, "discharges no failed obligation")
    return out


def rank_candidates(cands: list[CandidateInvariant], abstract: Machine,
                    concrete: Machine, machine: Machine,
                    cap: int = 1_000_000,
                    ) -> list[CandidateInvariant]:
    """Order candidates by (discharges desc, new failures asc, concept ids).

    New failures are counted on the obligations that adding the candidate
    introduces (its own INIT/INV obligations). Existing valid obligations
    only gain a hypothesis, which cannot invalidate them.
    """
    existing = {po.label for po in generate_obligations(abstract, concrete)}
    for cand in cands:
        trial = concrete.with_invariant("cand", cand.predicate)
        fresh = [po for po in generate_obligations(abstract, trial)
                 if po.label not in existing]
        failures = 0
        approx = False
        for po in fresh:
            v = entails(po.hypotheses, po.goal, po.free_vars, machine, cap)
            if v.is_failed:
                failures += 1
            elif not v.is_valid:
                approx = True
        cand.new_failures = failures
        cand.approximate = approx
    cands.sort(key=lambda c: (-len(c.discharges), c.new_failures,
                              c.conjecture.pair_ids()))
    return cands


# ---------------------------------------------------------------------------
# Acceptance policies

def accept_candidates(ranked: list[CandidateInvariant],
                      failed: list[tuple[PO, Verdict]], policy: str,
                      chooser=None) -> list[CandidateInvariant]:
    if policy == ACCEPT_ALL:
        return list(ranked)
    if policy == ACCEPT_INTERACTIVE:
        return _interactive(ranked, chooser)
    # per-obligation top tie: for each failed obligation take every
    # candidate tied with the best profile among its dischargers
    chosen: list[CandidateInvariant] = []
    for po, _ in failed:
        dischargers = [c for c in ranked if po.label in c.discharges]
        if not dischargers:
            continue
        best = (-len(dischargers[0].discharges), dischargers[0].new_failures)
        for c in dischargers:
            profile = (-len(c.discharges), c.new_failures)
            if profile != best:
                break
            if all(c.conjecture.key() != x.conjecture.key() for x in chosen):
                chosen.append(c)
    return chosen


def _interactive(ranked, chooser):
    if chooser is None:
        chooser = input
    print("candidate invariants:")
    for i, c in enumerate(ranked):
        print(f"  [{i}] {c.syntax.display_settheoretic}   "
              f"discharges={sorted(c.discharges)} new_failures={c.new_failures}")
    reply = chooser("accept which (comma-separated indices, empty for none)? ")
    picks = []
    for part in reply.split(","):
        part = part.strip()
        if part.isdigit() and int(part) < len(ranked):
            picks.append(ranked[int(part)])
    return picks


# ---------------------------------------------------------------------------
# Discovery driver

@dataclass
class IterationReport:
    index: int
    failed: list[str]
    rules: list[str]
    split_values: dict
    goal_tier: list[str]
    hyp_tier: list[str]
    seeds: list[str]
    steps_used: int
    concepts_formed: int
    conjectures_total: int
    stages: dict
    candidates: list[dict]
    accepted: list[dict]

    def to_json(self):
        return self.__dict__.copy()


@dataclass
class DiscoveryReport:
    status: str
    iterations: list[IterationReport]
    invariants: list[dict]
    audit: list = field(default_factory=list)
    timing: dict | None = None

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "iterations": [it.to_json() for it in self.iterations],
            "invariants": self.invariants,
        }
        if self.audit:
            out["audit"] = self.audit
        if self.timing is not None:
            out["timing"] = self.timing
        return out

    def text(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def _stage_counts(conjs) -> list[int]:
    eq = sum(1 for c in conjs if c.kind == EQUIVALENCE)
    im = sum(1 for c in conjs if c.kind == IMPLICATION)
    ne = sum(1 for c in conjs if c.kind == NON_EXISTENCE)
    return [eq, im, ne]


def _cand_counts(cands) -> list[int]:
    return _stage_counts([c.conjecture for c in cands])


def run_selection(theory: Theory, pc: PrioritizedConcepts, tier: str,
                  failed, machine: Machine, cap: int, audit: AuditLog,
                  stages: dict) -> list[CandidateInvariant]:
    s1 = select_anchored(theory.conjectures, theory, pc, tier, audit)
    s2 = select_variable_disjoint(s1, theory, machine, tier, audit)
    translations = _translate_all(s2, theory, machine)
    s3 = select_most_general(s2, theory, machine, cap, tier, audit, translations)
    s4 = select_discharging(s3, theory, machine, failed, cap, tier, audit,
                            translations)
    stages[tier] = {
        "anchored": _stage_counts(s1),
        "variable_disjoint": _stage_counts(s2),
        "most_general": _stage_counts(s3),
        "discharging": _cand_counts(s4),
    }
    return s4


def discover(abstract: Machine, concrete: Machine, trace: Trace, *,
             budget: int = 1000, max_iterations: int = 5,
             cap: int = 1_000_000, accept_policy: str = ACCEPT_TOP,
             explain: bool = False, negate_cap: int = 10 ** 6,
             chooser=None, record_timing: bool = False) -> DiscoveryReport:
    """The full loop: check obligations, form a theory from the trace,
    select candidates, accept, repeat until nothing fails."""
    import time
    t0 = time.perf_counter()
    pair = compose_pair(abstract, concrete)
    cores = core_concepts(pair, trace)
    working = concrete
    accepted_all: list[CandidateInvariant] = []
    iterations: list[IterationReport] = []
    audit = AuditLog()
    status = BUDGET_EXHAUSTED

    for round_no in range(max_iterations + 1):
        pos = generate_obligations(abstract, working)
        failed: list[tuple[PO, Verdict]] = []
        for po in pos:
            v = entails(po.hypotheses, po.goal, po.free_vars, pair, cap)
            if v.is_failed:
                failed.append((po, v))
        if not failed:
            status = ALL_DISCHARGED
            break
        if round_no == max_iterations:
            status = BUDGET_EXHAUSTED
            break

        failed_pos = [po for po, _ in failed]
        pc = prioritize_from_failures(failed_pos, pair)
        cfg = rules_from_failures(failed_pos, pair)
        theory = form_theory(cores, cfg, budget, pc, negate_cap)

        stages: dict = {}
        candidates = run_selection(theory, pc, GOAL, failed, pair, cap,
                                   audit, stages)
        covered = set()
        for c in candidates:
            covered |= c.discharges
        if not candidates or any(po.label not in covered for po in failed_pos):
            extra = run_selection(theory, pc, HYPOTHESIS, failed, pair, cap,
                                  audit, stages)
            keys = {c.conjecture.key() for c in candidates}
            candidates += [c for c in extra if c.conjecture.key() not in keys]

        if not candidates:
            status = STALLED
            iterations.append(_iteration_report(
                round_no + 1, failed_pos, cfg, pc, theory, stages, [], []))
            break

        ranked = rank_candidates(candidates, abstract, working, pair, cap)
        chosen = accept_candidates(ranked, failed, accept_policy, chooser)
        if not chosen:
            status = STALLED
            iterations.append(_iteration_report(
                round_no + 1, failed_pos, cfg, pc, theory, stages, ranked, []))
            break
        for k, cand in enumerate(chosen):
            cand.iteration = round_no + 1
            working = working.with_invariant(f"disc_{round_no + 1}_{k}",
                                             cand.predicate)
        accepted_all.extend(chosen)
        iterations.append(_iteration_report(
            round_no + 1, failed_pos, cfg, pc, theory, stages, ranked, chosen))

    report = DiscoveryReport(
        status=status,
        iterations=iterations,
        invariants=[{
            "label": f"disc_{c.iteration}_{i}",
            "predicate": c.predicate.text(),
            "settheoretic": c.syntax.display_settheoretic,
            "quantified": c.syntax.display_quantified,
            "iteration": c.iteration,
        } for i, c in enumerate(accepted_all)],
        audit=audit.to_list() if explain else [],
        timing={"elapsed_seconds": round(time.perf_counter() - t0, 3)}
        if record_timing else None,
    )
    return report


def _iteration_report(index, failed_pos, cfg, pc, theory, stages, ranked,
                      chosen) -> IterationReport:
    def cand_json(c: CandidateInvariant) -> dict:
        return {
            "kind": c.conjecture.kind,
            "concepts": list(c.conjecture.pair_ids()),
            "lineage": _conj_lineage(c.conjecture, theory),
            "predicate": c.predicate.text(),
            "discharges": sorted(c.discharges),
            "new_failures": c.new_failures,
            "approximate": c.approximate,
            "step_found": c.conjecture.step_found,
        }

    return IterationReport(
        index=index,
        failed=[po.label for po in failed_pos],
        rules=sorted(cfg.enabled_rules),
        split_values={k: list(v) for k, v in sorted(cfg.split_values.items())},
        goal_tier=list(pc.goal_tier),
        hyp_tier=list(pc.hyp_tier),
        seeds=[s.text() for s in pc.noncore_seeds],
        steps_used=theory.steps_used,
        concepts_formed=len(theory.concepts),
        conjectures_total=len(theory.conjectures),
        stages=stages,
        candidates=[cand_json(c) for c in ranked],
        accepted=[cand_json(c) for c in chosen],
    )


def _conj_lineage(conj: Conjecture, theory: Theory) -> str:
    lhs = lineage_text(theory.concepts[conj.lhs], theory.concepts)
    if conj.rhs is None:
        return f"empty({lhs})"
    rhs = lineage_text(theory.concepts[conj.rhs], theory.concepts)
    arrow = "<=>" if conj.kind == EQUIVALENCE else "=>"
    return f"{lhs} {arrow} {rhs}"
