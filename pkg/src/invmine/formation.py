"""Theory formation: production rules applied over a prioritised agenda.

One formation step is one attempted (rule, parameters, operands)
application. New tables are compared against existing same-signature
tables after every step: equal tables yield equivalence conjectures,
strict containment yields implications, empty results yield non-existence
conjectures. Steps whose table duplicates an existing concept still
register conjectures but the duplicate is excluded from the agenda.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .concepts import (
    Concept, CoreLineage, GOAL, HYPOTHESIS, INT_COL, OTHER, RuleLineage,
    STATE_COL, TIER_RANK, column_domain, lineage_text,
)

RULE_ORDER = ("split", "compose", "disjunct", "negate", "size",
              "arithmetic", "numrelation")
ARITH_OPS = ("+", "-", "*", "/")
REL_OPS = ("lt", "gt", "le", "ge")
REL_TEXT = {"lt": "<", "gt": ">", "le": "<=", "ge": ">="}

EQUIVALENCE = "equivalence"
IMPLICATION = "implication"
NON_EXISTENCE = "non_existence"


@dataclass(frozen=True)
class RuleConfig:
    enabled_rules: frozenset[str]
    split_values: dict = field(default_factory=dict)   # sort -> list of values
    arithmetic_ops: frozenset[str] = frozenset()
    relations: frozenset[str] = frozenset()

    def __post_init__(self):
        unknown = self.enabled_rules - frozenset(RULE_ORDER)
        if unknown:
            raise ValueError(f"unknown rules {sorted(unknown)}")
        if "split" in self.enabled_rules and not self.split_values:
            raise ValueError("split enabled but no split values")
        if "arithmetic" in self.enabled_rules and not self.arithmetic_ops:
            raise ValueError("arithmetic enabled but no operators")
        if "numrelation" in self.enabled_rules and not self.relations:
            raise ValueError("numrelation enabled but no relations")

    @staticmethod
    def all_rules(machine) -> "RuleConfig":
        """Every rule, split on every enumerated sort: the unfocused baseline."""
        values = {s.name: list(s.values())
                  for s in machine.context.sorts if not s.is_int_range}
        return RuleConfig(
            enabled_rules=frozenset(RULE_ORDER),
            split_values=values or {"_none": [None]},
            arithmetic_ops=frozenset(ARITH_OPS),
            relations=frozenset(REL_OPS),
        )


@dataclass(frozen=True)
class Conjecture:
    kind: str
    lhs: int
    rhs: int | None
    step_found: int
    support: int

    def key(self):
        if self.kind == EQUIVALENCE:
            return (self.kind, tuple(sorted((self.lhs, self.rhs))))
        if self.kind == IMPLICATION:
            return (self.kind, (self.lhs, self.rhs))
        return (self.kind, self.lhs)

    def pair_ids(self) -> tuple[int, int]:
        return (self.lhs, self.rhs if self.rhs is not None else -1)


@dataclass
class Theory:
    concepts: list[Concept] = field(default_factory=list)
    conjectures: list[Conjecture] = field(default_factory=list)
    steps_used: int = 0
    warnings: list[str] = field(default_factory=list)
    # agenda state, kept so formation can be resumed with a larger budget
    agenda: list = field(default_factory=list)
    seen_steps: set = field(default_factory=set)
    seen_conjectures: set = field(default_factory=set)
    _counter: int = 0

    def concept(self, cid: int) -> Concept:
        return self.concepts[cid]

    def registry(self):
        return self.concepts

    def eligible(self):
        return [c for c in self.concepts if c.agenda_eligible]


# ---------------------------------------------------------------------------
# Production rules (pure table transformations)

def apply_split(c: Concept, col: int, value, new_id: int = -1) -> Concept:
    """Rows of c whose column equals value, with that column removed."""
    if not 0 <= col < c.arity:
        raise ValueError("split column out of range")
    rows = frozenset(r[:col] + r[col + 1:] for r in c.table if r[col] == value)
    return Concept(
        id=new_id,
        name=f"{c.name}_{value}",
        signature=c.signature[:col] + c.signature[col + 1:],
        table=rows,
        lineage=RuleLineage("split", (col, value), (c.id,)),
        priority_tier=c.priority_tier,
        column_domains=c.column_domains[:col] + c.column_domains[col + 1:],
        depth=c.depth + 1,
    )


def apply_size(c: Concept, group_cols: tuple[int, ...], new_id: int = -1) -> Concept:
    """Tuple counts per group key; appends an integer count column."""
    if not group_cols or len(group_cols) >= c.arity:
        raise ValueError("group columns must be a non-empty proper subset")
    counts: dict[tuple, int] = {}
    for r in c.table:
        key = tuple(r[i] for i in group_cols)
        counts[key] = counts.get(key, 0) + 1
    rows = frozenset(key + (n,) for key, n in counts.items())
    return Concept(
        id=new_id,
        name=f"{c.name}#count",
        signature=tuple(c.signature[i] for i in group_cols) + (INT_COL,),
        table=rows,
        lineage=RuleLineage("size", tuple(group_cols), (c.id,)),
        priority_tier=c.priority_tier,
        column_domains=tuple(c.column_domains[i] for i in group_cols) + (None,),
        depth=c.depth + 1,
    )


class NegateSkipped(Exception):
    """Product of column domains exceeds the configured cap."""


def apply_negate(c: Concept, cap: int = 10 ** 6, new_id: int = -1) -> Concept:
    """Complement of the table within the product of its column domains."""
    domains = [sorted(column_domain(c, i), key=_dom_key) for i in range(c.arity)]
    size = 1
    for d in domains:
        size *= len(d)
    if size > cap:
        raise NegateSkipped(f"negate({c.name}): product {size} exceeds cap {cap}")
    rows = frozenset(r for r in itertools.product(*domains) if r not in c.table)
    return Concept(
        id=new_id,
        name=f"non_{c.name}",
        signature=c.signature,
        table=rows,
        lineage=RuleLineage("negate", (), (c.id,)),
        priority_tier=c.priority_tier,
        column_domains=tuple(frozenset(d) for d in domains),
        depth=c.depth + 1,
    )


def _dom_key(v):
    from .semantics import value_sort_key
    return value_sort_key(v)


def apply_compose(c1: Concept, c2: Concept, pairing: tuple[tuple[int, int], ...],
                  new_id: int = -1) -> Concept:
    """Natural join on the paired columns; c1's columns then c2's unpaired."""
    if not pairing:
        raise ValueError("compose needs at least one column pair")
    for i, j in pairing:
        if c1.signature[i] != c2.signature[j]:
            raise ValueError(
                f"compose pairing ({i},{j}): {c1.signature[i]} vs {c2.signature[j]}")
    unpaired2 = [j for j in range(c2.arity) if j not in {j for _, j in pairing}]
    index: dict[tuple, list] = {}
    for r in c2.table:
        key = tuple(r[j] for _, j in pairing)
        index.setdefault(key, []).append(tuple(r[j] for j in unpaired2))
    rows = set()
    for r in c1.table:
        key = tuple(r[i] for i, _ in pairing)
        for tail in index.get(key, ()):
            rows.add(r + tail)
    return Concept(
        id=new_id,
        name=f"{c1.name}&{c2.name}",
        signature=c1.signature + tuple(c2.signature[j] for j in unpaired2),
        table=frozenset(rows),
        lineage=RuleLineage("compose", tuple(pairing), (c1.id, c2.id)),
        priority_tier=_step_tier(c1, c2),
        column_domains=c1.column_domains
        + tuple(c2.column_domains[j] for j in unpaired2),
        depth=max(c1.depth, c2.depth) + 1,
    )


def apply_disjunct(c1: Concept, c2: Concept, new_id: int = -1) -> Concept:
    """Union of two tables over the same signature."""
    if c1.signature != c2.signature:
        raise ValueError("disjunct requires identical signatures")
    doms = tuple(
        None if c1.column_domains[i] is None or c2.column_domains[i] is None
        else c1.column_domains[i] | c2.column_domains[i]
        for i in range(c1.arity))
    return Concept(
        id=new_id,
        name=f"{c1.name}|{c2.name}",
        signature=c1.signature,
        table=c1.table | c2.table,
        lineage=RuleLineage("disjunct", (), (c1.id, c2.id)),
        priority_tier=_step_tier(c1, c2),
        column_domains=doms,
        depth=max(c1.depth, c2.depth) + 1,
    )


def _int_value_col(c: Concept) -> int | None:
    cols = [i for i, s in enumerate(c.signature) if s == INT_COL]
    if len(cols) == 1:
        return cols[0]
    return None


def _arith_compatible(c1: Concept, c2: Concept) -> int | None:
    """Both concepts share a signature with exactly one integer column."""
    if c1.signature != c2.signature:
        return None
    return _int_value_col(c1)


def apply_arithmetic(c1: Concept, c2: Concept, op: str, new_id: int = -1) -> Concept:
    """Join on the key columns and combine the integer values with op.

    Division keeps only rows where it is exact with a nonzero divisor.
    """
    vcol = _arith_compatible(c1, c2)
    if vcol is None:
        raise ValueError("arithmetic needs matching signatures with one int column")
    keys = [i for i in range(c1.arity) if i != vcol]
    index: dict[tuple, list] = {}
    for r in c2.table:
        index.setdefault(tuple(r[i] for i in keys), []).append(r[vcol])
    rows = set()
    for r in c1.table:
        for v2 in index.get(tuple(r[i] for i in keys), ()):
            v1 = r[vcol]
            if op == "+":
                v = v1 + v2
            elif op == "-":
                v = v1 - v2
            elif op == "*":
                v = v1 * v2
            else:
                if v2 == 0 or v1 % v2 != 0:
                    continue
                v = v1 // v2
            rows.add(r[:vcol] + (v,) + r[vcol + 1:])
    return Concept(
        id=new_id,
        name=f"({c1.name}{op}{c2.name})",
        signature=c1.signature,
        table=frozenset(rows),
        lineage=RuleLineage("arithmetic", (op,), (c1.id, c2.id)),
        priority_tier=_step_tier(c1, c2),
        column_domains=c1.column_domains[:vcol] + (None,)
        + c1.column_domains[vcol + 1:],
        depth=max(c1.depth, c2.depth) + 1,
    )


def apply_numrelation(c1: Concept, c2: Concept, rel: str, new_id: int = -1) -> Concept:
    """Join on key columns, keep keys where rel(v1, v2) holds."""
    vcol = _arith_compatible(c1, c2)
    if vcol is None:
        raise ValueError("numrelation needs matching signatures with one int column")
    keys = [i for i in range(c1.arity) if i != vcol]
    index: dict[tuple, list] = {}
    for r in c2.table:
        index.setdefault(tuple(r[i] for i in keys), []).append(r[vcol])
    test = {"lt": lambda a, b: a < b, "gt": lambda a, b: a > b,
            "le": lambda a, b: a <= b, "ge": lambda a, b: a >= b}[rel]
    rows = set()
    for r in c1.table:
        key = tuple(r[i] for i in keys)
        for v2 in index.get(key, ()):
            if test(r[vcol], v2):
                rows.add(key)
                break
    return Concept(
        id=new_id,
        name=f"({c1.name}{REL_TEXT[rel]}{c2.name})",
        signature=tuple(c1.signature[i] for i in keys),
        table=frozenset(rows),
        lineage=RuleLineage("numrelation", (rel,), (c1.id, c2.id)),
        priority_tier=_step_tier(c1, c2),
        column_domains=tuple(c1.column_domains[i] for i in keys),
        depth=max(c1.depth, c2.depth) + 1,
    )


def _step_tier(c1: Concept, c2: Concept) -> str:
    """The least-prioritised operand decides a step's agenda band, so all
    steps over prioritised concepts run before any step touching an
    unprioritised one."""
    return c1.priority_tier if TIER_RANK[c1.priority_tier] >= \
        TIER_RANK[c2.priority_tier] else c2.priority_tier


# ---------------------------------------------------------------------------
# Conjecture detection

def detect_conjectures(new: Concept, theory: Theory) -> list[Conjecture]:
    """Conjectures relating a just-built concept to the existing theory."""
    step = theory.steps_used
    out: list[Conjecture] = []
    if not new.table:
        out.append(Conjecture(NON_EXISTENCE, new.id, None, step, 0))
        return _dedup(out, theory)
    for prior in theory.concepts:
        if prior.id == new.id or not prior.agenda_eligible:
            continue
        if prior.signature != new.signature or not prior.table:
            continue
        if prior.table == new.table:
            out.append(Conjecture(EQUIVALENCE, new.id, prior.id, step,
                                  len(new.table)))
        elif new.table < prior.table:
            out.append(Conjecture(IMPLICATION, new.id, prior.id, step,
                                  len(new.table)))
        elif prior.table < new.table:
            out.append(Conjecture(IMPLICATION, prior.id, new.id, step,
                                  len(prior.table)))
    return _dedup(out, theory)


def _dedup(conjs, theory: Theory):
    out = []
    for c in conjs:
        k = c.key()
        if k in theory.seen_conjectures:
            continue
        theory.seen_conjectures.add(k)
        out.append(c)
    return out


# ---------------------------------------------------------------------------
# Prioritised agenda

RULE_INDEX = {r: i for i, r in enumerate(RULE_ORDER)}


def _split_params(c: Concept, cfg: RuleConfig):
    """(col, value) split parameterisations in canonical order.

    Sort columns use the configured split values; integer columns use the
    values observed in the table. Single-column concepts are not split.
    """
    if c.arity < 2:
        return
    for col, sig in enumerate(c.signature):
        if sig == STATE_COL:
            continue
        if sig == INT_COL:
            values = sorted({r[col] for r in c.table})
        else:
            values = [v for v in cfg.split_values.get(sig, ())
                      if v in column_domain(c, col)]
        for k, v in enumerate(values):
            yield (col, k), ("split", (c.id,), (col, v))


def _size_params(c: Concept):
    if c.arity < 2:
        return
    cols = range(c.arity)
    for n in range(1, c.arity):
        for combo in itertools.combinations(cols, n):
            yield (n,) + combo, ("size", (c.id,), combo)


def _compose_pairing(c1: Concept, c2: Concept):
    """The maximal positional alignment, or None if sorts disagree."""
    n = min(c1.arity, c2.arity)
    if n == 0:
        return None
    for i in range(n):
        if c1.signature[i] != c2.signature[i]:
            return None
    return tuple((i, i) for i in range(n))


class _Agenda:
    def __init__(self, theory: Theory, cfg: RuleConfig):
        self.theory = theory
        self.cfg = cfg

    def push(self, tier: str, depth: int, ids: tuple, rule: str, param_key,
             payload):
        if payload in self.theory.seen_steps:
            return
        self.theory.seen_steps.add(payload)
        self.theory._counter += 1
        # shallow steps first, prioritised tiers next, and within a band the
        # steps over early (core/seed) concepts before derived-junk pairs
        heapq.heappush(self.theory.agenda, (
            depth, TIER_RANK[tier], max(ids), ids, RULE_INDEX[rule],
            param_key, self.theory._counter, payload))

    def enqueue_unary(self, c: Concept):
        cfg = self.cfg
        if "split" in cfg.enabled_rules:
            for pk, payload in _split_params(c, cfg):
                self.push(c.priority_tier, c.depth + 1, (c.id,), "split", pk,
                          payload)
        if "negate" in cfg.enabled_rules:
            self.push(c.priority_tier, c.depth + 1, (c.id,), "negate", (),
                      ("negate", (c.id,), ()))
        if "size" in cfg.enabled_rules:
            for pk, payload in _size_params(c):
                self.push(c.priority_tier, c.depth + 1, (c.id,), "size", pk,
                          payload)

    def enqueue_binary(self, a: Concept, b: Concept):
        """Steps pairing two distinct eligible concepts (both orders)."""
        cfg = self.cfg
        tier = _step_tier(a, b)
        depth = max(a.depth, b.depth) + 1
        for c1, c2 in ((a, b), (b, a)):
            ids = (c1.id, c2.id)
            if "compose" in cfg.enabled_rules:
                pairing = _compose_pairing(c1, c2)
                if pairing:
                    self.push(tier, depth, ids, "compose", (),
                              ("compose", ids, pairing))
            if "arithmetic" in cfg.enabled_rules \
                    and _arith_compatible(c1, c2) is not None:
                for k, op in enumerate(ARITH_OPS):
                    if op in cfg.arithmetic_ops:
                        self.push(tier, depth, ids, "arithmetic", (k,),
                                  ("arithmetic", ids, (op,)))
            if "numrelation" in cfg.enabled_rules \
                    and _arith_compatible(c1, c2) is not None:
                for k, rel in enumerate(REL_OPS):
                    if rel in cfg.relations:
                        self.push(tier, depth, ids, "numrelation", (k,),
                                  ("numrelation", ids, (rel,)))
        if "disjunct" in cfg.enabled_rules and a.signature == b.signature:
            lo, hi = (a, b) if a.id <= b.id else (b, a)
            self.push(tier, depth, (lo.id, hi.id), "disjunct", (),
                      ("disjunct", (lo.id, hi.id), ()))


# ---------------------------------------------------------------------------
# form_theory

def _add_concept(theory: Theory, agenda: _Agenda, concept: Concept,
                 detect: bool = True) -> Concept:
    """Register a freshly built concept, detect conjectures, update agenda."""
    duplicate = any(
        p.agenda_eligible and p.signature == concept.signature
        and p.table == concept.table
        for p in theory.concepts)
    eligible = bool(concept.table) and not duplicate
    if not eligible:
        concept = Concept(concept.id, concept.name, concept.signature,
                          concept.table, concept.lineage, concept.priority_tier,
                          concept.column_domains, concept.depth,
                          agenda_eligible=False)
    theory.concepts.append(concept)
    if detect:
        theory.conjectures.extend(detect_conjectures(concept, theory))
    if eligible:
        for other in theory.concepts[:-1]:
            if other.agenda_eligible:
                agenda.enqueue_binary(concept, other)
        agenda.enqueue_unary(concept)
    return concept


def _execute(theory: Theory, agenda: _Agenda, payload, negate_cap: int):
    rule, ids, params = payload
    new_id = len(theory.concepts)
    ops = [theory.concept(i) for i in ids]
    try:
        if rule == "split":
            concept = apply_split(ops[0], params[0], params[1], new_id)
        elif rule == "negate":
            concept = apply_negate(ops[0], negate_cap, new_id)
        elif rule == "size":
            concept = apply_size(ops[0], params, new_id)
        elif rule == "compose":
            concept = apply_compose(ops[0], ops[1], params, new_id)
        elif rule == "disjunct":
            concept = apply_disjunct(ops[0], ops[1], new_id)
        elif rule == "arithmetic":
            concept = apply_arithmetic(ops[0], ops[1], params[0], new_id)
        else:
            concept = apply_numrelation(ops[0], ops[1], params[0], new_id)
    except NegateSkipped as e:
        theory.warnings.append(str(e))
        return
    _add_concept(theory, agenda, concept)


@dataclass(frozen=True)
class SplitSeed:
    concept: str
    col: int
    value: object

    def text(self) -> str:
        return f"split({self.concept}; {self.col}, {self.value})"


@dataclass(frozen=True)
class DisjunctSeed:
    left: str
    right: str

    def text(self) -> str:
        return f"disjunct({self.left}, {self.right})"


def form_theory(cores, cfg: RuleConfig, budget: int, priorities=None,
                negate_cap: int = 10 ** 6) -> Theory:
    """Run up to `budget` formation steps over the given core concepts.

    `priorities` (see heuristics.PrioritizedConcepts) assigns agenda tiers
    to core concepts by name and lists non-core seed concepts to build
    first; seed builds consume formation steps like any other.
    """
    theory = Theory()
    agenda = _Agenda(theory, cfg)

    tiers = {}
    seeds = ()
    if priorities is not None:
        for name in priorities.goal_tier:
            tiers[name] = GOAL
        for name in priorities.hyp_tier:
            tiers[name] = HYPOTHESIS
        seeds = tuple(priorities.noncore_seeds)

    by_name = {}
    for i, core in enumerate(cores):
        concept = Concept(i, core.name, core.signature, core.table,
                          CoreLineage(core.name),
                          tiers.get(core.name, OTHER),
                          core.column_domains, depth=0)
        _add_concept(theory, agenda, concept)
        by_name.setdefault(core.name, concept.id)

    for seed in seeds:
        if theory.steps_used >= budget:
            break
        theory.steps_used += 1
        try:
            if isinstance(seed, SplitSeed):
                base = theory.concept(by_name[seed.concept])
                concept = apply_split(base, seed.col, seed.value,
                                      len(theory.concepts))
            else:
                left = theory.concept(by_name[seed.left])
                right = theory.concept(by_name[seed.right])
                concept = apply_disjunct(left, right, len(theory.concepts))
        except (KeyError, ValueError) as e:
            theory.warnings.append(f"seed {seed.text()}: {e}")
            continue
        concept = Concept(concept.id, concept.name, concept.signature,
                          concept.table, concept.lineage, HYPOTHESIS,
                          concept.column_domains, concept.depth)
        _add_concept(theory, agenda, concept)

    while theory.agenda and theory.steps_used < budget:
        payload = heapq.heappop(theory.agenda)[-1]
        theory.steps_used += 1
        _execute(theory, agenda, payload, negate_cap)
    return theory
