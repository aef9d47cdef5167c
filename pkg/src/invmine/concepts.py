"""Concepts: named predicates with columnar example tables.

Core concepts come straight from the model (carrier sets, constants) and
the trace (one table per state variable, prefixed by a state column).
Derived concepts are built by production rules and carry their
construction lineage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Machine
from .simulator import Trace
from .syntax import INTEGER, RELATION, SCALAR, SET_OF, Sort

STATE_COL = "state"
INT_COL = "int"

GOAL = "goal"
HYPOTHESIS = "hypothesis"
OTHER = "other"

TIER_RANK = {GOAL: 0, HYPOTHESIS: 1, OTHER: 2}


@dataclass(frozen=True)
class CoreLineage:
    name: str

    def text(self, registry) -> str:
        return self.name


@dataclass(frozen=True)
class RuleLineage:
    rule: str
    params: tuple
    children: tuple[int, ...]   # concept ids (strictly smaller than owner's)

    def text(self, registry) -> str:
        kids = ", ".join(registry[c].lineage.text(registry) for c in self.children)
        if self.params:
            ps = ", ".join(str(p) for p in self.params)
            return f"{self.rule}({kids}; {ps})"
        return f"{self.rule}({kids})"


@dataclass(frozen=True)
class Concept:
    id: int
    name: str
    signature: tuple[str, ...]          # sort name | "state" | "int" per column
    table: frozenset
    lineage: object                     # CoreLineage | RuleLineage
    priority_tier: str = OTHER
    column_domains: tuple = ()          # per column: frozenset | None for int
    depth: int = 0
    agenda_eligible: bool = True

    def __post_init__(self):
        for row in self.table:
            if len(row) != len(self.signature):
                raise ValueError(
                    f"concept {self.name}: row arity {len(row)} != "
                    f"signature arity {len(self.signature)}")

    @property
    def arity(self) -> int:
        return len(self.signature)

    @property
    def is_core(self) -> bool:
        return isinstance(self.lineage, CoreLineage)


def column_domain(concept: Concept, col: int) -> frozenset:
    """Closed-world domain of a column: sort/state members, or observed
    min..max for computed integer columns."""
    if not 0 <= col < concept.arity:
        raise ValueError(f"column {col} out of range")
    dom = concept.column_domains[col]
    if dom is not None:
        return dom
    values = [row[col] for row in concept.table]
    if not values:
        return frozenset()
    return frozenset(range(min(values), max(values) + 1))


def lineage_leaves(concept: Concept, registry) -> frozenset[str]:
    """Names of the core concepts at the leaves of a lineage."""
    if isinstance(concept.lineage, CoreLineage):
        return frozenset({concept.lineage.name})
    out: set[str] = set()
    for cid in concept.lineage.children:
        out |= lineage_leaves(registry[cid], registry)
    return frozenset(out)


def lineage_base(concept: Concept, registry) -> str | None:
    """The unique core concept a lineage chain is rooted in, if unique."""
    leaves = lineage_leaves(concept, registry)
    if len(leaves) == 1:
        return next(iter(leaves))
    return None


def lineage_text(concept: Concept, registry) -> str:
    return concept.lineage.text(registry)


# ---------------------------------------------------------------------------
# Core concept construction

def _sort_concept(idx: int, s: Sort) -> Concept:
    vals = s.values()
    return Concept(
        id=idx, name=s.name, signature=(s.name,),
        table=frozenset((v,) for v in vals),
        lineage=CoreLineage(s.name),
        column_domains=(frozenset(vals),),
    )


def constant_concepts(machine: Machine, start_id: int = 0) -> list[Concept]:
    """Sort carrier concepts plus one concept per set/relation/int constant."""
    out: list[Concept] = []
    idx = start_id
    for s in machine.context.sorts:
        out.append(_sort_concept(idx, s))
        idx += 1
    for c in machine.context.constants:
        shape = c.shape
        if shape.kind == SET_OF:
            dom = frozenset(machine.context.sort(shape.sort).values())
            out.append(Concept(idx, c.name, (shape.sort,),
                               frozenset((v,) for v in c.value),
                               CoreLineage(c.name), column_domains=(dom,)))
        elif shape.kind == RELATION:
            d1 = frozenset(machine.context.sort(shape.domain_sort).values())
            d2 = frozenset(machine.context.sort(shape.range_sort).values())
            out.append(Concept(idx, c.name,
                               (shape.domain_sort, shape.range_sort),
                               frozenset((a, b) for a, b in c.value),
                               CoreLineage(c.name), column_domains=(d1, d2)))
        elif shape.kind == INTEGER:
            out.append(Concept(idx, c.name, (INT_COL,),
                               frozenset({(c.value,)}),
                               CoreLineage(c.name), column_domains=(None,)))
        else:   # scalar atom constants contribute no table of their own
            continue
        idx += 1
    return out


class IngestError(Exception):
    pass


def core_concepts(machine: Machine, trace: Trace) -> list[Concept]:
    """Concepts for a machine + trace, in declaration order.

    One state concept, one per carrier sort, one per variable (tables read
    off the trace), then set/relation/integer constants.
    """
    for snap in trace.snapshots:
        for name, _ in machine.variables:
            if name not in snap.valuation:
                raise IngestError(
                    f"trace state {snap.state_id} lacks variable {name}")

    states = tuple(s.state_id for s in trace.snapshots)
    state_dom = frozenset(states)
    out: list[Concept] = [Concept(
        0, STATE_COL, (STATE_COL,),
        frozenset((s,) for s in states),
        CoreLineage(STATE_COL), column_domains=(state_dom,),
    )]
    idx = 1
    for s in machine.context.sorts:
        out.append(_sort_concept(idx, s))
        idx += 1

    for name, shape in machine.variables:
        rows: set = set()
        if shape.kind == SCALAR:
            sig = (STATE_COL, shape.sort)
            doms = (state_dom, frozenset(machine.context.sort(shape.sort).values()))
            for snap in trace.snapshots:
                rows.add((snap.state_id, snap.valuation[name]))
        elif shape.kind == INTEGER:
            sig = (STATE_COL, INT_COL)
            doms = (state_dom, None)
            for snap in trace.snapshots:
                rows.add((snap.state_id, snap.valuation[name]))
        elif shape.kind == SET_OF:
            sig = (STATE_COL, shape.sort)
            doms = (state_dom, frozenset(machine.context.sort(shape.sort).values()))
            for snap in trace.snapshots:
                for v in snap.valuation[name]:
                    rows.add((snap.state_id, v))
        else:
            sig = (STATE_COL, shape.domain_sort, shape.range_sort)
            doms = (state_dom,
                    frozenset(machine.context.sort(shape.domain_sort).values()),
                    frozenset(machine.context.sort(shape.range_sort).values()))
            for snap in trace.snapshots:
                for a, b in snap.valuation[name]:
                    rows.add((snap.state_id, a, b))
        out.append(Concept(idx, name, sig, frozenset(rows),
                           CoreLineage(name), column_domains=doms))
        idx += 1

    out.extend(constant_concepts_with_ids(machine, idx))
    return out


def constant_concepts_with_ids(machine: Machine, start_id: int) -> list[Concept]:
    consts = constant_concepts(machine, 0)
    # drop the sort concepts (already emitted) and renumber
    named_sorts = {s.name for s in machine.context.sorts}
    kept = [c for c in consts if c.name not in named_sorts]
    return [Concept(start_id + i, c.name, c.signature, c.table, c.lineage,
                    c.priority_tier, c.column_domains)
            for i, c in enumerate(kept)]


def dump_concept_tsv(concept: Concept) -> str:
    """Debug dump: rows sorted canonically, tab-separated."""
    from .semantics import value_sort_key
    lines = ["\t".join(concept.signature)]
    for row in sorted(concept.table, key=lambda r: tuple(value_sort_key(v) for v in r)):
        lines.append("\t".join(str(v) for v in row))
    return "\n".join(lines) + "\n"
