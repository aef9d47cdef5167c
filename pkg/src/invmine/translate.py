"""Translating conjectures into quantifier-free invariant predicates.

A conjecture relates two concept lineages extensionally. Translation is
pattern-directed over the lineage: supported shapes produce a set-theoretic
predicate over model variables (the state column is implicit, invariants
being per-state facts); anything else raises TranslationUnsupported rather
than emitting an approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .concepts import Concept, CoreLineage, INT_COL, RuleLineage, STATE_COL
from .formation import EQUIVALENCE, IMPLICATION, NON_EXISTENCE, Conjecture
from .model import Machine
from .syntax import (
    And, AtomLit, BinOp, Card, Compare, ConstRef, Iff, Implies, IntLit,
    InverseImage, Maplet, Node, Not, Or, Quantifier, SetLit, SortSet,
    TruePred, Var, RELATION, SCALAR, SET_OF, INTEGER,
)


class TranslationUnsupported(Exception):
    pass


SET = "set"
REL = "rel"
INT = "int"
SCAL = "scalar"
PROP = "prop"


@dataclass(frozen=True)
class Denotation:
    kind: str
    expr: Node | None = None     # set/relation/int/scalar expression
    pred: Node | None = None     # proposition
    elem_sort: str | None = None
    dom_sort: str | None = None
    rng_sort: str | None = None


@dataclass(frozen=True)
class InvariantSyntax:
    predicate: Node
    display_quantified: str
    display_settheoretic: str


def _literal(value, sort: str) -> Node:
    if isinstance(value, int):
        return IntLit(value)
    return AtomLit(value, sort)


def denote(concept: Concept, theory, machine: Machine) -> Denotation:
    """The model-level meaning of a concept's lineage."""
    registry = theory.concepts
    lin = concept.lineage
    if isinstance(lin, CoreLineage):
        return _denote_core(concept, machine)

    kids = [registry[c] for c in lin.children]
    if lin.rule == "split":
        return _denote_split(concept, kids[0], lin.params, theory, machine)
    if lin.rule == "negate":
        d = denote(kids[0], theory, machine)
        if d.kind == SET:
            return Denotation(SET, expr=BinOp("diff", SortSet(d.elem_sort), d.expr),
                              elem_sort=d.elem_sort)
        if d.kind == PROP:
            return Denotation(PROP, pred=Not(d.pred))
        raise TranslationUnsupported(f"negate over {d.kind} lineage")
    if lin.rule == "compose":
        c1, c2 = kids
        if c1.signature != c2.signature or \
                lin.params != tuple((i, i) for i in range(c1.arity)):
            raise TranslationUnsupported("compose with unpaired columns")
        d1, d2 = (denote(k, theory, machine) for k in kids)
        if d1.kind == SET and d2.kind == SET:
            return Denotation(SET, expr=BinOp("inter", d1.expr, d2.expr),
                              elem_sort=d1.elem_sort)
        if d1.kind == REL and d2.kind == REL:
            return Denotation(REL, expr=BinOp("inter", d1.expr, d2.expr),
                              dom_sort=d1.dom_sort, rng_sort=d1.rng_sort)
        if d1.kind == PROP and d2.kind == PROP:
            return Denotation(PROP, pred=And(d1.pred, d2.pred))
        raise TranslationUnsupported(f"compose over {d1.kind}/{d2.kind}")
    if lin.rule == "disjunct":
        d1, d2 = (denote(k, theory, machine) for k in kids)
        if d1.kind == SET and d2.kind == SET:
            return Denotation(SET, expr=BinOp("union", d1.expr, d2.expr),
                              elem_sort=d1.elem_sort)
        if d1.kind == REL and d2.kind == REL:
            return Denotation(REL, expr=BinOp("union", d1.expr, d2.expr),
                              dom_sort=d1.dom_sort, rng_sort=d1.rng_sort)
        if d1.kind == PROP and d2.kind == PROP:
            return Denotation(PROP, pred=Or(d1.pred, d2.pred))
        raise TranslationUnsupported(f"disjunct over {d1.kind}/{d2.kind}")
    if lin.rule == "size":
        d = denote(kids[0], theory, machine)
        if d.kind == SET and kids[0].signature[0] == STATE_COL \
                and lin.params == (0,):
            return Denotation(INT, expr=Card(d.expr))
        raise TranslationUnsupported("size over a non-set lineage")
    if lin.rule == "arithmetic":
        d1, d2 = (denote(k, theory, machine) for k in kids)
        if d1.kind == INT and d2.kind == INT:
            return Denotation(INT, expr=_canon_chain(
                BinOp(lin.params[0], d1.expr, d2.expr)))
        raise TranslationUnsupported("arithmetic over non-integer lineages")
    if lin.rule == "numrelation":
        d1, d2 = (denote(k, theory, machine) for k in kids)
        if d1.kind == INT and d2.kind == INT:
            return Denotation(PROP, pred=Compare(lin.params[0], d1.expr, d2.expr))
        raise TranslationUnsupported("numrelation over non-integer lineages")
    raise TranslationUnsupported(f"rule {lin.rule}")


def _canon_chain(expr: Node) -> Node:
    """Flatten and alphabetise commutative +/* chains (value-preserving)."""
    if not (isinstance(expr, BinOp) and expr.op in ("+", "*")):
        return expr
    op = expr.op

    def leaves(e: Node) -> list[Node]:
        if isinstance(e, BinOp) and e.op == op:
            return leaves(e.left) + leaves(e.right)
        return [e]

    parts = sorted(leaves(expr), key=lambda e: e.text())
    out = parts[0]
    for p in parts[1:]:
        out = BinOp(op, out, p)
    return out


def _denote_core(concept: Concept, machine: Machine) -> Denotation:
    name = concept.lineage.name
    shape = machine.var_shape(name)
    if shape is not None:
        if shape.kind == SET_OF:
            return Denotation(SET, expr=Var(name), elem_sort=shape.sort)
        if shape.kind == RELATION:
            return Denotation(REL, expr=Var(name), dom_sort=shape.domain_sort,
                              rng_sort=shape.range_sort)
        if shape.kind == INTEGER:
            return Denotation(INT, expr=Var(name))
        return Denotation(SCAL, expr=Var(name), elem_sort=shape.sort)
    for c in machine.context.constants:
        if c.name == name:
            if c.shape.kind == SET_OF:
                return Denotation(SET, expr=ConstRef(name), elem_sort=c.shape.sort)
            if c.shape.kind == RELATION:
                return Denotation(REL, expr=ConstRef(name),
                                  dom_sort=c.shape.domain_sort,
                                  rng_sort=c.shape.range_sort)
            if c.shape.kind == INTEGER:
                return Denotation(INT, expr=ConstRef(name))
            raise TranslationUnsupported(f"scalar constant concept {name}")
    if machine.context.sort(name) is not None:
        return Denotation(SET, expr=SortSet(name), elem_sort=name)
    raise TranslationUnsupported(f"core concept {name} has no model meaning")


def _denote_split(concept: Concept, parent: Concept, params, theory,
                  machine: Machine) -> Denotation:
    col, value = params
    d = denote(parent, theory, machine)
    sig = parent.signature
    if d.kind == REL and col == len(sig) - 1:
        # restrict by range value: inverse image of a singleton
        lit = _literal(value, d.rng_sort)
        return Denotation(SET, expr=InverseImage(d.expr, SetLit((lit,))),
                          elem_sort=d.dom_sort)
    if d.kind == SCAL and col == len(sig) - 1:
        return Denotation(PROP, pred=Compare("eq", d.expr,
                                             _literal(value, d.elem_sort)))
    if d.kind == INT and col == len(sig) - 1 and sig[col] == INT_COL:
        return Denotation(PROP, pred=Compare("eq", d.expr, IntLit(value)))
    if d.kind == SET and col == len(sig) - 1:
        return Denotation(PROP, pred=Compare("in", _literal(value, d.elem_sort),
                                             d.expr))
    raise TranslationUnsupported(
        f"split of {parent.name} on column {col}")


# ---------------------------------------------------------------------------
# Conjecture -> invariant predicate

def _empty() -> Node:
    return SetLit(())


def conjecture_to_invariant(conj: Conjecture, theory, machine: Machine,
                            ) -> InvariantSyntax:
    """The invariant predicate a conjecture asserts, in both display forms."""
    lhs = theory.concepts[conj.lhs]
    dl = denote(lhs, theory, machine)
    if conj.kind == NON_EXISTENCE:
        if dl.kind in (SET, REL):
            pred = Compare("eq", dl.expr, _empty())
        elif dl.kind == PROP:
            pred = Not(dl.pred)
        else:
            raise TranslationUnsupported(f"non-existence over {dl.kind}")
        return _package(pred, dl, None, conj)

    rhs = theory.concepts[conj.rhs]
    dr = denote(rhs, theory, machine)
    if dl.kind != dr.kind:
        raise TranslationUnsupported(f"sides of kind {dl.kind} vs {dr.kind}")
    if conj.kind == EQUIVALENCE:
        if dl.kind in (SET, REL, INT, SCAL):
            left, right = _core_first(dl, dr, lhs, rhs)
            pred = Compare("eq", left.expr, right.expr)
            return _package(pred, left, right, conj)
        pred = Iff(dl.pred, dr.pred)
        return _package(pred, dl, dr, conj)
    # implication: lhs table is contained in rhs table
    if dl.kind in (SET, REL):
        pred = Compare("subset", dl.expr, dr.expr)
        return _package(pred, dl, dr, conj)
    if dl.kind == PROP:
        pred = Implies(dl.pred, dr.pred)
        return _package(pred, dl, dr, conj)
    raise TranslationUnsupported(f"implication over {dl.kind}")


def _core_first(dl, dr, lhs: Concept, rhs: Concept):
    """Print equivalences with the bare core side on the left."""
    lhs_core = isinstance(lhs.lineage, CoreLineage)
    rhs_core = isinstance(rhs.lineage, CoreLineage)
    if rhs_core and not lhs_core:
        return dr, dl
    return dl, dr


def _member(expr: Node, x: Node) -> Node:
    """Pointwise membership predicate for the quantified display."""
    if isinstance(expr, SortSet):
        return TruePred()
    if isinstance(expr, InverseImage) and isinstance(expr.arg, SetLit) \
            and len(expr.arg.items) == 1:
        return Compare("in", Maplet(x, expr.arg.items[0]), expr.fn)
    if isinstance(expr, BinOp) and expr.op in ("union", "inter", "diff"):
        left = _member(expr.left, x)
        right = _member(expr.right, x)
        if expr.op == "union":
            return Or(left, right)
        if expr.op == "inter":
            return _and(left, right)
        return _and(left, Not(right))
    return Compare("in", x, expr)


def _and(a: Node, b: Node) -> Node:
    if isinstance(a, TruePred):
        return b
    if isinstance(b, TruePred):
        return a
    return And(a, b)


def _quantified(pred: Node, dl: Denotation, dr: Denotation | None,
                conj: Conjecture) -> Node:
    if dl.kind == SET and isinstance(pred, Compare) and dl.elem_sort:
        x = Var("x")
        if pred.op == "eq" and isinstance(pred.right, SetLit) \
                and not pred.right.items:
            return Quantifier("forall", "x", dl.elem_sort,
                              Not(_member(pred.left, x)))
        if pred.op == "eq":
            return Quantifier("forall", "x", dl.elem_sort,
                              Iff(_member(pred.left, x), _member(pred.right, x)))
        if pred.op == "subset":
            return Quantifier("forall", "x", dl.elem_sort,
                              Implies(_member(pred.left, x),
                                      _member(pred.right, x)))
    return pred


def _package(pred: Node, dl: Denotation, dr: Denotation | None,
             conj: Conjecture) -> InvariantSyntax:
    quantified = _quantified(pred, dl, dr, conj)
    return InvariantSyntax(
        predicate=pred,
        display_quantified=quantified.text(unicode=True),
        display_settheoretic=pred.text(unicode=True),
    )


def render(inv: InvariantSyntax) -> tuple[str, str]:
    """(quantified, set-theoretic) display forms."""
    return inv.display_quantified, inv.display_settheoretic
