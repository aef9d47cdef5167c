"""Evaluation of expressions/predicates and finite value domains.

Runtime values: atoms are strings, integers are ints, pairs are 2-tuples,
sets and relations are frozensets. Everything is hashable so valuations
and concept tables can be deduplicated structurally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .model import Machine
from .syntax import (
    ANY_RELATION, INTEGER, PARTIAL_FUNCTION, RELATION, SCALAR, SET_OF,
    TOTAL_FUNCTION, And, Apply, AtomLit, BinOp, Card, Compare, ConstRef,
    FalsePred, Iff, Implies, IntLit, InverseImage, Maplet, Node, Not, Or,
    Quantifier, SetLit, Sort, SortSet, TruePred, Var, VarShape,
)


class EvalError(Exception):
    """Evaluation failure (partial application, inexact division, ...)."""

    def __init__(self, message: str, node: Node | None = None):
        super().__init__(message)
        self.node = node


def value_sort_key(v):
    """Total order on runtime values, for canonical printing."""
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, int):
        return (0, v)
    if isinstance(v, str):
        return (1, v)
    if isinstance(v, tuple):
        return (2, tuple(value_sort_key(x) for x in v))
    return (3, tuple(sorted(value_sort_key(x) for x in v)))


def value_text(v) -> str:
    """Canonical literal text for a value (parseable back)."""
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return f"{value_text(v[0])} |-> {value_text(v[1])}"
    items = sorted(v, key=value_sort_key)
    return "{" + ", ".join(value_text(x) for x in items) + "}"


def value_to_json(v):
    if isinstance(v, (int, str)):
        return v
    if isinstance(v, tuple):
        return [value_to_json(v[0]), value_to_json(v[1])]
    return [value_to_json(x) for x in sorted(v, key=value_sort_key)]


def value_from_json(v):
    if isinstance(v, (int, str)):
        return v
    return frozenset(
        tuple(value_from_json(y) for y in x) if isinstance(x, list) else x
        for x in v
    )


# ---------------------------------------------------------------------------
# Evaluation

def eval_expr(node: Node, env: dict, machine: Machine):
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise EvalError(f"unbound variable {node.name}", node) from None
    if isinstance(node, ConstRef):
        for c in machine.context.constants:
            if c.name == node.name:
                return c.value
        if node.name in env:
            return env[node.name]
        raise EvalError(f"unknown constant {node.name}", node)
    if isinstance(node, AtomLit):
        return node.name
    if isinstance(node, IntLit):
        return node.value
    if isinstance(node, SortSet):
        s = machine.context.sort(node.sort)
        if s is None:
            raise EvalError(f"unknown sort {node.sort}", node)
        return frozenset(s.values())
    if isinstance(node, SetLit):
        return frozenset(eval_expr(e, env, machine) for e in node.items)
    if isinstance(node, Maplet):
        return (eval_expr(node.left, env, machine),
                eval_expr(node.right, env, machine))
    if isinstance(node, BinOp):
        lv = eval_expr(node.left, env, machine)
        rv = eval_expr(node.right, env, machine)
        op = node.op
        if op == "union":
            return lv | rv
        if op == "inter":
            return lv & rv
        if op == "diff":
            return lv - rv
        if op == "override":
            dom = {p[0] for p in rv}
            return frozenset(p for p in lv if p[0] not in dom) | rv
        if op == "+":
            return lv + rv
        if op == "-":
            return lv - rv
        if op == "*":
            return lv * rv
        if op == "/":
            if rv == 0:
                raise EvalError("division by zero", node)
            if lv % rv != 0:
                raise EvalError(f"inexact division {lv}/{rv}", node)
            return lv // rv
        raise EvalError(f"unknown operator {op}", node)
    if isinstance(node, InverseImage):
        fv = eval_expr(node.fn, env, machine)
        sv = eval_expr(node.arg, env, machine)
        return frozenset(p[0] for p in fv if p[1] in sv)
    if isinstance(node, Apply):
        fv = eval_expr(node.fn, env, machine)
        av = eval_expr(node.arg, env, machine)
        hits = [p[1] for p in fv if p[0] == av]
        if not hits:
            raise EvalError(f"application outside domain: {value_text(av)}", node)
        if len(hits) > 1:
            raise EvalError(f"non-functional application at {value_text(av)}", node)
        return hits[0]
    if isinstance(node, Card):
        return len(eval_expr(node.arg, env, machine))
    raise EvalError(f"not an expression: {node!r}", node)


def eval_predicate(node: Node, env: dict, machine: Machine) -> bool:
    if isinstance(node, TruePred):
        return True
    if isinstance(node, FalsePred):
        return False
    if isinstance(node, Compare):
        lv = eval_expr(node.left, env, machine)
        rv = eval_expr(node.right, env, machine)
        op = node.op
        if op == "eq":
            return lv == rv
        if op == "ne":
            return lv != rv
        if op == "in":
            return lv in rv
        if op == "subset":
            return lv <= rv
        if op == "le":
            return lv <= rv
        if op == "lt":
            return lv < rv
        if op == "ge":
            return lv >= rv
        if op == "gt":
            return lv > rv
        raise EvalError(f"unknown comparison {op}", node)
    if isinstance(node, Not):
        return not eval_predicate(node.arg, env, machine)
    if isinstance(node, And):
        return (eval_predicate(node.left, env, machine)
                and eval_predicate(node.right, env, machine))
    if isinstance(node, Or):
        return (eval_predicate(node.left, env, machine)
                or eval_predicate(node.right, env, machine))
    if isinstance(node, Implies):
        return ((not eval_predicate(node.left, env, machine))
                or eval_predicate(node.right, env, machine))
    if isinstance(node, Iff):
        return (eval_predicate(node.left, env, machine)
                == eval_predicate(node.right, env, machine))
    if isinstance(node, Quantifier):
        s = machine.context.sort(node.sort)
        if s is None:
            raise EvalError(f"unknown sort {node.sort}", node)
        inner = dict(env)
        if node.kind == "forall":
            for v in s.values():
                inner[node.var] = v
                if not eval_predicate(node.body, inner, machine):
                    return False
            return True
        for v in s.values():
            inner[node.var] = v
            if eval_predicate(node.body, inner, machine):
                return True
        return False
    raise EvalError(f"not a predicate: {node!r}", node)


# ---------------------------------------------------------------------------
# Finite domains for enumeration and sampling

@dataclass(frozen=True)
class Domain:
    """Enumerable value domain of a variable or event parameter."""

    size: int
    kind: str
    parts: tuple = ()

    def iterate(self):
        """All values in canonical order."""
        kind = self.kind
        if kind == "scalar":
            yield from self.parts
        elif kind == "set":
            elems = self.parts
            for bits in itertools.product((False, True), repeat=len(elems)):
                yield frozenset(e for e, b in zip(elems, bits) if b)
        elif kind == "pfun":
            dom, rng = self.parts
            choices = (None,) + tuple(rng)
            for pick in itertools.product(choices, repeat=len(dom)):
                yield frozenset((d, r) for d, r in zip(dom, pick) if r is not None)
        elif kind == "tfun":
            dom, rng = self.parts
            for pick in itertools.product(tuple(rng), repeat=len(dom)):
                yield frozenset(zip(dom, pick))
        elif kind == "rel":
            pairs = self.parts
            for bits in itertools.product((False, True), repeat=len(pairs)):
                yield frozenset(p for p, b in zip(pairs, bits) if b)
        else:
            raise ValueError(kind)

    def first(self):
        return next(iter(self.iterate()))

    def sample(self, rng):
        kind = self.kind
        if kind == "scalar":
            return self.parts[rng.randrange(len(self.parts))]
        if kind in ("set", "rel"):
            return frozenset(e for e in self.parts if rng.random() < 0.5)
        dom, rngv = self.parts
        if kind == "pfun":
            choices = (None,) + tuple(rngv)
            return frozenset((d, c) for d in dom
                             for c in (choices[rng.randrange(len(choices))],)
                             if c is not None)
        return frozenset((d, rngv[rng.randrange(len(rngv))]) for d in dom)

    def contains(self, value) -> bool:
        kind = self.kind
        if kind == "scalar":
            return value in self.parts
        if kind in ("set", "rel"):
            universe = set(self.parts)
            return isinstance(value, frozenset) and set(value) <= universe
        dom, rng = self.parts
        if not isinstance(value, frozenset):
            return False
        keys = [p[0] for p in value]
        ok = (all(p[0] in dom and p[1] in rng for p in value)
              and len(keys) == len(set(keys)))
        if kind == "tfun":
            ok = ok and set(keys) == set(dom)
        return ok


def sort_domain(machine: Machine, sort_name: str) -> Domain:
    s = machine.context.sort(sort_name)
    if s is None:
        raise EvalError(f"unknown sort {sort_name}")
    vals = s.values()
    return Domain(len(vals), "scalar", tuple(vals))


def shape_domain(machine: Machine, shape: VarShape) -> Domain:
    if shape.kind == SCALAR:
        return sort_domain(machine, shape.sort)
    if shape.kind == INTEGER:
        vals = tuple(range(shape.lo, shape.hi + 1))
        return Domain(len(vals), "scalar", vals)
    if shape.kind == SET_OF:
        elems = sort_domain(machine, shape.sort).parts
        return Domain(2 ** len(elems), "set", elems)
    dom = sort_domain(machine, shape.domain_sort).parts
    rng = sort_domain(machine, shape.range_sort).parts
    if shape.constraint == PARTIAL_FUNCTION:
        return Domain((len(rng) + 1) ** len(dom), "pfun", (dom, rng))
    if shape.constraint == TOTAL_FUNCTION:
        return Domain(len(rng) ** len(dom), "tfun", (dom, rng))
    pairs = tuple((d, r) for d in dom for r in rng)
    return Domain(2 ** len(pairs), "rel", pairs)


def free_domain(machine: Machine, spec) -> Domain:
    """Domain for a free-variable spec: a sort name or a VarShape."""
    if isinstance(spec, VarShape):
        return shape_domain(machine, spec)
    return sort_domain(machine, spec)
