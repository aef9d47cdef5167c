"""Abstract syntax for the finite set-theoretic modelling language.

A model talks about three kinds of data: atoms drawn from enumerated
sorts, integers drawn from bounded ranges, and finite sets/relations over
those. Expressions and predicates share one recursive syntax; everything
is immutable so structural equality doubles as term identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# Sorts and variable shapes


@dataclass(frozen=True)
class Sort:
    """A finite carrier: either an enumeration of atoms or an integer range."""

    name: str
    elements: tuple[str, ...] = ()   # enumerated atoms, in declaration order
    lo: int | None = None            # int_range bounds (inclusive)
    hi: int | None = None

    @property
    def is_int_range(self) -> bool:
        return self.lo is not None

    def values(self) -> tuple:
        """All carrier values in canonical order."""
        if self.is_int_range:
            return tuple(range(self.lo, self.hi + 1))
        return self.elements

    def __post_init__(self):
        if self.is_int_range:
            if self.hi is None or self.lo > self.hi:
                raise ValueError(f"sort {self.name}: empty integer range")
        else:
            if not self.elements:
                raise ValueError(f"sort {self.name}: no elements")
            if len(set(self.elements)) != len(self.elements):
                raise ValueError(f"sort {self.name}: duplicate elements")


SCALAR = "scalar"
SET_OF = "set_of"
RELATION = "relation"
INTEGER = "integer"

ANY_RELATION = "any"
PARTIAL_FUNCTION = "partial_function"
TOTAL_FUNCTION = "total_function"


@dataclass(frozen=True)
class VarShape:
    """The shape of a state variable (what values it may hold)."""

    kind: str                       # SCALAR | SET_OF | RELATION | INTEGER
    sort: str | None = None         # scalar/set element sort
    domain_sort: str | None = None  # relation domain
    range_sort: str | None = None   # relation range
    constraint: str = ANY_RELATION  # relation functional constraint
    lo: int | None = None           # integer bounds
    hi: int | None = None

    @staticmethod
    def scalar(sort: str) -> "VarShape":
        return VarShape(SCALAR, sort=sort)

    @staticmethod
    def set_of(sort: str) -> "VarShape":
        return VarShape(SET_OF, sort=sort)

    @staticmethod
    def relation(domain: str, rng: str, constraint: str = ANY_RELATION) -> "VarShape":
        return VarShape(RELATION, domain_sort=domain, range_sort=rng, constraint=constraint)

    @staticmethod
    def integer(lo: int, hi: int) -> "VarShape":
        return VarShape(INTEGER, lo=lo, hi=hi)


# ---------------------------------------------------------------------------
# Types used by the well-sortedness checker

INT_TYPE = ("int",)


def atom_type(sort: str):
    return ("atom", sort)


def set_type(elem):
    return ("set", elem)


def pair_type(left, right):
    return ("pair", left, right)


def type_text(t) -> str:
    if t == INT_TYPE:
        return "int"
    if t[0] == "atom":
        return t[1]
    if t[0] == "set":
        return f"set of {type_text(t[1])}"
    if t[0] == "pair":
        return f"{type_text(t[1])} |-> {type_text(t[2])}"
    return str(t)


# ---------------------------------------------------------------------------
# Expression / predicate nodes

_UNICODE = {
    "in": "∈", "union": "∪", "inter": "∩", "diff": "∖",
    "subset": "⊆", "le": "≤", "ge": "≥", "ne": "≠",
    "not": "¬", "and": "∧", "or": "∨", "implies": "⇒",
    "iff": "⇔", "forall": "∀", "exists": "∃",
    "maplet": "↦", "true": "⊤", "false": "⊥",
    "empty": "∅", "inverse": "⁻¹",
}

_ASCII = {
    "in": ":", "union": "\\/", "inter": "/\\", "diff": "\\",
    "subset": "<:", "le": "<=", "ge": ">=", "ne": "/=",
    "not": "not", "and": "&", "or": "or", "implies": "=>",
    "iff": "<=>", "forall": "forall", "exists": "exists",
    "maplet": "|->", "true": "true", "false": "false",
    "empty": "{}", "inverse": "~",
}


class Node:
    """Base class: immutable AST node."""

    __slots__ = ()

    # Precedence levels for printing (higher binds tighter).
    prec = 100

    def text(self, unicode: bool = False) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.text()


def _wrap(node: Node, parent_prec: int, unicode: bool) -> str:
    s = node.text(unicode)
    if node.prec < parent_prec:
        return f"({s})"
    return s


# -- expressions

@dataclass(frozen=True)
class Var(Node):
    name: str
    prec = 100

    def text(self, unicode=False):
        return self.name


@dataclass(frozen=True)
class ConstRef(Node):
    name: str
    prec = 100

    def text(self, unicode=False):
        return self.name


@dataclass(frozen=True)
class AtomLit(Node):
    name: str
    sort: str
    prec = 100

    def text(self, unicode=False):
        return self.name


@dataclass(frozen=True)
class IntLit(Node):
    value: int
    prec = 100

    def text(self, unicode=False):
        return str(self.value)


@dataclass(frozen=True)
class SortSet(Node):
    """An enumerated sort used as the full carrier set."""

    sort: str
    prec = 100

    def text(self, unicode=False):
        return self.sort


@dataclass(frozen=True)
class SetLit(Node):
    items: tuple[Node, ...]
    prec = 100

    def text(self, unicode=False):
        if not self.items:
            return _UNICODE["empty"] if unicode else _ASCII["empty"]
        return "{" + ", ".join(e.text(unicode) for e in self.items) + "}"


@dataclass(frozen=True)
class Maplet(Node):
    left: Node
    right: Node
    prec = 35

    def text(self, unicode=False):
        op = _UNICODE["maplet"] if unicode else _ASCII["maplet"]
        return f"{_wrap(self.left, 36, unicode)} {op} {_wrap(self.right, 36, unicode)}"


@dataclass(frozen=True)
class BinOp(Node):
    """Binary set/arithmetic operator: union inter diff + - * / override."""

    op: str        # "union" "inter" "diff" "+" "-" "*" "/" "override"
    left: Node
    right: Node

    @property
    def prec(self):  # type: ignore[override]
        return {"override": 38, "union": 40, "diff": 40, "+": 40, "-": 40,
                "inter": 50, "*": 50, "/": 50}[self.op]

    def text(self, unicode=False):
        table = {"union": _UNICODE["union"] if unicode else _ASCII["union"],
                 "inter": _UNICODE["inter"] if unicode else _ASCII["inter"],
                 "diff": _UNICODE["diff"] if unicode else _ASCII["diff"],
                 "override": "<+"}
        op = table.get(self.op, self.op)
        p = self.prec
        # left-associative: right operand needs strictly higher precedence
        return f"{_wrap(self.left, p, unicode)} {op} {_wrap(self.right, p + 1, unicode)}"


@dataclass(frozen=True)
class InverseImage(Node):
    fn: Node
    arg: Node      # a set expression
    prec = 90

    def text(self, unicode=False):
        inv = _UNICODE["inverse"] if unicode else _ASCII["inverse"]
        return f"{_wrap(self.fn, 91, unicode)}{inv}[{self.arg.text(unicode)}]"


@dataclass(frozen=True)
class Apply(Node):
    fn: Node
    arg: Node
    prec = 90

    def text(self, unicode=False):
        return f"{_wrap(self.fn, 91, unicode)}({self.arg.text(unicode)})"


@dataclass(frozen=True)
class Card(Node):
    arg: Node
    prec = 100

    def text(self, unicode=False):
        return f"card({self.arg.text(unicode)})"


# -- predicates

@dataclass(frozen=True)
class TruePred(Node):
    prec = 100

    def text(self, unicode=False):
        return _UNICODE["true"] if unicode else _ASCII["true"]


@dataclass(frozen=True)
class FalsePred(Node):
    prec = 100

    def text(self, unicode=False):
        return _UNICODE["false"] if unicode else _ASCII["false"]


@dataclass(frozen=True)
class Compare(Node):
    """Atomic predicate: = /= <= < >= > in subset."""

    op: str
    left: Node
    right: Node
    prec = 30

    def text(self, unicode=False):
        table = {"in": _UNICODE["in"] if unicode else _ASCII["in"],
                 "subset": _UNICODE["subset"] if unicode else _ASCII["subset"],
                 "le": _UNICODE["le"] if unicode else _ASCII["le"],
                 "ge": _UNICODE["ge"] if unicode else _ASCII["ge"],
                 "ne": _UNICODE["ne"] if unicode else _ASCII["ne"],
                 "eq": "=", "lt": "<", "gt": ">"}
        op = table[self.op]
        return f"{_wrap(self.left, 31, unicode)} {op} {_wrap(self.right, 31, unicode)}"


@dataclass(frozen=True)
class Not(Node):
    arg: Node
    prec = 25

    def text(self, unicode=False):
        kw = _UNICODE["not"] if unicode else _ASCII["not"]
        sep = "" if unicode else " "
        return f"{kw}{sep}{_wrap(self.arg, 26, unicode)}"


@dataclass(frozen=True)
class And(Node):
    left: Node
    right: Node
    prec = 20

    def text(self, unicode=False):
        op = _UNICODE["and"] if unicode else _ASCII["and"]
        return f"{_wrap(self.left, 20, unicode)} {op} {_wrap(self.right, 21, unicode)}"


@dataclass(frozen=True)
class Or(Node):
    left: Node
    right: Node
    prec = 15

    def text(self, unicode=False):
        op = _UNICODE["or"] if unicode else _ASCII["or"]
        return f"{_wrap(self.left, 15, unicode)} {op} {_wrap(self.right, 16, unicode)}"


@dataclass(frozen=True)
class Implies(Node):
    left: Node
    right: Node
    prec = 10

    def text(self, unicode=False):
        op = _UNICODE["implies"] if unicode else _ASCII["implies"]
        # right-associative
        return f"{_wrap(self.left, 11, unicode)} {op} {_wrap(self.right, 10, unicode)}"


@dataclass(frozen=True)
class Iff(Node):
    left: Node
    right: Node
    prec = 5

    def text(self, unicode=False):
        op = _UNICODE["iff"] if unicode else _ASCII["iff"]
        return f"{_wrap(self.left, 6, unicode)} {op} {_wrap(self.right, 6, unicode)}"


@dataclass(frozen=True)
class Quantifier(Node):
    """forall/exists over a declared (finite) sort."""

    kind: str      # "forall" | "exists"
    var: str
    sort: str
    body: Node
    prec = 3

    def text(self, unicode=False):
        kw = _UNICODE[self.kind] if unicode else _ASCII[self.kind]
        return f"{kw} {self.var} : {self.sort} . {self.body.text(unicode)}"


# ---------------------------------------------------------------------------
# Generic traversal helpers

def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Maplet, BinOp, Compare, And, Or, Implies, Iff)):
        return (node.left, node.right)
    if isinstance(node, (InverseImage, Apply)):
        return (node.fn, node.arg)
    if isinstance(node, (Not, Card)):
        return (node.arg,)
    if isinstance(node, SetLit):
        return node.items
    if isinstance(node, Quantifier):
        return (node.body,)
    return ()


def free_vars(node: Node) -> frozenset[str]:
    """Names of free state/parameter variables in a term."""
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Quantifier):
        return free_vars(node.body) - {node.var}
    out: set[str] = set()
    for c in children(node):
        out |= free_vars(c)
    return frozenset(out)


def atoms_used(node: Node) -> frozenset[tuple[str, str]]:
    """(atom, sort) pairs literally occurring in a term."""
    if isinstance(node, AtomLit):
        return frozenset({(node.name, node.sort)})
    out: set[tuple[str, str]] = set()
    for c in children(node):
        out |= atoms_used(c)
    return frozenset(out)


def const_refs(node: Node) -> frozenset[str]:
    if isinstance(node, ConstRef):
        return frozenset({node.name})
    out: set[str] = set()
    for c in children(node):
        out |= const_refs(c)
    return frozenset(out)


def uses_arithmetic(node: Node) -> bool:
    if isinstance(node, BinOp) and node.op in ("+", "-", "*", "/"):
        return True
    return any(uses_arithmetic(c) for c in children(node))


def comparison_ops(node: Node) -> frozenset[str]:
    """Order comparison operators (<, >, <=, >=) occurring in a predicate."""
    out: set[str] = set()
    if isinstance(node, Compare) and node.op in ("lt", "gt", "le", "ge"):
        out.add(node.op)
    for c in children(node):
        out |= comparison_ops(c)
    return frozenset(out)


def substitute(node: Node, mapping: dict[str, Node]) -> Node:
    """Parallel substitution of variables by expressions (capture-checked)."""
    if not mapping:
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Quantifier):
        if node.var in mapping:
            raise ValueError(f"substitution would capture bound variable {node.var}")
        return Quantifier(node.kind, node.var, node.sort, substitute(node.body, mapping))
    if isinstance(node, Maplet):
        return Maplet(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, InverseImage):
        return InverseImage(substitute(node.fn, mapping), substitute(node.arg, mapping))
    if isinstance(node, Apply):
        return Apply(substitute(node.fn, mapping), substitute(node.arg, mapping))
    if isinstance(node, Card):
        return Card(substitute(node.arg, mapping))
    if isinstance(node, SetLit):
        return SetLit(tuple(substitute(e, mapping) for e in node.items))
    if isinstance(node, Compare):
        return Compare(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Not):
        return Not(substitute(node.arg, mapping))
    if isinstance(node, And):
        return And(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Or):
        return Or(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Implies):
        return Implies(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Iff):
        return Iff(substitute(node.left, mapping), substitute(node.right, mapping))
    return node


def conjoin(preds: list[Node]) -> Node:
    if not preds:
        return TruePred()
    out = preds[0]
    for p in preds[1:]:
        out = And(out, p)
    return out
