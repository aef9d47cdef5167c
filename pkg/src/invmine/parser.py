"""Concrete syntax: tokenizer and recursive-descent parser.

Model files have a CONTEXT section (set/const/axiom) followed by a MACHINE
section (var/invariant/init/event). Predicate syntax follows the usual
ASCII conventions (`:` membership, `\\/` union, `|->` maplet, `~[...]`
inverse image) and also accepts the unicode equivalents.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    Action, Constant, Context, Event, Labelled, Machine, TypeEnv,
    check_predicate, infer_type, SortError,
)
from .semantics import EvalError, eval_expr
from .syntax import (
    ANY_RELATION, And, Apply, AtomLit, BinOp, Card, Compare, ConstRef,
    FalsePred, Iff, Implies, IntLit, InverseImage, Maplet, Node, Not, Or,
    PARTIAL_FUNCTION, Quantifier, SetLit, Sort, SortSet, TOTAL_FUNCTION,
    TruePred, Var, VarShape,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str      # IDENT INT OP KW EOF
    text: str
    line: int
    col: int


KEYWORDS = {
    "CONTEXT", "MACHINE", "END", "set", "const", "axiom", "var", "invariant",
    "init", "event", "refines", "any", "where", "then", "end", "of",
    "forall", "exists", "not", "or", "true", "false", "card", "in",
}

# longest first so the tokenizer is greedy
_OPERATORS = [
    ":=", "|->", "<->", "-->", "+->", "<=>", "<+", "<:", "<=", ">=", "/=",
    "=>", "\\/", "/\\", "..", "~", "(", ")", "{", "}", "[", "]", ",", ":",
    ".", "=", "<", ">", "+", "-", "*", "/", "\\", "&",
]

_UNICODE_MAP = {
    "∈": ":", "∪": "\\/", "∩": "/\\", "∖": "\\",
    "⊆": "<:", "≤": "<=", "≥": ">=", "≠": "/=",
    "¬": "not", "∧": "&", "∨": "or", "⇒": "=>",
    "⇔": "<=>", "∀": "forall", "∃": "exists",
    "↦": "|->", "⊤": "true", "⊥": "false",
    "∅": "EMPTYSET", "⁻¹": "~",
}


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        matched = None
        for u, repl in _UNICODE_MAP.items():
            if text.startswith(u, i):
                matched = (u, repl)
                break
        if matched:
            u, repl = matched
            if repl == "EMPTYSET":
                tokens.append(Token("OP", "{", line, col))
                tokens.append(Token("OP", "}", line, col))
            elif repl in KEYWORDS:
                tokens.append(Token("KW", repl, line, col))
            else:
                tokens.append(Token("OP", repl, line, col))
            i += len(u)
            col += len(u)
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "KW" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("OP", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


@dataclass(frozen=True)
class Symbols:
    """Name resolution for predicate parsing."""

    sorts: dict[str, Sort]
    atoms: dict[str, str]          # atom -> sort
    constants: frozenset[str]
    variables: frozenset[str]

    @staticmethod
    def of(machine: Machine, extra_vars=()) -> "Symbols":
        sorts = {s.name: s for s in machine.context.sorts}
        atoms = {a: s.name for s in machine.context.sorts for a in s.elements}
        return Symbols(
            sorts=sorts,
            atoms=atoms,
            constants=frozenset(c.name for c in machine.context.constants),
            variables=frozenset(n for n, _ in machine.variables) | frozenset(extra_vars),
        )

    def with_vars(self, names) -> "Symbols":
        return Symbols(self.sorts, self.atoms, self.constants,
                       self.variables | frozenset(names))


class _Parser:
    def __init__(self, tokens: list[Token], symbols: Symbols | None = None):
        self.tokens = tokens
        self.pos = 0
        self.symbols = symbols or Symbols({}, {}, frozenset(), frozenset())

    # -- token plumbing

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def fail(self, message: str):
        t = self.peek()
        raise ParseError(message, t.line, t.col)

    # -- predicates

    def predicate(self) -> Node:
        return self._iff()

    def _iff(self) -> Node:
        left = self._implies()
        while self.at("OP", "<=>"):
            self.next()
            left = Iff(left, self._implies())
        return left

    def _implies(self) -> Node:
        left = self._or()
        if self.at("OP", "=>"):
            self.next()
            return Implies(left, self._implies())
        return left

    def _or(self) -> Node:
        left = self._and()
        while self.at("KW", "or"):
            self.next()
            left = Or(left, self._and())
        return left

    def _and(self) -> Node:
        left = self._not()
        while self.at("OP", "&"):
            self.next()
            left = And(left, self._not())
        return left

    def _not(self) -> Node:
        if self.at("KW", "not"):
            self.next()
            return Not(self._not())
        if self.at("KW", "forall") or self.at("KW", "exists"):
            kind = self.next().text
            name = self.expect("IDENT").text
            self.expect("OP", ":")
            sort = self.expect("IDENT").text
            self.expect("OP", ".")
            outer = self.symbols
            self.symbols = outer.with_vars({name})
            try:
                body = self.predicate()
            finally:
                self.symbols = outer
            return Quantifier(kind, name, sort, body)
        return self._atom_pred()

    _RELOPS = {"=": "eq", "/=": "ne", "<=": "le", "<": "lt", ">=": "ge",
               ">": "gt", ":": "in", "<:": "subset"}

    def _atom_pred(self) -> Node:
        if self.at("KW", "true"):
            self.next()
            return TruePred()
        if self.at("KW", "false"):
            self.next()
            return FalsePred()
        if self.at("OP", "("):
            # Could be a parenthesised predicate or a parenthesised
            # expression followed by a relational operator. Backtrack once.
            mark = self.pos
            self.next()
            try:
                inner = self.predicate()
                self.expect("OP", ")")
            except ParseError:
                self.pos = mark
            else:
                t = self.peek()
                if t.kind == "OP" and t.text in self._RELOPS or self.at("KW", "in"):
                    self.pos = mark    # it was an expression after all
                else:
                    return inner
        left = self.expr()
        t = self.peek()
        if self.at("KW", "in"):
            self.next()
            return Compare("in", left, self.expr())
        if t.kind == "OP" and t.text in self._RELOPS:
            self.next()
            return Compare(self._RELOPS[t.text], left, self.expr())
        self.fail("expected a relational operator")

    # -- expressions

    def expr(self) -> Node:
        return self._maplet()

    def _maplet(self) -> Node:
        left = self._override()
        if self.at("OP", "|->"):
            self.next()
            return Maplet(left, self._override())
        return left

    def _override(self) -> Node:
        left = self._additive()
        while self.at("OP", "<+"):
            self.next()
            left = BinOp("override", left, self._additive())
        return left

    def _additive(self) -> Node:
        left = self._multiplicative()
        while True:
            if self.at("OP", "\\/"):
                self.next()
                left = BinOp("union", left, self._multiplicative())
            elif self.at("OP", "\\"):
                self.next()
                left = BinOp("diff", left, self._multiplicative())
            elif self.at("OP", "+"):
                self.next()
                left = BinOp("+", left, self._multiplicative())
            elif self.at("OP", "-"):
                self.next()
                left = BinOp("-", left, self._multiplicative())
            else:
                return left

    def _multiplicative(self) -> Node:
        left = self._postfix()
        while True:
            if self.at("OP", "/\\"):
                self.next()
                left = BinOp("inter", left, self._postfix())
            elif self.at("OP", "*"):
                self.next()
                left = BinOp("*", left, self._postfix())
            elif self.at("OP", "/"):
                self.next()
                left = BinOp("/", left, self._postfix())
            else:
                return left

    def _postfix(self) -> Node:
        node = self._primary()
        while True:
            if self.at("OP", "~"):
                self.next()
                self.expect("OP", "[")
                arg = self.expr()
                self.expect("OP", "]")
                node = InverseImage(node, arg)
            elif self.at("OP", "(") and isinstance(node, (Var, ConstRef)):
                self.next()
                arg = self.expr()
                self.expect("OP", ")")
                node = Apply(node, arg)
            else:
                return node

    def _primary(self) -> Node:
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return IntLit(int(t.text))
        if self.at("OP", "-") and self.peek(1).kind == "INT":
            self.next()
            return IntLit(-int(self.next().text))
        if self.at("KW", "card"):
            self.next()
            self.expect("OP", "(")
            arg = self.expr()
            self.expect("OP", ")")
            return Card(arg)
        if self.at("OP", "{"):
            self.next()
            items: list[Node] = []
            if not self.at("OP", "}"):
                items.append(self.expr())
                while self.accept("OP", ","):
                    items.append(self.expr())
            self.expect("OP", "}")
            return SetLit(tuple(items))
        if self.at("OP", "("):
            self.next()
            inner = self.expr()
            self.expect("OP", ")")
            return inner
        if t.kind == "IDENT":
            self.next()
            return self.resolve(t)
        self.fail(f"expected an expression, found {t.text!r}")

    def resolve(self, t: Token) -> Node:
        name = t.text
        sym = self.symbols
        if name in sym.variables:
            return Var(name)
        if name in sym.constants:
            return ConstRef(name)
        if name in sym.atoms:
            return AtomLit(name, sym.atoms[name])
        if name in sym.sorts:
            return SortSet(name)
        raise ParseError(f"undeclared identifier {name}", t.line, t.col)


# ---------------------------------------------------------------------------
# Public predicate/expression entry points

def parse_predicate(text: str, machine: Machine, extra_vars=()) -> Node:
    """Parse (and sort-check) a predicate against a machine's symbols."""
    p = _Parser(tokenize(text), Symbols.of(machine, extra_vars))
    node = p.predicate()
    p.expect("EOF")
    return node


def parse_expr(text: str, machine: Machine, extra_vars=()) -> Node:
    p = _Parser(tokenize(text), Symbols.of(machine, extra_vars))
    node = p.expr()
    p.expect("EOF")
    return node


# ---------------------------------------------------------------------------
# Model files

def parse_model(text: str) -> Machine:
    """Parse a model file; raises ParseError with line/column on failure."""
    p = _Parser(tokenize(text))
    sorts: list[Sort] = []
    constants: list[Constant] = []
    axioms: list[Labelled] = []

    def current_symbols(vars_=()):
        return Symbols(
            sorts={s.name: s for s in sorts},
            atoms={a: s.name for s in sorts for a in s.elements},
            constants=frozenset(c.name for c in constants),
            variables=frozenset(vars_),
        )

    if p.accept("KW", "CONTEXT"):
        while True:
            if p.accept("KW", "set"):
                t = p.expect("IDENT")
                p.expect("OP", "=")
                if p.at("OP", "{"):
                    p.next()
                    elems = [p.expect("IDENT").text]
                    while p.accept("OP", ","):
                        elems.append(p.expect("IDENT").text)
                    p.expect("OP", "}")
                    try:
                        sorts.append(Sort(t.text, elements=tuple(elems)))
                    except ValueError as e:
                        raise ParseError(str(e), t.line, t.col) from None
                else:
                    lo = int(p.expect("INT").text)
                    p.expect("OP", "..")
                    hi = int(p.expect("INT").text)
                    try:
                        sorts.append(Sort(t.text, lo=lo, hi=hi))
                    except ValueError as e:
                        raise ParseError(str(e), t.line, t.col) from None
            elif p.accept("KW", "const"):
                t = p.expect("IDENT")
                p.expect("OP", ":")
                shape = _parse_shape(p)
                p.expect("OP", "=")
                p.symbols = current_symbols()
                expr = p.expr()
                mini = Machine("ctx", Context(tuple(sorts), tuple(constants), ()),
                               (), (), (), ())
                try:
                    value = eval_expr(expr, {}, mini)
                except EvalError as e:
                    raise ParseError(f"constant {t.text}: {e}", t.line, t.col) from None
                constants.append(Constant(t.text, shape, value))
            elif p.accept("KW", "axiom"):
                t = p.expect("IDENT")
                p.expect("OP", ":")
                p.symbols = current_symbols()
                axioms.append(Labelled(t.text, p.predicate()))
            else:
                break

    p.expect("KW", "MACHINE")
    mname = p.expect("IDENT").text
    variables: list[tuple[str, VarShape]] = []
    invariants: list[Labelled] = []
    init: list[Action] = []
    events: list[Event] = []

    def machine_symbols(extra=()):
        return current_symbols(
            tuple(n for n, _ in variables) + tuple(extra))

    while True:
        if p.accept("KW", "var"):
            t = p.expect("IDENT")
            p.expect("OP", ":")
            variables.append((t.text, _parse_shape(p)))
        elif p.accept("KW", "invariant"):
            t = p.expect("IDENT")
            p.expect("OP", ":")
            p.symbols = machine_symbols()
            invariants.append(Labelled(t.text, p.predicate()))
        elif p.accept("KW", "init"):
            p.symbols = machine_symbols()
            init.append(_parse_action(p))
        elif p.accept("KW", "event"):
            events.append(_parse_event(p, machine_symbols))
        elif p.accept("KW", "END"):
            break
        else:
            p.fail("expected a machine section keyword")
    p.expect("EOF")
    return Machine(
        name=mname,
        context=Context(tuple(sorts), tuple(constants), tuple(axioms)),
        variables=tuple(variables),
        invariants=tuple(invariants),
        init=tuple(init),
        events=tuple(events),
    )


def _parse_shape(p: _Parser) -> VarShape:
    if p.accept("KW", "set"):
        p.expect("KW", "of")
        return VarShape.set_of(p.expect("IDENT").text)
    if p.peek().kind == "INT":
        lo = int(p.next().text)
        p.expect("OP", "..")
        hi = int(p.expect("INT").text)
        return VarShape.integer(lo, hi)
    first = p.expect("IDENT").text
    for op, constraint in (("<->", ANY_RELATION), ("+->", PARTIAL_FUNCTION),
                           ("-->", TOTAL_FUNCTION)):
        if p.accept("OP", op):
            return VarShape.relation(first, p.expect("IDENT").text, constraint)
    return VarShape.scalar(first)


def _parse_action(p: _Parser) -> Action:
    t = p.expect("IDENT")
    index = None
    if p.accept("OP", "("):
        index = p.expr()
        p.expect("OP", ")")
    p.expect("OP", ":=")
    expr = p.expr()
    return Action(t.text, expr, index)


def _parse_event(p: _Parser, machine_symbols) -> Event:
    name = p.expect("IDENT").text
    refines = None
    params: list[tuple[str, str]] = []
    guards: list[Labelled] = []
    actions: list[Action] = []
    if p.accept("KW", "refines"):
        refines = p.expect("IDENT").text
    if p.accept("KW", "any"):
        while True:
            pn = p.expect("IDENT").text
            p.expect("OP", ":")
            ps = p.expect("IDENT").text
            params.append((pn, ps))
            if not p.accept("OP", ","):
                break
    pnames = tuple(n for n, _ in params)
    if p.accept("KW", "where"):
        while p.peek().kind == "IDENT" and p.peek(1).kind == "OP" \
                and p.peek(1).text == ":":
            label = p.next().text
            p.next()
            p.symbols = machine_symbols(pnames)
            guards.append(Labelled(label, p.predicate()))
    if p.accept("KW", "then"):
        p.symbols = machine_symbols(pnames)
        while p.peek().kind == "IDENT":
            actions.append(_parse_action(p))
    p.expect("KW", "end")
    return Event(name, refines, tuple(params), tuple(guards), tuple(actions))
