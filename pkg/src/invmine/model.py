"""Machines, contexts, events, and the well-sortedness checker."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .syntax import (
    ANY_RELATION, INT_TYPE, INTEGER, PARTIAL_FUNCTION, RELATION, SCALAR,
    SET_OF, TOTAL_FUNCTION, And, Apply, AtomLit, BinOp, Card, Compare,
    ConstRef, FalsePred, Iff, Implies, IntLit, InverseImage, Maplet, Node,
    Not, Or, Quantifier, SetLit, Sort, SortSet, TruePred, Var, VarShape,
    atom_type, children, free_vars, pair_type, set_type, substitute,
    type_text,
)

RESERVED_SORTS = {"state", "int"}


@dataclass(frozen=True)
class Constant:
    name: str
    shape: VarShape
    value: object        # evaluated literal value (atom str / int / frozenset)


@dataclass(frozen=True)
class Labelled:
    label: str
    pred: Node


@dataclass(frozen=True)
class Action:
    """`var := expr`, or a function point update `var(index) := expr`."""

    var: str
    expr: Node
    index: Node | None = None

    def text(self, unicode: bool = False) -> str:
        if self.index is not None:
            return f"{self.var}({self.index.text(unicode)}) := {self.expr.text(unicode)}"
        return f"{self.var} := {self.expr.text(unicode)}"


@dataclass(frozen=True)
class Event:
    name: str
    refines: str | None
    params: tuple[tuple[str, str], ...]      # (name, sort)
    guards: tuple[Labelled, ...]
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class Context:
    sorts: tuple[Sort, ...]
    constants: tuple[Constant, ...]
    axioms: tuple[Labelled, ...]

    def sort(self, name: str) -> Sort | None:
        for s in self.sorts:
            if s.name == name:
                return s
        return None


@dataclass(frozen=True)
class Machine:
    name: str
    context: Context
    variables: tuple[tuple[str, VarShape], ...]
    invariants: tuple[Labelled, ...]
    init: tuple[Action, ...]
    events: tuple[Event, ...]

    def var_shape(self, name: str) -> VarShape | None:
        for n, s in self.variables:
            if n == name:
                return s
        return None

    def event(self, name: str) -> Event | None:
        for e in self.events:
            if e.name == name:
                return e
        return None

    def with_invariant(self, label: str, pred: Node) -> "Machine":
        return replace(self, invariants=self.invariants + (Labelled(label, pred),))


@dataclass(frozen=True)
class Diagnostic:
    message: str
    where: str = ""

    def __str__(self):
        return f"{self.where}: {self.message}" if self.where else self.message


class ModelError(Exception):
    """Raised for unusable models (parse is separate, see parser.ParseError)."""


# ---------------------------------------------------------------------------
# Typing

def shape_type(shape: VarShape):
    if shape.kind == SCALAR:
        return atom_type(shape.sort)
    if shape.kind == SET_OF:
        return set_type(atom_type(shape.sort))
    if shape.kind == RELATION:
        return set_type(pair_type(atom_type(shape.domain_sort), atom_type(shape.range_sort)))
    return INT_TYPE


def sort_elem_type(machine: Machine, sort_name: str):
    s = machine.context.sort(sort_name)
    if s is not None and s.is_int_range:
        return INT_TYPE
    return atom_type(sort_name)


class TypeEnv:
    """Symbol table mapping names to types for the checker."""

    def __init__(self, machine: Machine, extra: dict[str, object] | None = None):
        self.machine = machine
        self.extra = dict(extra or {})

    def with_bound(self, name: str, typ) -> "TypeEnv":
        env = TypeEnv(self.machine, self.extra)
        env.extra[name] = typ
        return env

    def lookup(self, name: str):
        if name in self.extra:
            return self.extra[name]
        shape = self.machine.var_shape(name)
        if shape is not None:
            return shape_type(shape)
        for c in self.machine.context.constants:
            if c.name == name:
                return shape_type(c.shape)
        return None


class SortError(Exception):
    def __init__(self, message: str, node: Node | None = None):
        super().__init__(message)
        self.node = node


def _norm(machine: Machine, t):
    """Collapse int-range atom types to the int type."""
    if t[0] == "atom":
        s = machine.context.sort(t[1])
        if s is not None and s.is_int_range:
            return INT_TYPE
        return t
    if t[0] == "set":
        return set_type(_norm(machine, t[1]))
    if t[0] == "pair":
        return pair_type(_norm(machine, t[1]), _norm(machine, t[2]))
    return t


def infer_type(node: Node, env: TypeEnv):
    """Type of an expression; raises SortError for ill-sorted terms."""
    m = env.machine

    def rec(n: Node):
        if isinstance(n, Var) or isinstance(n, ConstRef):
            t = env.lookup(n.name)
            if t is None:
                raise SortError(f"undeclared identifier {n.name}", n)
            return _norm(m, t)
        if isinstance(n, AtomLit):
            return _norm(m, atom_type(n.sort))
        if isinstance(n, IntLit):
            return INT_TYPE
        if isinstance(n, SortSet):
            return set_type(sort_elem_type(m, n.sort))
        if isinstance(n, SetLit):
            if not n.items:
                return ("set", None)   # polymorphic empty set
            ts = [rec(e) for e in n.items]
            for t in ts[1:]:
                if t != ts[0]:
                    raise SortError("mixed element sorts in set literal", n)
            return set_type(ts[0])
        if isinstance(n, Maplet):
            return pair_type(rec(n.left), rec(n.right))
        if isinstance(n, BinOp):
            lt, rt = rec(n.left), rec(n.right)
            if n.op in ("+", "-", "*", "/"):
                if lt != INT_TYPE or rt != INT_TYPE:
                    raise SortError(f"arithmetic on non-integers", n)
                return INT_TYPE
            if lt[0] != "set" or rt[0] != "set":
                raise SortError(f"set operator on non-sets", n)
            if lt[1] is None:
                return rt
            if rt[1] is not None and lt != rt:
                raise SortError(
                    f"set operands differ: {type_text(lt)} vs {type_text(rt)}", n)
            return lt
        if isinstance(n, InverseImage):
            ft, at = rec(n.fn), rec(n.arg)
            if ft[0] != "set" or ft[1] is None or ft[1][0] != "pair":
                raise SortError("inverse image of a non-relation", n)
            want = set_type(ft[1][2])
            if at[1] is not None and at != want:
                raise SortError("inverse image argument has wrong element sort", n)
            return set_type(ft[1][1])
        if isinstance(n, Apply):
            ft, at = rec(n.fn), rec(n.arg)
            if ft[0] != "set" or ft[1] is None or ft[1][0] != "pair":
                raise SortError("application of a non-relation", n)
            if at != ft[1][1]:
                raise SortError("function argument has wrong sort", n)
            return ft[1][2]
        if isinstance(n, Card):
            at = rec(n.arg)
            if at[0] != "set":
                raise SortError("card of a non-set", n)
            return INT_TYPE
        raise SortError(f"expression expected, found predicate {n!r}", n)

    return rec(node)


def check_predicate(node: Node, env: TypeEnv) -> None:
    """Well-sortedness of a predicate; raises SortError."""
    m = env.machine
    if isinstance(node, (TruePred, FalsePred)):
        return
    if isinstance(node, Compare):
        lt = infer_type(node.left, env)
        rt = infer_type(node.right, env)
        if node.op in ("le", "lt", "ge", "gt"):
            if lt != INT_TYPE or rt != INT_TYPE:
                raise SortError("order comparison on non-integers", node)
            return
        if node.op == "in":
            if rt[0] != "set":
                raise SortError("membership in a non-set", node)
            if rt[1] is not None and lt != rt[1]:
                raise SortError(
                    f"member sort {type_text(lt)} does not match set of {type_text(rt[1])}",
                    node)
            return
        if node.op == "subset":
            if lt[0] != "set" or rt[0] != "set":
                raise SortError("subset on non-sets", node)
            if lt[1] is not None and rt[1] is not None and lt != rt:
                raise SortError("subset operands differ in sort", node)
            return
        # eq / ne
        if (lt[0] == "set" and lt[1] is None) or \
                (rt[0] == "set" and rt[1] is None):
            if lt[0] != "set" or rt[0] != "set":
                raise SortError("equality between set and non-set", node)
            return
        if lt != rt:
            raise SortError(
                f"equality operands differ: {type_text(lt)} vs {type_text(rt)}", node)
        return
    if isinstance(node, Not):
        check_predicate(node.arg, env)
        return
    if isinstance(node, (And, Or, Implies, Iff)):
        check_predicate(node.left, env)
        check_predicate(node.right, env)
        return
    if isinstance(node, Quantifier):
        if env.lookup(node.var) is not None:
            raise SortError(f"bound variable {node.var} shadows a declaration", node)
        if env.machine.context.sort(node.sort) is None:
            raise SortError(f"quantifier over unknown sort {node.sort}", node)
        check_predicate(node.body, env.with_bound(node.var, sort_elem_type(m, node.sort)))
        return
    raise SortError(f"predicate expected, found expression {node!r}", node)


# ---------------------------------------------------------------------------
# check_model

def check_model(machine: Machine) -> list[Diagnostic]:
    """Static checks; empty list means the machine is usable."""
    out: list[Diagnostic] = []
    env = TypeEnv(machine)
    ctx = machine.context

    seen_atoms: dict[str, str] = {}
    names: set[str] = set()
    for s in ctx.sorts:
        if s.name in RESERVED_SORTS:
            out.append(Diagnostic(f"sort name {s.name} is reserved", s.name))
        if s.name in names:
            out.append(Diagnostic(f"duplicate declaration {s.name}", s.name))
        names.add(s.name)
        for a in s.elements:
            if a in seen_atoms:
                out.append(Diagnostic(
                    f"atom {a} declared in both {seen_atoms[a]} and {s.name}", s.name))
            seen_atoms[a] = s.name
            if a in names:
                out.append(Diagnostic(f"duplicate declaration {a}", s.name))
            names.add(a)

    for c in ctx.constants:
        if c.name in names:
            out.append(Diagnostic(f"duplicate declaration {c.name}", c.name))
        names.add(c.name)
    for vname, shape in machine.variables:
        if vname in names:
            out.append(Diagnostic(f"duplicate declaration {vname}", vname))
        names.add(vname)
        for sn in (shape.sort, shape.domain_sort, shape.range_sort):
            if sn is not None and ctx.sort(sn) is None:
                out.append(Diagnostic(f"unknown sort {sn}", vname))

    def check_pred_in(p: Labelled, where: str, extra=None):
        try:
            check_predicate(p.pred, TypeEnv(machine, extra))
        except SortError as e:
            out.append(Diagnostic(str(e), f"{where}/{p.label}"))

    for ax in ctx.axioms:
        check_pred_in(ax, "axiom")
    for inv in machine.invariants:
        check_pred_in(inv, "invariant")

    # init must assign every variable exactly once, from constants only
    assigned: set[str] = set()
    for act in machine.init:
        if act.var in assigned:
            out.append(Diagnostic(f"init assigns {act.var} twice", "init"))
        assigned.add(act.var)
        refs = free_vars(act.expr)
        bad = [r for r in refs if machine.var_shape(r) is not None]
        if bad:
            out.append(Diagnostic(
                f"init expression for {act.var} references variables {sorted(bad)}",
                "init"))
        _check_action(machine, act, env, out, "init", {})
    for vname, _ in machine.variables:
        if vname not in assigned:
            out.append(Diagnostic(f"uninitialised variable {vname}", "init"))

    # events
    for ev in machine.events:
        extra = {}
        for pname, psort in ev.params:
            if machine.var_shape(pname) is not None or pname in names:
                out.append(Diagnostic(
                    f"parameter {pname} shadows a declaration", ev.name))
            if ctx.sort(psort) is None:
                out.append(Diagnostic(f"unknown sort {psort}", ev.name))
            else:
                extra[pname] = sort_elem_type(machine, psort)
        for g in ev.guards:
            check_pred_in(g, ev.name, extra)
        lhs_seen: set[str] = set()
        for act in ev.actions:
            if act.var in lhs_seen:
                out.append(Diagnostic(
                    f"event {ev.name} assigns {act.var} twice", ev.name))
            lhs_seen.add(act.var)
            _check_action(machine, act, env, out, ev.name, extra)

    # axioms are closed facts over interpreted constants: report false ones
    if not out:
        from .semantics import EvalError, eval_predicate
        for ax in ctx.axioms:
            try:
                if not eval_predicate(ax.pred, {}, machine):
                    out.append(Diagnostic("axiom does not hold", f"axiom/{ax.label}"))
            except EvalError as e:
                out.append(Diagnostic(f"axiom evaluation failed: {e}",
                                      f"axiom/{ax.label}"))
    return out


def _check_action(machine: Machine, act: Action, env: TypeEnv,
                  out: list[Diagnostic], where: str, extra) -> None:
    shape = machine.var_shape(act.var)
    if shape is None:
        out.append(Diagnostic(f"assignment to undeclared variable {act.var}", where))
        return
    e = TypeEnv(machine, extra)
    try:
        if act.index is not None:
            if shape.kind != RELATION:
                out.append(Diagnostic(
                    f"point update on non-relation {act.var}", where))
                return
            it = infer_type(act.index, e)
            if it != _norm(machine, atom_type(shape.domain_sort)):
                out.append(Diagnostic(
                    f"point update index sort mismatch on {act.var}", where))
            vt = infer_type(act.expr, e)
            if vt != _norm(machine, atom_type(shape.range_sort)):
                out.append(Diagnostic(
                    f"point update value sort mismatch on {act.var}", where))
            return
        want = _norm(machine, shape_type(shape))
        got = infer_type(act.expr, e)
        if got[0] == "set" and got[1] is None and want[0] == "set":
            return
        if got != want:
            out.append(Diagnostic(
                f"assignment to {act.var}: expected {type_text(want)}, "
                f"got {type_text(got)}", where))
    except SortError as err:
        out.append(Diagnostic(str(err), where))


# ---------------------------------------------------------------------------
# Substitution semantics of actions (used by obligation generation)

def action_substitution(machine: Machine, actions: tuple[Action, ...]) -> dict[str, Node]:
    """The parallel substitution denoted by a list of actions."""
    mapping: dict[str, Node] = {}
    for act in actions:
        if act.index is not None:
            mapping[act.var] = BinOp("override", Var(act.var),
                                     SetLit((Maplet(act.index, act.expr),)))
        else:
            mapping[act.var] = act.expr
    return mapping


# ---------------------------------------------------------------------------
# Refinement pair composition

def compose_pair(abstract: Machine, concrete: Machine) -> Machine:
    """One machine animating both levels in lockstep.

    Concrete events drive the system; each executes its abstract
    counterpart's actions too. Shared variables must agree in shape and may
    only be assigned identically on both levels.
    """
    a_sorts = {s.name: s for s in abstract.context.sorts}
    sorts = list(abstract.context.sorts)
    for s in concrete.context.sorts:
        if s.name in a_sorts:
            if a_sorts[s.name] != s:
                raise ModelError(f"sort {s.name} differs between machines")
        else:
            sorts.append(s)
    consts = list(abstract.context.constants)
    cnames = {c.name for c in consts}
    for c in concrete.context.constants:
        if c.name in cnames:
            if c not in consts:
                raise ModelError(f"constant {c.name} differs between machines")
        else:
            consts.append(c)
    axioms = list(abstract.context.axioms)
    alabels = {ax.label for ax in axioms}
    for ax in concrete.context.axioms:
        if ax.label in alabels:
            continue
        axioms.append(ax)

    avars = dict(abstract.variables)
    variables = list(abstract.variables)
    for name, shape in concrete.variables:
        if name in avars:
            if avars[name] != shape:
                raise ModelError(f"shared variable {name} differs in shape")
        else:
            variables.append((name, shape))

    invs = [Labelled(f"abs_{i.label}", i.pred) for i in abstract.invariants]
    invs += [Labelled(f"conc_{i.label}", i.pred) for i in concrete.invariants]

    init_map = {a.var: a for a in concrete.init}
    init = list(concrete.init)
    for act in abstract.init:
        if act.var in init_map:
            if init_map[act.var] != act:
                raise ModelError(f"shared variable {act.var} initialised differently")
            continue
        init.append(act)

    events = []
    for ce in concrete.events:
        guards = [Labelled(f"c_{g.label}", g.pred) for g in ce.guards]
        actions = list(ce.actions)
        assigned = {a.var for a in actions}
        if ce.refines is not None:
            ae = abstract.event(ce.refines)
            if ae is None:
                raise ModelError(
                    f"event {ce.name} refines unknown abstract event {ce.refines}")
            cparams = dict(ce.params)
            for pname, psort in ae.params:
                if cparams.get(pname) != psort:
                    raise ModelError(
                        f"abstract parameter {pname}:{psort} of {ae.name} has no "
                        f"matching parameter in {ce.name}")
            guards += [Labelled(f"a_{g.label}", g.pred) for g in ae.guards]
            for act in ae.actions:
                if act.var in assigned:
                    if act not in ce.actions:
                        raise ModelError(
                            f"event {ce.name}: conflicting action for shared "
                            f"variable {act.var}")
                    continue
                actions.append(act)
        events.append(Event(ce.name, None, ce.params, tuple(guards), tuple(actions)))

    return Machine(
        name=f"{abstract.name}+{concrete.name}",
        context=Context(tuple(sorts), tuple(consts), tuple(axioms)),
        variables=tuple(variables),
        invariants=tuple(invs),
        init=tuple(init),
        events=tuple(events),
    )


# ---------------------------------------------------------------------------
# Canonical model printing (parse . print == identity on canonical form)

def print_model(machine: Machine) -> str:
    lines: list[str] = []
    ctx = machine.context
    if ctx.sorts or ctx.constants or ctx.axioms:
        lines.append("CONTEXT")
        for s in ctx.sorts:
            if s.is_int_range:
                lines.append(f"  set {s.name} = {s.lo} .. {s.hi}")
            else:
                lines.append(f"  set {s.name} = {{{', '.join(s.elements)}}}")
        for c in ctx.constants:
            lines.append(f"  const {c.name} : {shape_text(c.shape)} = "
                         f"{value_literal(c.value)}")
        for ax in ctx.axioms:
            lines.append(f"  axiom {ax.label}: {ax.pred.text()}")
    lines.append(f"MACHINE {machine.name}")
    for name, shape in machine.variables:
        lines.append(f"  var {name} : {shape_text(shape)}")
    for inv in machine.invariants:
        lines.append(f"  invariant {inv.label}: {inv.pred.text()}")
    for act in machine.init:
        lines.append(f"  init {act.text()}")
    for ev in machine.events:
        lines.append(f"  event {ev.name}")
        if ev.refines:
            lines.append(f"    refines {ev.refines}")
        if ev.params:
            lines.append("    any " + ", ".join(f"{n} : {s}" for n, s in ev.params))
        if ev.guards:
            lines.append("    where")
            for g in ev.guards:
                lines.append(f"      {g.label}: {g.pred.text()}")
        if ev.actions:
            lines.append("    then")
            for a in ev.actions:
                lines.append(f"      {a.text()}")
        lines.append("    end")
    lines.append("END")
    return "\n".join(lines) + "\n"


def shape_text(shape: VarShape) -> str:
    if shape.kind == SCALAR:
        return shape.sort
    if shape.kind == SET_OF:
        return f"set of {shape.sort}"
    if shape.kind == RELATION:
        arrow = {ANY_RELATION: "<->", PARTIAL_FUNCTION: "+->",
                 TOTAL_FUNCTION: "-->"}[shape.constraint]
        return f"{shape.domain_sort} {arrow} {shape.range_sort}"
    return f"{shape.lo} .. {shape.hi}"


def value_literal(value) -> str:
    """Canonical literal text for a constant value."""
    from .semantics import value_text
    return value_text(value)
