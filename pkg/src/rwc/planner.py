"""Compile preprocessed function units into rewrite plans and link them.

Each function gets its own plan: the function's alternatives in
specificity order, each a chain of argument tests and bindings that ends in
a construction, followed by the normal-form fallthrough.  Arguments are
discriminated left to right.  List patterns with several list variables
become one backtracking :class:`~rwc.plan.ListLoop` per variable that has
something after it; the last one takes whatever is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .lang.ast import (BOOLEANS, LIST_ACCESSORS, LIST_BUILDERS, LIST_PREDICATES, App,
                       Nested, Rule, SymbolDecl, Var, flatten_list, is_list_expr,
                       is_list_pattern)
from .plan import (ArgOf, Bind, Block, Build, Call, CheckEqual, CheckList, CheckSym, Const,
                   ConstSlot, Fail, FallthroughNormalForm, ForceRef, GuardNonEmpty,
                   GuardSingle, ListBuild, ListLoop, ListOp, Loop, Normalize, Pred,
                   Return, RewritePlan, SliceRef, SlotRef, children, expr_slots,
                   node_exprs, walk_expr, walk_nodes)
from .preprocess import FunctionUnit, constructor_predicate
from .specificity import duplicate_pairs, specificity_order


class CompileError(Exception):
    pass


class LinkError(Exception):
    pass


# -- ordering ------------------------------------------------------------------

def order_rules(u: FunctionUnit) -> tuple[list[Rule], list[str]]:
    """Specificity order with textual tie-break and defaults last, plus
    diagnostics for duplicate unconditional rules."""
    rs = specificity_order(u.rules)
    diags = [f"warning: rules [{a.label}] and [{b.label}] of {u.name} have the same "
             f"left-hand side and no conditions; [{b.label}] is unreachable"
             for a, b in duplicate_pairs(rs)]
    return rs, diags


# -- unit compiler -------------------------------------------------------------

@dataclass(frozen=True)
class _Binding:
    slot: int
    end: int | None = None  # set for loop-bound list variables: slice(slot, end)
    raw: bool = False       # value may contain unevaluated (delayed) subterms


class _Scope:
    __slots__ = ("vars", "lists")

    def __init__(self, vars: dict | None = None, lists: frozenset = frozenset()):
        self.vars = vars or {}
        self.lists = lists

    def bind(self, key: str, b: _Binding) -> "_Scope":
        d = dict(self.vars)
        d[key] = b
        lists = self.lists | {b.slot} if key[:1] in "*+" and b.end is None else self.lists
        return _Scope(d, lists)

    def known_list(self, *slots: int) -> "_Scope":
        return _Scope(self.vars, self.lists | set(slots))


def _is_ground(e) -> bool:
    if isinstance(e, Var):
        return False
    return all(_is_ground(a) for a in e.args)


class _UnitCompiler:
    def __init__(self, u: FunctionUnit, decls: Mapping[tuple, SymbolDecl],
                 reorder_args: bool = False):
        self.u = u
        self.decls = decls
        self.is_ctor = constructor_predicate(decls)
        self.arity = u.decl.arity
        self.delay = frozenset(u.decl.delay)
        self.next_slot = self.arity
        self.reorder = reorder_args

    def slot(self) -> int:
        s = self.next_slot
        self.next_slot += 1
        return s

    # -- expressions ---------------------------------------------------------

    def _ctor_only(self, e) -> bool:
        if isinstance(e, Var):
            return False
        if e.name in LIST_ACCESSORS or e.name in LIST_PREDICATES:
            return False
        if not self.is_ctor(e.name, e.arity):
            return False
        return all(self._ctor_only(a) for a in e.args)

    def _ref(self, b: _Binding):
        return SlotRef(b.slot) if b.end is None else SliceRef(b.slot, b.end)

    def _lookup(self, v: Var, sc: _Scope) -> _Binding:
        b = sc.vars.get(v.key)
        if b is None:
            raise CompileError(f"{self.u.name}: variable {v.key} used before it is bound")
        return b

    def value(self, e, sc: _Scope):
        """Expression computing the normal form of ``e``."""
        if isinstance(e, Var):
            b = self._lookup(e, sc)
            r = self._ref(b)
            return ForceRef(r) if b.raw else r
        if _is_ground(e) and self._ctor_only(e):
            return Const(e)
        name = e.name
        if name in LIST_BUILDERS:
            items = flatten_list(e)
            return ListBuild(tuple(self.value(x, sc) for x in items),
                             tuple(is_list_expr(x) for x in items))
        if name in LIST_ACCESSORS:
            return ListOp(name, self.value(e.args[0], sc))
        if name in LIST_PREDICATES:
            return Pred(name, self.value(e.args[0], sc))
        ident = (name, e.arity)
        if self.is_ctor(*ident):
            return Build(ident, tuple(self.value(a, sc) for a in e.args))
        d = self.decls.get(ident)
        if d is None:
            raise CompileError(f"{self.u.name}: undeclared symbol {name}/{e.arity}")
        delayed = set(d.delay)
        return Call(ident, tuple(self.raw(a, sc) if j in delayed else self.value(a, sc)
                                 for j, a in enumerate(e.args)))

    def raw(self, e, sc: _Scope):
        """Expression building ``e`` without rewriting (delayed argument)."""
        if isinstance(e, Var):
            return self._ref(self._lookup(e, sc))
        if _is_ground(e) and self._ctor_only(e):
            return Const(e)
        name = e.name
        if name in LIST_BUILDERS:
            items = flatten_list(e)
            return ListBuild(tuple(self.raw(x, sc) for x in items),
                             tuple(is_list_expr(x) for x in items), nf=False)
        if name in LIST_ACCESSORS:
            return ListOp(name, self.raw(e.args[0], sc))
        if name in LIST_PREDICATES:
            return Pred(name, self.raw(e.args[0], sc))
        return Build((name, e.arity), tuple(self.raw(a, sc) for a in e.args), nf=False)

    def with_value(self, e, sc: _Scope, k: Callable):
        """Make the normal form of ``e`` available as a simple operand and
        continue with ``k(operand)``; calls get their own Normalize slot."""
        v = self.value(e, sc)
        if isinstance(v, (SlotRef, Const, SliceRef)):
            return k(v)
        s = self.slot()
        return Normalize(s, v, k(SlotRef(s)), note=_short(e))

    # -- patterns ------------------------------------------------------------

    def pattern(self, p, subj: int, sc: _Scope, k: Callable, raw: bool = False):
        """Match pattern ``p`` against the term in slot ``subj``."""
        if isinstance(p, Var):
            b = sc.vars.get(p.key)
            if b is not None:
                # already bound: an identity check against the bound value
                return CheckEqual(SlotRef(subj), self._ref(b), k(sc), note=p.key)
            known = subj in sc.lists
            sc2 = sc.bind(p.key, _Binding(subj, None, raw))
            body = k(sc2)
            if p.kind == "+":
                return GuardNonEmpty(subj, body)
            if p.kind == "*" and not known:
                return _check_list(subj, body)
            return body
        if is_list_pattern(p):
            return self.list_match(flatten_list(p), subj, sc, k, raw)
        if not p.args:
            return CheckEqual(SlotRef(subj), Const(p), k(sc), note=p.name)
        return CheckSym(subj, (p.name, p.arity), self._args(p, subj, sc, k, raw))

    def _args(self, p: App, subj: int, sc: _Scope, k: Callable, raw: bool):
        # bind every argument that needs a slot first, then match in order
        slots: list[int | None] = []
        for a in p.args:
            if isinstance(a, App) and not a.args and not is_list_pattern(a):
                slots.append(None)
            elif isinstance(a, Var) and a.key in sc.vars:
                slots.append(None)
            else:
                slots.append(self.slot())

        def step(j: int, sc2: _Scope):
            if j == len(p.args):
                return k(sc2)
            a = p.args[j]
            s = slots[j]
            if s is None:
                other = Const(a) if isinstance(a, App) else self._ref(sc2.vars[a.key])
                return CheckEqual(ArgOf(subj, j), other, step(j + 1, sc2),
                                  note=a.name if isinstance(a, App) else a.key)
            return self.pattern(a, s, sc2, lambda sc3: step(j + 1, sc3), raw)

        node = step(0, sc)
        for j in reversed(range(len(p.args))):
            if slots[j] is not None:
                node = Bind(slots[j], ArgOf(subj, j), node)
        return node

    def list_match(self, items: list, subj: int, sc: _Scope, k: Callable, raw: bool = False):
        """Match a flat list pattern; loops for every list variable but a trailing one."""
        def go(i: int, cur: int, sc2: _Scope):
            if i == len(items):
                return GuardNonEmpty(cur, Fail(), k(sc2))
            x = items[i]
            if isinstance(x, Var) and x.is_list:
                if i == len(items) - 1:
                    return self.pattern(x, cur, sc2.known_list(cur), k, raw)
                b, e = self.slot(), self.slot()
                bound = sc2.vars.get(x.key)
                if bound is not None:
                    body = CheckEqual(SliceRef(b, e), self._ref(bound),
                                      go(i + 1, e, sc2.known_list(e)), note=x.key)
                else:
                    body = go(i + 1, e, sc2.bind(x.key, _Binding(b, e, raw)).known_list(e))
                return ListLoop(x.name, cur, b, e, x.kind == "+", body)
            h, t = self.slot(), self.slot()
            inner = self.pattern(x, h, sc2.known_list(t), lambda sc3: go(i + 1, t, sc3), raw)
            return GuardNonEmpty(cur, Bind(h, ListOp("list_head", SlotRef(cur)),
                                           Bind(t, ListOp("list_tail", SlotRef(cur)), inner)))

        node = go(0, subj, sc.known_list(subj))
        if subj in sc.lists:
            return node
        return _check_list(subj, node)

    # -- conditions ------------------------------------------------------------

    def conditions(self, conds, sc: _Scope, k: Callable):
        def go(i: int, sc2: _Scope):
            if i == len(conds):
                return k(sc2)
            c = conds[i]
            if c.op in ("==", "!="):
                def test(x, then_fn):
                    def inner(y):
                        rest = then_fn()
                        if c.op == "==":
                            return CheckEqual(x, y, rest)
                        return CheckEqual(x, y, Fail(), rest)
                    return self.with_value(c.rhs, sc2, inner)
                return self.with_value(c.lhs, sc2, lambda x: test(x, lambda: go(i + 1, sc2)))
            return self.assignment(c.lhs, c.rhs, sc2, lambda sc3: go(i + 1, sc3))

        return go(0, sc)

    def assignment(self, p, e, sc: _Scope, k: Callable):
        if (isinstance(p, App) and p.name in BOOLEANS and not p.args
                and isinstance(e, App) and e.name in LIST_PREDICATES):
            guard = GuardNonEmpty if e.name == "not_empty_list" else GuardSingle

            def mk(s):
                rest = k(sc)
                return guard(s, rest) if p.name == "t" else guard(s, Fail(), rest)
            return self._in_slot(e.args[0], sc, lambda s, _raw: mk(s))
        if isinstance(p, Var) and p.key in sc.vars:
            b = sc.vars[p.key]
            return self.with_value(e, sc, lambda y: CheckEqual(self._ref(b), y, k(sc), note=p.key))
        known = _yields_list(e)
        return self._in_slot(
            e, sc, lambda s, raw: self.pattern(p, s, sc.known_list(s) if known else sc, k, raw))

    def _in_slot(self, e, sc: _Scope, k: Callable):
        """Put the value of ``e`` in a slot and continue with ``k(slot, raw)``."""
        if isinstance(e, Var):
            b = self._lookup(e, sc)
            if b.end is None:
                return k(b.slot, b.raw)
            s = self.slot()
            return Bind(s, SliceRef(b.slot, b.end), k(s, b.raw))
        s = self.slot()
        if isinstance(e, App) and e.name in LIST_ACCESSORS and isinstance(e.args[0], Var):
            b = self._lookup(e.args[0], sc)
            node = k(s, b.raw)
            return Bind(s, ListOp(e.name, self._ref(b)), node, note=_short(e))
        v = self.value(e, sc)
        if isinstance(v, (Const, SlotRef)):
            return Bind(s, v, k(s, False))
        return Normalize(s, v, k(s, False), note=_short(e))

    # -- bodies ----------------------------------------------------------------

    def body(self, b, sc: _Scope):
        if isinstance(b, Nested):
            alts = [self.alt(a, sc) for a in b.alts]
            return alts[0] if len(alts) == 1 else Block(tuple(alts))
        return Return(self.value(b, sc))

    def alt(self, a, sc: _Scope):
        if a.orelse is not None:
            c = a.conditions[0]

            def build(x, y):
                then = self.body(a.body, sc)
                other = self.alt(a.orelse, sc)
                if c.op == "==":
                    return CheckEqual(x, y, then, other)
                return CheckEqual(x, y, other, then)
            return self.with_value(c.lhs, sc, lambda x: self.with_value(c.rhs, sc, lambda y: build(x, y)))
        return self.conditions(a.conditions, sc, lambda sc2: self.body(a.body, sc2))

    # -- rules -----------------------------------------------------------------

    def arg_order(self, rules) -> list[int]:
        order = list(range(self.arity))
        if not self.reorder:
            return order
        counts = [sum(1 for r in rules if not isinstance(r.lhs.args[i], Var)) for i in order]
        return sorted(order, key=lambda i: -counts[i])

    def rule(self, r: Rule, order: list[int]):
        def step(j: int, sc: _Scope):
            if j == len(order):
                return self.conditions(r.conditions, sc, lambda sc2: self.body(r.rhs, sc2))
            i = order[j]
            return self.pattern(r.lhs.args[i], i, sc, lambda sc2: step(j + 1, sc2),
                                raw=i in self.delay)
        return step(0, _Scope())

    def compile(self) -> RewritePlan:
        rules, _ = order_rules(self.u)
        order = self.arg_order(rules)
        alts = [self.rule(r, order) for r in rules]
        if self.reorder:
            alts = _factor(alts)
        body = Block(tuple(alts) + (FallthroughNormalForm(),))
        plan = RewritePlan(self.u.symbol, body, self.next_slot, False, tuple(sorted(self.delay)),
                           tuple(r.label for r in rules))
        check_plan(plan)
        return plan


def _yields_list(e) -> bool:
    return isinstance(e, Var) and e.is_list or isinstance(e, App) and (
        e.name in LIST_BUILDERS or e.name in ("list_tail", "list_prefix"))


def _check_list(slot: int, node):
    # a non-emptiness guard on the same slot already implies a list
    if isinstance(node, GuardNonEmpty) and node.slot == slot and isinstance(node.else_, Fail):
        return node
    return CheckList(slot, node)


def _short(e) -> str:
    return str(e)


def _factor(alts: list) -> list:
    """Merge adjacent alternatives that start with the same pure constant test."""
    out: list = []
    for a in alts:
        prev = out[-1] if out else None
        if (_factorable(a) and _factorable(prev) and prev.a == a.a and prev.b == a.b):
            inner = list(prev.then.children) if isinstance(prev.then, Block) else [prev.then]
            out[-1] = replace(prev, then=Block(tuple(_factor(inner + [a.then]))))
        else:
            out.append(a)
    return [replace(x, then=Block(tuple(_factor(list(x.then.children)))))
            if _factorable(x) and isinstance(x.then, Block) else x for x in out]


def _factorable(n) -> bool:
    return (isinstance(n, CheckEqual) and isinstance(n.else_, Fail)
            and isinstance(n.a, SlotRef) and isinstance(n.b, Const))


def compile_unit(u: FunctionUnit, decls: Mapping[tuple, SymbolDecl] | None = None,
                 reorder_args: bool = False) -> RewritePlan:
    """Compile one preprocessed unit.  ``decls`` is the visible signature."""
    if decls is None:
        decls = {u.decl.ident: u.decl}
        decls.update({c: SymbolDecl(c[0], c[1], frozenset({"constructor"})) for c in u.constructors})
    return _UnitCompiler(u, decls, reorder_args).compile()


def compile_list_match(items: list, subject: int = 0, arity: int = 1,
                       k: Callable | None = None):
    """Stand-alone list-pattern compilation (inspection and tests)."""
    dummy = FunctionUnit(SymbolDecl("_match", arity), ())
    c = _UnitCompiler(dummy, {})
    k = k or (lambda sc: Return(ListBuild(tuple(c._ref(b) for _, b in sorted(sc.vars.items())),
                                          tuple(True for _ in sc.vars))))
    return c.list_match(items, subject, _Scope(), k)


def wrap_memo(p: RewritePlan, memo: bool = True) -> RewritePlan:
    return p if p.memoized == memo else replace(p, memoized=memo)


# -- static checks -------------------------------------------------------------

def check_plan(p: RewritePlan) -> None:
    """Def-before-use over every path, and a final fallthrough at the root."""
    body = p.body
    if not (isinstance(body, Block) and body.children
            and isinstance(body.children[-1], FallthroughNormalForm)):
        raise CompileError(f"{p.name}: plan must end in the normal-form fallthrough")

    def need(slots: set[int], defined: frozenset, what):
        missing = slots - defined
        if missing:
            raise CompileError(f"{p.name}: {what} reads unbound slot(s) "
                               f"{', '.join(map(str, sorted(missing)))}")

    def go(n, defined: frozenset):
        for e in node_exprs(n):
            need(expr_slots(e), defined, type(n).__name__)
            for x in walk_expr(e):
                if isinstance(x, ConstSlot) and x.id < 0:
                    raise CompileError(f"{p.name}: bad constant id")
        if isinstance(n, (CheckSym, GuardNonEmpty, GuardSingle, CheckList)):
            need({n.slot}, defined, type(n).__name__)
        if isinstance(n, (Bind, Normalize)):
            go(n.then, defined | {n.slot})
        elif isinstance(n, ListLoop):
            need({n.subject}, defined, "ListLoop")
            go(n.body, defined | {n.begin, n.end})
            go(n.exhausted, defined)
        elif isinstance(n, Loop):
            if len(n.args) != p.symbol[1]:
                raise CompileError(f"{p.name}: loop back-edge with wrong arity")
        else:
            for c in children(n):
                go(c, defined)

    go(body, frozenset(range(p.symbol[1])))
    for n in walk_nodes(body):
        if isinstance(n, (Bind, Normalize, ListLoop)):
            top = max([n.slot] if not isinstance(n, ListLoop) else [n.begin, n.end])
            if top >= p.frame_size:
                raise CompileError(f"{p.name}: slot {top} outside frame of {p.frame_size}")


def plan_calls(p: RewritePlan) -> set[tuple]:
    out = set()
    for n in walk_nodes(p.body):
        for e in node_exprs(n):
            for x in walk_expr(e):
                if isinstance(x, Call):
                    out.add(x.sym)
    return out


def loop_depth(n) -> int:
    """Maximum nesting of list loops in a node tree."""
    if isinstance(n, ListLoop):
        return 1 + max(loop_depth(n.body), loop_depth(n.exhausted))
    return max([loop_depth(c) for c in children(n)], default=0)


# -- linking -------------------------------------------------------------------

@dataclass
class Program:
    """Linked plans plus the signature needed to build terms at run time.

    ``constants[i]`` is the ground expression behind ``ConstSlot(i)``.
    """
    plans: dict[tuple, RewritePlan]
    decls: dict[tuple, SymbolDecl]
    constants: list = field(default_factory=list)
    units: dict[str, str] = field(default_factory=dict)  # unit name -> fingerprint
    report: dict = field(default_factory=dict)

    def plan(self, name: str, arity: int | None = None) -> RewritePlan:
        for k, p in self.plans.items():
            if k[0] == name and (arity is None or k[1] == arity):
                return p
        raise KeyError(name)

    @property
    def constructors(self) -> list[SymbolDecl]:
        return [d for d in self.decls.values() if d.constructor]

    def symbol_table(self) -> dict[tuple, str]:
        """Identifier -> "plan" or "constructor"."""
        out = {k: "plan" for k in self.plans}
        for d in self.constructors:
            out[d.ident] = "constructor"
        return out


def link_program(plans: Iterable[RewritePlan], constructors: Iterable[SymbolDecl] = (),
                 decls: Mapping[tuple, SymbolDecl] | None = None,
                 constants: list | None = None) -> Program:
    table: dict[tuple, RewritePlan] = {}
    for p in plans:
        if p.symbol in table:
            raise LinkError(f"duplicate registration of {p.name}")
        table[p.symbol] = p
    all_decls: dict[tuple, SymbolDecl] = dict(decls or {})
    for c in constructors:
        if c.ident in table:
            raise LinkError(f"{c.name}/{c.arity} registered as both function and constructor")
        all_decls.setdefault(c.ident, c)
    for k, p in table.items():
        all_decls.setdefault(k, SymbolDecl(k[0], k[1], delay=p.delay))
    for p in table.values():
        for callee in sorted(plan_calls(p)):
            if callee not in table:
                raise LinkError(f"unresolved external {callee[0]}/{callee[1]} "
                                f"referenced from {p.name}")
        for n in walk_nodes(p.body):
            for e in node_exprs(n):
                for x in walk_expr(e):
                    if isinstance(x, Build) and x.sym not in all_decls:
                        raise LinkError(f"unknown constructor {x.sym[0]}/{x.sym[1]} "
                                        f"referenced from {p.name}")
    return Program(table, all_decls, list(constants or []))


__all__ = [
    "CompileError", "LinkError", "order_rules", "compile_unit", "compile_list_match",
    "wrap_memo", "check_plan", "link_program", "Program", "loop_depth", "plan_calls",
]
