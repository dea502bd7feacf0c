"""Plan trees: the executable form of a compiled function.

A plan is an instruction tree over a frame of slots.  Slots ``0..arity-1``
hold the call's arguments.  Nodes either produce the call's result or fail;
a failing node hands control to the next child of the innermost enclosing
:class:`Block`, and a failing :class:`ListLoop` body advances the loop.
That gives list-matching backtracking without any explicit stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

Ident = tuple  # (name, arity)


# -- expressions ---------------------------------------------------------------

@dataclass(frozen=True)
class SlotRef:
    slot: int


@dataclass(frozen=True)
class ForceRef:
    """Normalize a possibly unevaluated (delayed) value that is needed as a value."""
    arg: object


@dataclass(frozen=True)
class SliceRef:
    """A list variable bound by a loop: elements from ``begin`` up to ``end``."""
    begin: int
    end: int


@dataclass(frozen=True)
class ArgOf:
    slot: int
    index: int


@dataclass(frozen=True)
class Const:
    """A constructor-only ground term, built once per run."""
    expr: object  # lang.ast expression


@dataclass(frozen=True)
class ConstSlot:
    """A cached ground term normalized on first use."""
    id: int


@dataclass(frozen=True)
class Call:
    sym: Ident
    args: tuple


@dataclass(frozen=True)
class Build:
    """Construct ``sym(args)`` without rewriting; ``nf`` marks the result normal."""
    sym: Ident
    args: tuple
    nf: bool = True


@dataclass(frozen=True)
class ListBuild:
    """A list from items; ``splice[i]`` means item ``i`` is itself a list."""
    items: tuple
    splice: tuple
    nf: bool = True


@dataclass(frozen=True)
class ListOp:
    op: str  # list_head, list_tail, list_last, list_prefix
    arg: object


@dataclass(frozen=True)
class Pred:
    op: str  # not_empty_list, is_single_element
    arg: object


Expr = Union[SlotRef, ForceRef, SliceRef, ArgOf, Const, ConstSlot, Call, Build,
             ListBuild, ListOp, Pred]


# -- nodes ---------------------------------------------------------------------

@dataclass(frozen=True)
class Fail:
    """Give up on this path."""


@dataclass(frozen=True)
class Block:
    children: tuple


@dataclass(frozen=True)
class CheckSym:
    slot: int
    sym: Ident
    then: object
    else_: object = Fail()


@dataclass(frozen=True)
class CheckEqual:
    a: object
    b: object
    then: object
    else_: object = Fail()
    note: str = field(default="", compare=False)


@dataclass(frozen=True)
class Bind:
    slot: int
    expr: object
    then: object
    note: str = field(default="", compare=False)


@dataclass(frozen=True)
class Normalize:
    slot: int
    expr: object
    then: object
    note: str = field(default="", compare=False)


@dataclass(frozen=True)
class GuardNonEmpty:
    slot: int
    then: object
    else_: object = Fail()


@dataclass(frozen=True)
class GuardSingle:
    slot: int
    then: object
    else_: object = Fail()


@dataclass(frozen=True)
class CheckList:
    slot: int
    then: object


@dataclass(frozen=True)
class ListLoop:
    """Enumerate split points for one list variable.

    ``begin`` is set to the subject cursor and ``end`` walks from there to
    the end of the list (starting one element in for ``+`` variables); the
    body sees ``end`` as the cursor for the rest of the pattern.
    """
    var: str
    subject: int
    begin: int
    end: int
    plus: bool
    body: object
    exhausted: object = Fail()


@dataclass(frozen=True)
class Return:
    expr: object


@dataclass(frozen=True)
class Loop:
    """Tail self-call: rebind the argument slots and restart the plan."""
    args: tuple


@dataclass(frozen=True)
class FallthroughNormalForm:
    """No rule applied: the call itself, with normalized arguments, is the result."""


Node = Union[Fail, Block, CheckSym, CheckEqual, Bind, Normalize, GuardNonEmpty,
             GuardSingle, CheckList, ListLoop, Return, Loop, FallthroughNormalForm]


@dataclass(frozen=True)
class RewritePlan:
    symbol: Ident
    body: object
    frame_size: int
    memoized: bool = False
    delay: tuple = ()
    labels: tuple = ()

    @property
    def name(self) -> str:
        return f"{self.symbol[0]}/{self.symbol[1]}"


# -- traversal -----------------------------------------------------------------

def children(n) -> list:
    if isinstance(n, Block):
        return list(n.children)
    if isinstance(n, (CheckSym, CheckEqual, GuardNonEmpty, GuardSingle)):
        return [n.then, n.else_]
    if isinstance(n, (Bind, Normalize, CheckList)):
        return [n.then]
    if isinstance(n, ListLoop):
        return [n.body, n.exhausted]
    return []


def walk_nodes(n) -> Iterator:
    stack = [n]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(children(x)))


def node_exprs(n) -> list:
    """Expressions evaluated directly by node ``n``."""
    if isinstance(n, CheckEqual):
        return [n.a, n.b]
    if isinstance(n, (Bind, Normalize)):
        return [n.expr]
    if isinstance(n, Return):
        return [n.expr]
    if isinstance(n, Loop):
        return list(n.args)
    return []


def expr_children(e) -> list:
    if isinstance(e, (Call, Build)):
        return list(e.args)
    if isinstance(e, ListBuild):
        return list(e.items)
    if isinstance(e, (ListOp, Pred, ForceRef)):
        return [e.arg]
    return []


def walk_expr(e) -> Iterator:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(expr_children(x)))


def expr_slots(e) -> set[int]:
    out: set[int] = set()
    for x in walk_expr(e):
        if isinstance(x, SlotRef):
            out.add(x.slot)
        elif isinstance(x, SliceRef):
            out.update((x.begin, x.end))
        elif isinstance(x, ArgOf):
            out.add(x.slot)
    return out


def map_node(n, fn_node=None, fn_expr=None):
    """Rebuild a tree bottom-up, applying ``fn_expr`` to node expressions and
    ``fn_node`` to each rebuilt node."""
    def ex(e):
        return fn_expr(e) if fn_expr else e

    def go(x):
        if isinstance(x, Block):
            y = Block(tuple(go(c) for c in x.children))
        elif isinstance(x, CheckSym):
            y = CheckSym(x.slot, x.sym, go(x.then), go(x.else_))
        elif isinstance(x, CheckEqual):
            y = CheckEqual(ex(x.a), ex(x.b), go(x.then), go(x.else_), x.note)
        elif isinstance(x, Bind):
            y = Bind(x.slot, ex(x.expr), go(x.then), x.note)
        elif isinstance(x, Normalize):
            y = Normalize(x.slot, ex(x.expr), go(x.then), x.note)
        elif isinstance(x, GuardNonEmpty):
            y = GuardNonEmpty(x.slot, go(x.then), go(x.else_))
        elif isinstance(x, GuardSingle):
            y = GuardSingle(x.slot, go(x.then), go(x.else_))
        elif isinstance(x, CheckList):
            y = CheckList(x.slot, go(x.then))
        elif isinstance(x, ListLoop):
            y = ListLoop(x.var, x.subject, x.begin, x.end, x.plus, go(x.body), go(x.exhausted))
        elif isinstance(x, Return):
            y = Return(ex(x.expr))
        elif isinstance(x, Loop):
            y = Loop(tuple(ex(a) for a in x.args))
        else:
            y = x
        return fn_node(y) if fn_node else y

    return go(n)


# -- text form -----------------------------------------------------------------

def _sym(s) -> str:
    return f"{s[0]}/{s[1]}"


def format_expr(e) -> str:
    from .lang.printer import format_expr as fmt_ast
    if isinstance(e, SlotRef):
        return f"s{e.slot}"
    if isinstance(e, ForceRef):
        return f"(force {format_expr(e.arg)})"
    if isinstance(e, SliceRef):
        return f"(slice s{e.begin} s{e.end})"
    if isinstance(e, ArgOf):
        return f"(arg {e.index} s{e.slot})"
    if isinstance(e, Const):
        return f"(const {fmt_ast(e.expr)})"
    if isinstance(e, ConstSlot):
        return f"(cached {e.id})"
    if isinstance(e, Call):
        return "(call " + " ".join([_sym(e.sym)] + [format_expr(a) for a in e.args]) + ")"
    if isinstance(e, Build):
        head = "make" if e.nf else "make-raw"
        return f"({head} " + " ".join([_sym(e.sym)] + [format_expr(a) for a in e.args]) + ")"
    if isinstance(e, ListBuild):
        parts = [("@" if s else "") + format_expr(x) for x, s in zip(e.items, e.splice)]
        return "(list" + "".join(" " + p for p in parts) + ")"
    if isinstance(e, (ListOp, Pred)):
        return f"({e.op} {format_expr(e.arg)})"
    raise TypeError(e)


def format_node(n, indent: int = 0) -> str:
    out: list[str] = []
    _fmt(n, indent, out)
    return "\n".join(out)


def _fmt(n, ind: int, out: list[str]):
    pad = "  " * ind
    if isinstance(n, Fail):
        out.append(pad + "(fail)")
    elif isinstance(n, Block):
        out.append(pad + "(block")
        for c in n.children:
            _fmt(c, ind + 1, out)
        out[-1] += ")"
    elif isinstance(n, (CheckSym, CheckEqual, GuardNonEmpty, GuardSingle)):
        if isinstance(n, CheckSym):
            head = f"(check-sym s{n.slot} {_sym(n.sym)}"
        elif isinstance(n, CheckEqual):
            head = f"(check-equal {format_expr(n.a)} {format_expr(n.b)}"
        elif isinstance(n, GuardNonEmpty):
            head = f"(not-empty s{n.slot}"
        else:
            head = f"(single s{n.slot}"
        out.append(pad + head)
        _fmt(n.then, ind + 1, out)
        if not isinstance(n.else_, Fail):
            out.append(pad + " else")
            _fmt(n.else_, ind + 1, out)
        out[-1] += ")"
    elif isinstance(n, (Bind, Normalize)):
        head = "bind" if isinstance(n, Bind) else "normalize"
        out.append(pad + f"({head} s{n.slot} {format_expr(n.expr)}")
        _fmt(n.then, ind + 1, out)
        out[-1] += ")"
    elif isinstance(n, CheckList):
        out.append(pad + f"(check-list s{n.slot}")
        _fmt(n.then, ind + 1, out)
        out[-1] += ")"
    elif isinstance(n, ListLoop):
        kind = "+" if n.plus else "*"
        out.append(pad + f"(list-loop {kind}{n.var} s{n.subject} begin=s{n.begin} end=s{n.end}")
        _fmt(n.body, ind + 1, out)
        out[-1] += ")"
    elif isinstance(n, Return):
        out.append(pad + f"(return {format_expr(n.expr)})")
    elif isinstance(n, Loop):
        out.append(pad + "(loop" + "".join(" " + format_expr(a) for a in n.args) + ")")
    elif isinstance(n, FallthroughNormalForm):
        out.append(pad + "(normal-form)")
    else:
        raise TypeError(n)


def format_plan(p: RewritePlan) -> str:
    attrs = []
    if p.memoized:
        attrs.append("memo")
    if p.delay:
        attrs.append("delay=" + ",".join(map(str, p.delay)))
    head = f"(plan {p.name} frame={p.frame_size}" + "".join(" " + a for a in attrs)
    return head + "\n" + format_node(p.body, 1) + ")\n"
