"""Abstract syntax for rewrite modules and their extended (preprocessed) form."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Union

# Predefined list constructors; they need no declaration.
LIST_BUILDERS = frozenset({"conc", "list", "null"})
# Non-backtracking list accessors introduced by preprocessing.
LIST_ACCESSORS = frozenset({"list_head", "list_tail", "list_last", "list_prefix"})
LIST_PREDICATES = frozenset({"not_empty_list", "is_single_element"})
BOOLEANS = frozenset({"t", "f"})
EXTENDED_BUILTINS = LIST_ACCESSORS | LIST_PREDICATES | BOOLEANS
# arity of every predefined symbol
BUILTIN_ARITY = {
    "conc": 2, "list": 1, "null": 0,
    "list_head": 1, "list_tail": 1, "list_last": 1, "list_prefix": 1,
    "not_empty_list": 1, "is_single_element": 1, "t": 0, "f": 0,
}
# spelling used in some listings for the non-emptiness predicate
ALIASES = {"non_empty_list": "not_empty_list"}

ATTRIBUTES = frozenset({"constructor", "memo"})


@dataclass(frozen=True)
class Loc:
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Var:
    """A first-order variable.  ``kind`` is ``""``, ``"*"`` or ``"+"``."""

    name: str
    kind: str = ""
    loc: Loc | None = field(default=None, compare=False, repr=False)

    @property
    def is_list(self) -> bool:
        return self.kind != ""

    @property
    def key(self) -> str:
        return self.kind + self.name

    def __str__(self):
        return self.key


@dataclass(frozen=True)
class App:
    name: str
    args: tuple["Expr", ...] = ()
    loc: Loc | None = field(default=None, compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.args)

    def __str__(self):
        from .printer import format_expr
        return format_expr(self)


Expr = Union[Var, App]


@dataclass(frozen=True)
class Condition:
    """``==`` positive, ``!=`` negative, ``:=`` assignment (pattern on the left)."""

    op: str
    lhs: Expr
    rhs: Expr
    loc: Loc | None = field(default=None, compare=False, repr=False)

    def __str__(self):
        from .printer import format_condition
        return format_condition(self)


@dataclass(frozen=True)
class Alt:
    """One guarded alternative of a nested body.

    When ``orelse`` is set the alternative has a single ``==``/``!=``
    condition; ``orelse`` runs exactly when that condition fails.
    """

    conditions: tuple[Condition, ...]
    body: "Body"
    orelse: "Alt | None" = None


@dataclass(frozen=True)
class Nested:
    alts: tuple[Alt, ...]


Body = Union[Var, App, Nested]


@dataclass(frozen=True)
class Rule:
    label: str
    lhs: App
    rhs: Body
    conditions: tuple[Condition, ...] = ()
    default: bool = False
    loc: Loc | None = field(default=None, compare=False, repr=False)
    # left-hand side before preprocessing; drives specificity ordering
    origin: App | None = field(default=None, compare=False, repr=False)

    @property
    def symbol(self) -> tuple[str, int]:
        return (self.lhs.name, self.lhs.arity)

    def with_(self, **kw) -> "Rule":
        return replace(self, **kw)

    def __str__(self):
        from .printer import format_rule
        return format_rule(self)


@dataclass(frozen=True)
class SymbolDecl:
    name: str
    arity: int
    attributes: frozenset[str] = frozenset()
    delay: tuple[int, ...] = ()
    loc: Loc | None = field(default=None, compare=False, repr=False)

    @property
    def constructor(self) -> bool:
        return "constructor" in self.attributes

    @property
    def memo(self) -> bool:
        return "memo" in self.attributes

    @property
    def ident(self) -> tuple[str, int]:
        return (self.name, self.arity)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    imports: tuple[str, ...] = ()
    signature: tuple[SymbolDecl, ...] = ()
    rules: tuple[Rule, ...] = ()
    path: str | None = field(default=None, compare=False, repr=False)


# -- helpers ------------------------------------------------------------------

def is_constant(e: Expr) -> bool:
    return isinstance(e, App) and not e.args


def is_list_expr(e: Expr) -> bool:
    """Whether ``e`` denotes a list (as opposed to a list element) inside ``conc``."""
    if isinstance(e, Var):
        return e.is_list
    return e.name in LIST_BUILDERS or e.name in ("list_tail", "list_prefix")


def flatten_list(e: Expr) -> list[Expr]:
    """The item sequence of a list expression; list-valued items splice."""
    out: list[Expr] = []
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, App) and x.name == "conc" and len(x.args) == 2:
            for a in reversed(x.args):
                if is_list_expr(a):
                    stack.append(a)
                else:
                    stack.append(App("list", (a,)))
        elif isinstance(x, App) and x.name == "list" and len(x.args) == 1:
            out.append(x.args[0])
        elif isinstance(x, App) and x.name == "null" and not x.args:
            pass
        else:
            out.append(x)
    return out


def build_list(items: list[Expr]) -> Expr:
    """Right-nested ``conc`` chain for an item sequence."""
    if not items:
        return App("null")
    if len(items) == 1:
        x = items[0]
        return x if is_list_expr(x) else App("list", (x,))
    acc = items[-1]
    if not is_list_expr(acc):
        acc = App("list", (acc,))
    for x in reversed(items[:-1]):
        acc = App("conc", (x, acc))
    return acc


def is_list_pattern(e: Expr) -> bool:
    return isinstance(e, App) and e.name in LIST_BUILDERS


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        if isinstance(x, App):
            stack.extend(reversed(x.args))


def variables(e) -> list[Var]:
    """Variables of an expression, condition, or body in left-to-right order."""
    out: list[Var] = []
    seen: set[str] = set()
    for v in _iter_vars(e):
        if v.key not in seen:
            seen.add(v.key)
            out.append(v)
    return out


def var_keys(e) -> set[str]:
    return {v.key for v in _iter_vars(e)}


def _iter_vars(e) -> Iterator[Var]:
    if isinstance(e, Var):
        yield e
    elif isinstance(e, App):
        for x in walk(e):
            if isinstance(x, Var):
                yield x
    elif isinstance(e, Condition):
        yield from _iter_vars(e.lhs)
        yield from _iter_vars(e.rhs)
    elif isinstance(e, Nested):
        for a in e.alts:
            yield from _iter_vars(a)
    elif isinstance(e, Alt):
        for c in e.conditions:
            yield from _iter_vars(c)
        yield from _iter_vars(e.body)
        if e.orelse is not None:
            yield from _iter_vars(e.orelse)
    elif isinstance(e, Rule):
        yield from _iter_vars(e.lhs)
        for c in e.conditions:
            yield from _iter_vars(c)
        yield from _iter_vars(e.rhs)
    elif isinstance(e, (list, tuple)):
        for x in e:
            yield from _iter_vars(x)


def occurrences(e: Expr) -> list[Var]:
    """Every variable occurrence, left to right (duplicates kept)."""
    return [x for x in walk(e) if isinstance(x, Var)]


def substitute(e, mapping: dict[str, Expr]):
    """Replace variables by key; works on expressions, conditions, bodies, alts."""
    if isinstance(e, Var):
        return mapping.get(e.key, e)
    if isinstance(e, App):
        if not e.args:
            return e
        return App(e.name, tuple(substitute(a, mapping) for a in e.args), e.loc)
    if isinstance(e, Condition):
        return Condition(e.op, substitute(e.lhs, mapping), substitute(e.rhs, mapping), e.loc)
    if isinstance(e, Nested):
        return Nested(tuple(substitute(a, mapping) for a in e.alts))
    if isinstance(e, Alt):
        return Alt(tuple(substitute(c, mapping) for c in e.conditions),
                   substitute(e.body, mapping),
                   None if e.orelse is None else substitute(e.orelse, mapping))
    if isinstance(e, Rule):
        return e.with_(lhs=substitute(e.lhs, mapping),
                       conditions=tuple(substitute(c, mapping) for c in e.conditions),
                       rhs=substitute(e.rhs, mapping))
    raise TypeError(e)


def rename(e, names: dict[str, str]):
    """Rename variables; ``names`` maps keys to new bare names (kind kept)."""
    mapping = {}
    for v in _iter_vars(e):
        if v.key in names:
            mapping[v.key] = Var(names[v.key], v.kind)
    return substitute(e, mapping)

