"""Static checks on parsed modules: declarations, arities and variable scoping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .ast import (BUILTIN_ARITY, Alt, App, Loc, ModuleDef, Nested, Rule, SymbolDecl,
                  var_keys, walk)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    message: str
    loc: Loc | None = None
    path: str | None = None

    def __str__(self):
        where = f"{self.path}:" if self.path else ""
        if self.loc:
            where += f"{self.loc}:"
        return f"{where} {self.severity}: {self.message} [{self.code}]".lstrip()


def signature_index(visible: Iterable) -> dict[str, list[SymbolDecl]]:
    """Map symbol names to their declarations; accepts modules or declarations."""
    index: dict[str, list[SymbolDecl]] = {}
    for item in visible:
        decls = item.signature if isinstance(item, ModuleDef) else (item,)
        for d in decls:
            lst = index.setdefault(d.name, [])
            if all(x.arity != d.arity for x in lst):
                lst.append(d)
    return index


def validate(m: ModuleDef, visible: Iterable | None = None) -> list[Diagnostic]:
    index = signature_index([m] if visible is None else visible)
    out: list[Diagnostic] = []

    def emit(sev, code, msg, loc):
        out.append(Diagnostic(sev, code, msg, loc, m.path))

    seen_labels: dict[str, Loc | None] = {}
    for r in m.rules:
        if r.label in seen_labels:
            emit("warning", "duplicate-label", f"duplicate rule label [{r.label}]", r.loc)
        seen_labels.setdefault(r.label, r.loc)
        _check_symbols(r, index, emit)
        _check_scoping(r, emit)
    return out


def errors(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


def _exprs_of(r: Rule):
    yield r.lhs
    for c in r.conditions:
        yield c.lhs
        yield c.rhs
    yield from _body_exprs(r.rhs)


def _body_exprs(b):
    if isinstance(b, Nested):
        for a in b.alts:
            yield from _alt_exprs(a)
    else:
        yield b


def _alt_exprs(a: Alt):
    for c in a.conditions:
        yield c.lhs
        yield c.rhs
    yield from _body_exprs(a.body)
    if a.orelse is not None:
        yield from _alt_exprs(a.orelse)


def _check_symbols(r: Rule, index, emit):
    head = r.lhs
    decls = index.get(head.name)
    if BUILTIN_ARITY.get(head.name) == head.arity:
        emit("error", "builtin-outermost",
             f"predefined symbol {head.name} cannot be defined by a rule", r.loc)
    elif not decls:
        emit("error", "undeclared-outermost",
             f"rule [{r.label}] defines undeclared function {head.name}", head.loc or r.loc)
    else:
        match = [d for d in decls if d.arity == head.arity]
        if not match:
            emit("error", "arity",
                 f"{head.name} used with {head.arity} argument(s) but declared with "
                 f"{'/'.join(str(d.arity) for d in decls)}", head.loc or r.loc)
        elif match[0].constructor:
            emit("error", "constructor-outermost",
                 f"constructor {head.name} occurs outermost in the left-hand side of [{r.label}]",
                 head.loc or r.loc)
    reported: set[tuple[str, int]] = set()
    for e in _exprs_of(r):
        for x in walk(e):
            if not isinstance(x, App) or x is head:
                continue
            if BUILTIN_ARITY.get(x.name) == x.arity:
                continue
            key = (x.name, x.arity)
            if key in reported:
                continue
            decls = index.get(x.name)
            if not decls:
                reported.add(key)
                emit("error", "undeclared", f"undeclared symbol {x.name}", x.loc or r.loc)
            elif all(d.arity != x.arity for d in decls):
                reported.add(key)
                emit("error", "arity",
                     f"{x.name} used with {x.arity} argument(s) but declared with "
                     f"{'/'.join(str(d.arity) for d in decls)}", x.loc or r.loc)


def _check_scoping(r: Rule, emit):
    bound = var_keys(r.lhs)
    bound = _check_conditions(r, r.conditions, bound, emit)
    _check_body(r, r.rhs, bound, emit)


def _check_conditions(r: Rule, conds, bound: set[str], emit) -> set[str]:
    bound = set(bound)
    for c in conds:
        nl = var_keys(c.lhs) - bound
        nr = var_keys(c.rhs) - bound
        loc = c.loc or r.loc
        if c.op == "!=":
            if nl or nr:
                names = ", ".join(sorted(nl | nr))
                emit("error", "negative-new-var",
                     f"negative condition in [{r.label}] introduces new variable(s) {names}", loc)
        elif c.op == "==":
            if nl and nr:
                emit("error", "both-sides-new",
                     f"both sides of a condition in [{r.label}] contain new variables", loc)
        elif c.op == ":=":
            if nr:
                emit("error", "assignment-rhs-new",
                     f"assignment right-hand side in [{r.label}] has unbound variable(s) "
                     f"{', '.join(sorted(nr))}", loc)
        bound |= nl | nr
    return bound


def _check_body(r: Rule, b, bound: set[str], emit):
    if isinstance(b, Nested):
        for a in b.alts:
            _check_alt(r, a, bound, emit)
        return
    for v in sorted(var_keys(b) - bound):
        emit("error", "unbound-rhs",
             f"right-hand side of [{r.label}] uses unbound variable {v}", r.loc)


def _check_alt(r: Rule, a: Alt, bound: set[str], emit):
    inner = _check_conditions(r, a.conditions, bound, emit)
    _check_body(r, a.body, inner, emit)
    if a.orelse is not None:
        _check_alt(r, a.orelse, bound, emit)


def is_well_formed(m: ModuleDef, visible=None) -> bool:
    return not errors(validate(m, visible))


__all__ = ["Diagnostic", "validate", "errors", "signature_index", "is_well_formed"]
