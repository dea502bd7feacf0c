"""Deterministic pretty-printer; its output parses back to an equal AST."""

from __future__ import annotations

from .ast import Alt, Condition, ModuleDef, Nested, Rule, SymbolDecl, Var


def format_expr(e) -> str:
    if isinstance(e, Var):
        return e.key
    if not e.args:
        return e.name
    return f"{e.name}({','.join(format_expr(a) for a in e.args)})"


def format_condition(c: Condition) -> str:
    return f"{format_expr(c.lhs)} {c.op} {format_expr(c.rhs)}"


def _conds(conds) -> str:
    return " & ".join(format_condition(c) for c in conds)


def format_body(b, indent: int) -> str:
    if not isinstance(b, Nested):
        return format_expr(b)
    pad = " " * (indent + 2)
    lines = [f"{pad}{format_alt(a, indent + 2)}" for a in b.alts]
    return "{\n" + ";\n".join(lines) + "\n" + " " * indent + "}"


def format_alt(a: Alt, indent: int) -> str:
    head = f"{_conds(a.conditions)} ==> " if a.conditions else ""
    text = head + format_body(a.body, indent)
    if a.orelse is not None:
        text += "\n" + " " * (indent + 2) + "else\n" + " " * indent + format_alt(a.orelse, indent)
    return text


def format_rule(r: Rule, indent: int = 0) -> str:
    parts = [f"[{r.label}]"]
    if r.default:
        parts.append("default:")
    if r.conditions:
        parts.append(_conds(r.conditions))
        parts.append("==>")
    parts.append(format_expr(r.lhs))
    parts.append("=")
    parts.append(format_body(r.rhs, indent))
    return " ".join(parts)


def format_decl(d: SymbolDecl) -> str:
    text = d.name
    if d.arity:
        text += "(" + ",".join("_" * 1 for _ in range(d.arity)) + ")"
    attrs = sorted(d.attributes)
    if d.delay:
        attrs.append("delay(" + ",".join(str(i) for i in d.delay) + ")")
    if attrs:
        text += " {" + ",".join(attrs) + "}"
    return text


def print_module(m: ModuleDef) -> str:
    out = [f"module {m.name}"]
    if m.imports:
        out.append("imports " + " ".join(m.imports))
    out.append("signature")
    out.append(";\n".join(f"  {format_decl(d)}" for d in m.signature) if m.signature else "")
    out.append("rules")
    out.append(";\n\n".join(f"  {format_rule(r, 2)}" for r in m.rules) if m.rules else "")
    return "\n".join(line for line in out if line != "") + "\n"
