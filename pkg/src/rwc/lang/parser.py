"""Recursive-descent parser for ``.masf`` rewrite modules.

Concrete syntax::

    module NAME
    imports OTHER ...
    signature
      name(_,_) {constructor};
      f(_) {memo, delay(0)}
    rules
      [label] default: C1 & C2 ==> lhs = rhs;
      ...

Extended constructs (``:=``, nested ``{ ... }`` bodies, ``else`` and the
non-backtracking list accessors) are accepted only with ``allow_extended``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (ALIASES, BUILTIN_ARITY, EXTENDED_BUILTINS, Alt, App, Condition,
                  Loc, ModuleDef, Nested, Rule, SymbolDecl, Var)


class ParseError(Exception):
    def __init__(self, msg: str, loc: Loc | None = None, path: str | None = None):
        self.msg = msg
        self.loc = loc
        self.path = path
        where = ""
        if path:
            where = f"{path}:"
        if loc:
            where += f"{loc.line}:{loc.col}: "
        elif where:
            where += " "
        super().__init__(where + msg)


@dataclass
class Token:
    kind: str  # ident, listvar, label, op, punct, int, eof
    text: str
    loc: Loc


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|%%[^\n]*)
  | (?P<label>\[[^\]\s]*\])
  | (?P<op>==>|==|!=|:=|=|&)
  | (?P<default>default:(?!=))
  | (?P<listvar>[*+][A-Z][A-Za-z0-9_'\-]*)
  | (?P<int>[0-9]+(?![A-Za-z_'\-]))
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_'\-]*)
  | (?P<punct>[(),;{}])
""", re.VERBOSE)


def tokenize(text: str, path: str | None = None) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        loc = Loc(line, pos - line_start + 1)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", loc, path)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            toks.append(Token(kind, tok, loc))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = m.start() + tok.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", Loc(line, pos - line_start + 1)))
    return toks


KEYWORDS = {"module", "imports", "signature", "rules"}


class _Parser:
    def __init__(self, text: str, allow_extended: bool, path: str | None):
        self.toks = tokenize(text, path)
        self.i = 0
        self.ext = allow_extended
        self.path = path

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        return ParseError(msg, tok.loc, self.path)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "punct", "ident", "default")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, numeral: bool = False) -> Token:
        t = self.tok
        if t.kind != "ident" and not (numeral and t.kind == "int"):
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def require_ext(self, what: str, tok: Token):
        if not self.ext:
            raise self.error(f"{what} is only allowed in extended mode", tok)

    # -- module -------------------------------------------------------------

    def module(self) -> ModuleDef:
        self.expect("module")
        name = self.ident().text
        imports: list[str] = []
        if self.accept("imports"):
            while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
                imports.append(self.ident().text)
        self.expect("signature")
        decls: list[SymbolDecl] = []
        while not self.at("rules"):
            decls.append(self.decl())
            if not self.accept(";"):
                break
        self.expect("rules")
        rules: list[Rule] = []
        while self.tok.kind != "eof":
            rules.append(self.rule())
            if not self.accept(";"):
                break
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after rule")
        return ModuleDef(name, tuple(imports), tuple(decls), tuple(rules), self.path)

    def decl(self) -> SymbolDecl:
        t = self.ident(numeral=True)
        arity = 0
        if self.accept("("):
            while True:
                p = self.ident()
                if p.text != "_":
                    raise self.error("argument placeholders must be '_'", p)
                arity += 1
                if not self.accept(","):
                    break
            self.expect(")")
        attrs: set[str] = set()
        delay: list[int] = []
        if self.accept("{"):
            while not self.at("}"):
                a = self.ident()
                if a.text == "delay":
                    self.expect("(")
                    while True:
                        k = self.tok
                        if k.kind != "int":
                            raise self.error("delay positions must be integers", k)
                        self.i += 1
                        delay.append(int(k.text))
                        if not self.accept(","):
                            break
                    self.expect(")")
                elif a.text in ("constructor", "memo"):
                    attrs.add(a.text)
                else:
                    raise self.error(f"unknown attribute {a.text!r}", a)
                if not self.accept(","):
                    break
            self.expect("}")
        for k in delay:
            if k >= arity:
                raise self.error(f"delay position {k} out of range for {t.text}/{arity}", t)
        return SymbolDecl(t.text, arity, frozenset(attrs), tuple(sorted(set(delay))), t.loc)

    # -- rules --------------------------------------------------------------

    def rule(self) -> Rule:
        lt = self.tok
        if lt.kind != "label":
            raise self.error(f"expected rule label, found {lt.text or 'end of input'!r}")
        self.i += 1
        label = lt.text[1:-1]
        default = False
        if self.tok.kind == "default":
            self.i += 1
            default = True
        conds: list[Condition] = []
        first = self.expr()
        if self.tok.text in ("==", "!=", ":="):
            conds = self.conditions(first)
            self.expect("==>")
            lhs = self.expr()
        else:
            lhs = first
        if not isinstance(lhs, App):
            raise self.error("left-hand side must be a function application", lt)
        self.expect("=")
        rhs = self.body()
        return Rule(label, lhs, rhs, tuple(conds), default, lt.loc)

    def conditions(self, first) -> list[Condition]:
        conds = [self.condition(first)]
        while self.accept("&"):
            conds.append(self.condition(self.expr()))
        return conds

    def condition(self, lhs) -> Condition:
        t = self.tok
        if t.text not in ("==", "!=", ":="):
            raise self.error(f"expected '==', '!=' or ':=', found {t.text!r}")
        if t.text == ":=":
            self.require_ext("assignment ':='", t)
        self.i += 1
        rhs = self.expr()
        return Condition(t.text, lhs, rhs, t.loc)

    def body(self):
        if self.at("{"):
            t = self.tok
            self.require_ext("nested rule body", t)
            self.i += 1
            alts = []
            while not self.at("}"):
                alts.append(self.alt())
                if not self.accept(";"):
                    break
            self.expect("}")
            if not alts:
                raise self.error("empty nested body", t)
            return Nested(tuple(alts))
        return self.expr()

    def alt(self) -> Alt:
        if self.at("{"):
            body = self.body()
            conds: list[Condition] = []
        else:
            first = self.expr()
            if self.tok.text in ("==", "!=", ":="):
                conds = self.conditions(first)
                self.expect("==>")
                body = self.body()
            else:
                conds, body = [], first
        orelse = None
        if self.at("else"):
            t = self.tok
            self.require_ext("'else'", t)
            self.i += 1
            if len(conds) != 1 or conds[0].op not in ("==", "!="):
                raise self.error("'else' needs a single '==' or '!=' guard", t)
            orelse = self.alt()
        return Alt(tuple(conds), body, orelse)

    # -- expressions --------------------------------------------------------

    def expr(self, in_list_ctor: bool = False):
        t = self.tok
        if t.kind == "listvar":
            self.i += 1
            if in_list_ctor:
                raise self.error(f"list variable {t.text} cannot be a list element", t)
            return Var(t.text[1:], t.text[0], t.loc)
        if t.kind not in ("ident", "int") or t.text == "_":
            raise self.error(f"expected term, found {t.text or 'end of input'!r}")
        self.i += 1
        name = ALIASES.get(t.text, t.text)
        if name[0].isupper():
            if self.at("("):
                raise self.error(f"variable {name} cannot have arguments", t)
            return Var(name, "", t.loc)
        args = []
        if self.accept("("):
            while True:
                args.append(self.expr(in_list_ctor=(name == "list")))
                if not self.accept(","):
                    break
            self.expect(")")
        if name in ("t", "f"):
            # the booleans are nullary; t(_) or f(_,_) are ordinary user symbols
            pass
        elif name in BUILTIN_ARITY:
            if name in EXTENDED_BUILTINS:
                self.require_ext(f"'{name}'", t)
            if len(args) != BUILTIN_ARITY[name]:
                raise self.error(f"{name} takes {BUILTIN_ARITY[name]} argument(s)", t)
        return App(name, tuple(args), t.loc)


def parse_module(text: str, allow_extended: bool = False, path: str | None = None,
                 check: bool = True) -> ModuleDef:
    """Parse one module.

    With ``check`` and no imports, outermost left-hand-side symbols are
    checked against the module's own signature and errors raise
    :class:`ParseError`.
    """
    p = _Parser(text, allow_extended, path)
    m = p.module()
    if check and not m.imports:
        from .validate import validate
        for d in validate(m, [m]):
            if d.severity == "error" and d.code in ("undeclared-outermost", "arity"):
                raise ParseError(d.message, d.loc, path)
    return m


def parse_expr(text: str, allow_extended: bool = True):
    p = _Parser(text, allow_extended, None)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return e


def parse_rule(text: str, allow_extended: bool = True) -> Rule:
    p = _Parser(text.strip().rstrip(";.,"), allow_extended, None)
    r = p.rule()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return r
