"""Source language: syntax tree, parser, printer and static checks."""

from .ast import (Alt, App, Condition, Loc, ModuleDef, Nested, Rule, SymbolDecl, Var)
from .parser import ParseError, parse_expr, parse_module, parse_rule
from .printer import format_expr, format_rule, print_module
from .validate import Diagnostic, validate

__all__ = [
    "Alt", "App", "Condition", "Loc", "ModuleDef", "Nested", "Rule", "SymbolDecl", "Var",
    "ParseError", "parse_expr", "parse_module", "parse_rule",
    "format_expr", "format_rule", "print_module", "Diagnostic", "validate",
]
