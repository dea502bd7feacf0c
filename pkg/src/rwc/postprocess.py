"""Plan-level optimizations: tail-recursion elimination and constant caching."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .plan import (ArgOf, Build, Call, ConstSlot, ForceRef, ListBuild, ListOp, Loop, Pred,
                   Return, RewritePlan, SliceRef, SlotRef, expr_children, map_node, node_exprs,
                   walk_expr, walk_nodes)


def eliminate_tail_recursion(p: RewritePlan) -> RewritePlan:
    """Turn ``Return(Call(self, args))`` into a ``Loop`` back-edge.

    Only direct self-calls qualify.  Memoized plans are left alone so that
    every call they make still goes through the memo table.
    """
    if p.memoized:
        return p

    def fn(n):
        if isinstance(n, Return) and isinstance(n.expr, Call) and n.expr.sym == p.symbol:
            return Loop(n.expr.args)
        return n

    body = map_node(p.body, fn_node=fn)
    return p if body == p.body else replace(p, body=body)


def tail_sites(p: RewritePlan) -> int:
    return sum(1 for n in walk_nodes(p.body) if isinstance(n, Loop))


@dataclass
class ConstTable:
    """Ground expressions shared by every plan of one program, deduplicated."""
    exprs: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    def intern(self, e) -> ConstSlot:
        i = self.index.get(e)
        if i is None:
            i = self.index[e] = len(self.exprs)
            self.exprs.append(e)
        return ConstSlot(i)


def _ground(e) -> bool:
    return not any(isinstance(x, (SlotRef, SliceRef, ArgOf)) for x in walk_expr(e))


def _has_call(e) -> bool:
    return any(isinstance(x, Call) for x in walk_expr(e))


def _raw(e) -> bool:
    return isinstance(e, (Build, ListBuild)) and not e.nf


def _cache(e, table: ConstTable):
    if _raw(e):
        # delayed arguments are passed unevaluated; evaluating them here
        # would change the program's strategy
        return e
    if _ground(e) and _has_call(e) and not isinstance(e, ConstSlot):
        return table.intern(e)
    if isinstance(e, Call):
        return Call(e.sym, tuple(_cache(a, table) for a in e.args))
    if isinstance(e, Build):
        return Build(e.sym, tuple(_cache(a, table) for a in e.args), e.nf)
    if isinstance(e, ListBuild):
        return ListBuild(tuple(_cache(a, table) for a in e.items), e.splice, e.nf)
    if isinstance(e, ListOp):
        return ListOp(e.op, _cache(e.arg, table))
    if isinstance(e, Pred):
        return Pred(e.op, _cache(e.arg, table))
    if isinstance(e, ForceRef):
        return ForceRef(_cache(e.arg, table))
    assert not expr_children(e)
    return e


def cache_constants(p: RewritePlan, table: ConstTable) -> RewritePlan:
    """Replace maximal ground non-constructor subexpressions by cache slots."""
    body = map_node(p.body, fn_expr=lambda e: _cache(e, table))
    return p if body == p.body else replace(p, body=body)


def cached_sites(p: RewritePlan) -> int:
    n = 0
    for node in walk_nodes(p.body):
        for e in node_exprs(node):
            n += sum(1 for x in walk_expr(e) if isinstance(x, ConstSlot))
    return n


def optimize(plans: Iterable[RewritePlan], tre: bool = True, constcache: bool = True
             ) -> tuple[list[RewritePlan], ConstTable, dict]:
    """Run both passes over a program's plans; returns plans, constants and a report."""
    table = ConstTable()
    out = []
    report = {"tre_sites": 0, "cached_constants": 0, "constant_sites": 0}
    for p in plans:
        if tre:
            p = eliminate_tail_recursion(p)
            report["tre_sites"] += tail_sites(p)
        if constcache:
            p = cache_constants(p, table)
            report["constant_sites"] += cached_sites(p)
        out.append(p)
    report["cached_constants"] = len(table.exprs)
    return out, table, report


__all__ = ["eliminate_tail_recursion", "cache_constants", "ConstTable", "optimize",
           "tail_sites", "cached_sites"]
