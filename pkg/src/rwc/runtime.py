"""Innermost normalization of ground terms with a linked :class:`Program`.

Plans are turned into Python closures once per run; a frame is a list of
slots and every node closure returns a term, ``None`` (this path failed) or
one of two sentinels: ``LOOP`` (tail self-call, restart the plan) and
``FALL`` (no rule applied).
"""

from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .lang.ast import flatten_list, is_list_expr
from .planner import Program
from .plan import (ArgOf, Bind, Block, Build, Call, CheckEqual, CheckList, CheckSym, Const,
                   ConstSlot, Fail, FallthroughNormalForm, ForceRef, GuardNonEmpty,
                   GuardSingle, ListBuild, ListLoop, ListOp, Loop, Normalize, Pred, Return,
                   SliceRef, SlotRef)
from .store import (CONS, FALSE, NIL, TRUE, StoreError, SymbolTable, Term, TermStore,
                    UnsharedStore, parse_term, structural_equal)


class RuntimeError_(Exception):
    """Base class for evaluation failures."""


class ResourceError(RuntimeError_):
    pass


class DepthLimitExceeded(ResourceError):
    pass


class UnknownSymbol(RuntimeError_):
    pass


class MatchError(RuntimeError_):
    """A builtin list operation was applied to something it does not accept."""


LOOP = object()
FALL = object()

DEFAULT_DEPTH_LIMIT = 10 ** 6


@dataclass
class RunConfig:
    sharing: bool = True
    # None: use declared {memo} attributes; otherwise the names to memoize
    memo: frozenset | None = None
    memo_enabled: bool = True
    depth_limit: int = DEFAULT_DEPTH_LIMIT
    node_budget: int | None = None
    trace: Callable | None = None  # called as trace(ident, args) on every plan entry


@dataclass
class ExecutionStats:
    rule_applications: int = 0
    plan_calls: int = 0
    memo_hits: int = 0
    const_cache_hits: int = 0
    const_cache_evaluations: int = 0
    max_frame_depth: int = 0
    peak_unique_nodes: int = 0
    peak_total_nodes: int = 0
    wall_time: float = 0.0
    memo_disabled: bool = False
    depth: int = field(default=0, repr=False)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("depth")
        return d

    def format(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.as_dict().items())


def _list_items(t: Term) -> list[Term]:
    out = []
    while t.sym is CONS:
        out.append(t.args[0])
        t = t.args[1]
    if t.sym is not NIL:
        raise MatchError("list operation on a non-list")
    return out


class Runtime:
    """One program bound to one store.  Not thread-safe."""

    def __init__(self, program: Program, config: RunConfig | None = None,
                 store: TermStore | None = None):
        self.program = program
        self.config = cfg = config or RunConfig()
        if store is None:
            store = TermStore(cfg.node_budget) if cfg.sharing else UnsharedStore(cfg.node_budget)
        self.store = store
        self.shared = store.shared
        self.stats = ExecutionStats()
        self.symbols = SymbolTable()
        for d in program.decls.values():
            self.symbols.declare(d.name, d.arity, d.constructor, d.memo, d.delay)
        self._true = store._intern(TRUE, ())
        self._false = store._intern(FALSE, ())
        self._true.nf = self._false.nf = True
        self._const_terms: dict = {}
        self._cache: list = [None] * len(program.constants)
        self._cache_fns: list = [None] * len(program.constants)
        self.memo_tables: dict[tuple, dict] = {}
        self.cache_log: list[int] = []
        self._delays = {}
        for k, p in program.plans.items():
            if p.delay:
                self._delays[self.symbols[k]] = frozenset(p.delay)
        memo_wanted = {k for k, p in program.plans.items()
                       if (p.memoized if cfg.memo is None else
                           (k[0] in cfg.memo or f"{k[0]}/{k[1]}" in cfg.memo))}
        if not cfg.memo_enabled:
            memo_wanted = set()
        if memo_wanted and not self.shared:
            # identity keys mean nothing without sharing
            self.stats.memo_disabled = True
            memo_wanted = set()
        self._memo = memo_wanted
        self._holders: dict[tuple, list] = {}
        self.funcs: dict[tuple, Callable] = {}
        for k, p in program.plans.items():
            self.funcs[k] = self._make_apply(p)
        for k, p in program.plans.items():
            self._holders[k][0] = self._node(p.body)
        store.add_root_provider(self._roots)

    # -- roots ---------------------------------------------------------------

    def _roots(self) -> Iterable[Term]:
        yield self._true
        yield self._false
        yield from self._const_terms.values()
        for v in self._cache:
            if v is not None:
                yield v
        for table in self.memo_tables.values():
            for k, v in table.items():
                yield from k
                yield v

    # -- terms -----------------------------------------------------------------

    def resolve(self, name: str, arity: int):
        s = self.symbols.get(name, arity)
        if s is None:
            raise KeyError(name)
        return s

    def parse(self, text: str) -> Term:
        return parse_term(text, self.resolve, self.store)

    def build(self, e) -> Term:
        """A constructor-only ground AST expression as a term (flagged normal)."""
        store = self.store
        if e.name in ("conc", "list", "null"):
            items = flatten_list(e)
            acc = store.null()
            acc.nf = True
            for x in reversed(items):
                v = self.build(x)
                if is_list_expr(x):
                    for el in reversed(_list_items(v)):
                        acc = store._intern(CONS, (el, acc))
                        acc.nf = True
                else:
                    acc = store._intern(CONS, (v, acc))
                    acc.nf = True
            return acc
        sym = self.symbols.get(e.name, e.arity)
        if sym is None:
            raise UnknownSymbol(f"{e.name}/{e.arity}")
        t = store._intern(sym, tuple(self.build(a) for a in e.args))
        t.nf = True
        return t

    # -- plans -------------------------------------------------------------------

    def _make_apply(self, plan):
        ident = plan.symbol
        sym = self.symbols[ident]
        n = ident[1]
        pad = [None] * (plan.frame_size - n)
        delayed = tuple(plan.delay)
        holder = [None]
        self._holders[ident] = holder
        st = self.stats
        limit = self.config.depth_limit
        intern = self.store._intern
        normalize = self.normalize
        trace = self.config.trace
        memo = ident in self._memo
        table = self.memo_tables.setdefault(ident, {}) if memo else None

        def fallthrough(fr):
            if delayed:
                changed = False
                for i in delayed:
                    x = fr[i]
                    if not x.nf:
                        y = normalize(x)
                        if y is not x:
                            fr[i] = y
                            changed = True
                if changed:
                    return LOOP
            t = intern(sym, tuple(fr[:n]))
            t.nf = True
            return t

        def apply(args):
            st.plan_calls += 1
            if memo:
                r = table.get(args)
                if r is not None:
                    st.memo_hits += 1
                    return r
            if trace is not None:
                trace(ident, args)
            d = st.depth = st.depth + 1
            if d > st.max_frame_depth:
                st.max_frame_depth = d
                if d > limit:
                    raise DepthLimitExceeded(f"frame depth limit {limit} exceeded in {plan.name}")
            fr = list(args)
            fr.extend(pad)
            body = holder[0]
            while True:
                r = body(fr)
                if r is LOOP:
                    continue
                if r is FALL or r is None:
                    r = fallthrough(fr)
                    if r is LOOP:
                        continue
                break
            st.depth -= 1
            if memo:
                table[args] = r
            return r

        return apply

    # expressions -----------------------------------------------------------------

    def _expr(self, e):
        store = self.store
        if isinstance(e, SlotRef):
            i = e.slot
            return lambda fr: fr[i]
        if isinstance(e, ArgOf):
            s, j = e.slot, e.index
            return lambda fr: fr[s].args[j]
        if isinstance(e, SliceRef):
            b, en = e.begin, e.end
            sl = store.slice
            return lambda fr: sl(fr[b], fr[en])
        if isinstance(e, ForceRef):
            a = self._expr(e.arg)
            normalize = self.normalize

            def force(fr):
                t = a(fr)
                return t if t.nf else normalize(t)
            return force
        if isinstance(e, Const):
            t = self._const_terms.get(e.expr)
            if t is None:
                t = self._const_terms[e.expr] = self.build(e.expr)
            return lambda fr: t
        if isinstance(e, ConstSlot):
            return self._const_slot(e.id)
        if isinstance(e, Call):
            return self._call(e)
        if isinstance(e, Build):
            return self._build(e)
        if isinstance(e, ListBuild):
            return self._list_build(e)
        if isinstance(e, ListOp):
            a = self._expr(e.arg)
            op = e.op
            if op == "list_head":
                def head(fr):
                    t = a(fr)
                    if t.sym is not CONS:
                        raise MatchError("list_head of an empty list or non-list")
                    return t.args[0]
                return head
            if op == "list_tail":
                def tail(fr):
                    t = a(fr)
                    if t.sym is not CONS:
                        raise MatchError("list_tail of an empty list or non-list")
                    return t.args[1]
                return tail
            f = store.list_last if op == "list_last" else store.list_prefix

            def other(fr):
                t = a(fr)
                if t.sym is not CONS:
                    raise MatchError(f"{op} of an empty list or non-list")
                return f(t)
            return other
        if isinstance(e, Pred):
            a = self._expr(e.arg)
            T, F = self._true, self._false
            if e.op == "not_empty_list":
                return lambda fr: T if a(fr).sym is CONS else F

            def single(fr):
                t = a(fr)
                return T if t.sym is CONS and t.args[1].sym is NIL else F
            return single
        raise TypeError(e)

    def _const_slot(self, i: int):
        cache = self._cache
        fns = self._cache_fns
        st = self.stats
        log = self.cache_log
        program = self.program

        def cached(fr):
            v = cache[i]
            if v is None:
                f = fns[i]
                if f is None:
                    f = fns[i] = self._expr(program.constants[i])
                st.const_cache_evaluations += 1
                log.append(i)
                v = cache[i] = f([])
            else:
                st.const_cache_hits += 1
            return v
        return cached

    def _call(self, e: Call):
        holder_key = e.sym
        if holder_key not in self.funcs:
            raise UnknownSymbol(f"no plan for {e.sym[0]}/{e.sym[1]}")
        g = self.funcs[holder_key]
        args = [self._expr(a) for a in e.args]
        if not args:
            return lambda fr: g(())
        if len(args) == 1:
            a0, = args
            return lambda fr: g((a0(fr),))
        if len(args) == 2:
            a0, a1 = args
            return lambda fr: g((a0(fr), a1(fr)))
        if len(args) == 3:
            a0, a1, a2 = args
            return lambda fr: g((a0(fr), a1(fr), a2(fr)))
        return lambda fr: g(tuple([a(fr) for a in args]))

    def _build(self, e: Build):
        sym = self.symbols.get(*e.sym)
        if sym is None:
            raise UnknownSymbol(f"{e.sym[0]}/{e.sym[1]}")
        intern = self.store._intern
        args = [self._expr(a) for a in e.args]
        nf = e.nf
        if len(args) == 1:
            a0, = args

            def b1(fr):
                t = intern(sym, (a0(fr),))
                t.nf = nf
                return t
            return b1 if nf else (lambda fr: intern(sym, (a0(fr),)))
        if len(args) == 2 and nf:
            a0, a1 = args

            def b2(fr):
                t = intern(sym, (a0(fr), a1(fr)))
                t.nf = True
                return t
            return b2

        def bn(fr):
            t = intern(sym, tuple([a(fr) for a in args]))
            if nf:
                t.nf = True
            return t
        return bn

    def _list_build(self, e: ListBuild):
        store = self.store
        intern = store._intern
        items = [self._expr(x) for x in e.items]
        splice = e.splice
        nf = e.nf
        parts = list(zip(items, splice))[::-1]

        def lb(fr):
            acc = store.null()
            if nf:
                acc.nf = True
            first = True
            for it, sp in parts:
                v = it(fr)
                if sp:
                    if first and (v.sym is CONS or v.sym is NIL):
                        acc = v
                    else:
                        for el in reversed(_list_items(v)):
                            acc = intern(CONS, (el, acc))
                            if nf:
                                acc.nf = True
                else:
                    acc = intern(CONS, (v, acc))
                    if nf:
                        acc.nf = True
                first = False
            return acc
        return lb

    # nodes -----------------------------------------------------------------------

    def _node(self, n):
        nd = self._node
        st = self.stats
        if isinstance(n, Fail):
            return lambda fr: None
        if isinstance(n, Block):
            cs = [nd(c) for c in n.children]
            if len(cs) == 2:
                c0, c1 = cs

                def block2(fr):
                    r = c0(fr)
                    if r is not None:
                        return r
                    return c1(fr)
                return block2

            def block(fr):
                for c in cs:
                    r = c(fr)
                    if r is not None:
                        return r
                return None
            return block
        if isinstance(n, FallthroughNormalForm):
            return lambda fr: FALL
        if isinstance(n, Return):
            e = self._expr(n.expr)

            def ret(fr):
                st.rule_applications += 1
                return e(fr)
            return ret
        if isinstance(n, Loop):
            args = [self._expr(a) for a in n.args]
            k = len(args)

            def loop(fr):
                st.rule_applications += 1
                fr[:k] = [a(fr) for a in args]
                return LOOP
            return loop
        if isinstance(n, (Bind, Normalize)):
            e = self._expr(n.expr)
            th = nd(n.then)
            s = n.slot

            def bind(fr):
                fr[s] = e(fr)
                return th(fr)
            return bind
        if isinstance(n, CheckSym):
            sym = self.symbols.get(*n.sym)
            th, el = nd(n.then), nd(n.else_)
            s = n.slot
            if sym is None:
                # a symbol no term can carry: the test always fails
                return el
            if isinstance(n.else_, Fail):
                return lambda fr: th(fr) if fr[s].sym is sym else None
            return lambda fr: th(fr) if fr[s].sym is sym else el(fr)
        if isinstance(n, CheckEqual):
            return self._check_equal(n)
        if isinstance(n, GuardNonEmpty):
            th, el = nd(n.then), nd(n.else_)
            s = n.slot
            if isinstance(n.else_, Fail):
                return lambda fr: th(fr) if fr[s].sym is CONS else None
            return lambda fr: th(fr) if fr[s].sym is CONS else el(fr)
        if isinstance(n, GuardSingle):
            th, el = nd(n.then), nd(n.else_)
            s = n.slot

            def single(fr):
                t = fr[s]
                if t.sym is CONS and t.args[1].sym is NIL:
                    return th(fr)
                return el(fr)
            return single
        if isinstance(n, CheckList):
            th = nd(n.then)
            s = n.slot

            def check_list(fr):
                y = fr[s].sym
                if y is CONS or y is NIL:
                    return th(fr)
                return None
            return check_list
        if isinstance(n, ListLoop):
            return self._list_loop(n)
        raise TypeError(n)

    def _check_equal(self, n: CheckEqual):
        th, el = self._node(n.then), self._node(n.else_)
        a, b = self._expr(n.a), self._expr(n.b)
        if self.shared:
            if isinstance(n.a, SlotRef) and isinstance(n.b, SlotRef):
                i, j = n.a.slot, n.b.slot
                return lambda fr: th(fr) if fr[i] is fr[j] else el(fr)
            return lambda fr: th(fr) if a(fr) is b(fr) else el(fr)
        eq = structural_equal
        return lambda fr: th(fr) if eq(a(fr), b(fr)) else el(fr)

    def _list_loop(self, n: ListLoop):
        body = self._node(n.body)
        exhausted = self._node(n.exhausted)
        subj, bslot, eslot, plus = n.subject, n.begin, n.end, n.plus

        def loop(fr):
            cur = fr[subj]
            fr[bslot] = cur
            end = cur
            if plus:
                if end.sym is not CONS:
                    return exhausted(fr)
                end = end.args[1]
            while True:
                fr[eslot] = end
                r = body(fr)
                if r is not None:
                    return r
                if end.sym is not CONS:
                    return exhausted(fr)
                end = end.args[1]
        return loop

    # -- normalization ---------------------------------------------------------------

    def normalize(self, t: Term) -> Term:
        """Innermost normal form of ``t`` (which must live in this runtime's store)."""
        if t.nf:
            return t
        funcs = self.funcs
        delays = self._delays
        intern = self.store._intern
        symbols = self.symbols
        stack = [[t, 0, []]]
        while True:
            frame = stack[-1]
            term, i, acc = frame
            args = term.args
            if i < len(args):
                frame[1] = i + 1
                a = args[i]
                dl = delays.get(term.sym)
                if a.nf or (dl is not None and i in dl):
                    acc.append(a)
                else:
                    stack.append([a, 0, []])
                continue
            stack.pop()
            sym = term.sym
            if sym.constructor:
                if all(x is y for x, y in zip(acc, args)):
                    value = term
                else:
                    value = intern(sym, tuple(acc))
                value.nf = True
            else:
                f = funcs.get((sym.name, sym.arity))
                if f is None or symbols.get(sym.name, sym.arity) is not sym:
                    raise UnknownSymbol(f"unregistered symbol {sym.name}/{sym.arity}")
                value = f(tuple(acc))
            if not stack:
                return value
            stack[-1][2].append(value)

    def run(self, t: Term | str) -> tuple[Term, ExecutionStats]:
        """Normalize with fresh per-run counters; returns the result and stats."""
        if isinstance(t, str):
            t = self.parse(t)
        st = self.stats
        st.depth = 0
        t0 = time.perf_counter()
        try:
            r = self.normalize(t)
        except RecursionError:
            raise DepthLimitExceeded("native recursion limit reached") from None
        finally:
            st.wall_time = time.perf_counter() - t0
            ss = self.store.stats
            st.peak_unique_nodes = ss.peak_unique_nodes if self.shared else ss.construction_requests
            st.peak_total_nodes = ss.construction_requests
        return r, st

    def reset_stats(self) -> None:
        memo_disabled = self.stats.memo_disabled
        fresh = ExecutionStats(memo_disabled=memo_disabled)
        self.stats.__dict__.update(fresh.__dict__)


# -- deep recursion support -------------------------------------------------------------

STACK_BYTES = 1 << 30
RECURSION_LIMIT = 1_500_000


def deep_call(fn: Callable, *args, **kw):
    """Run ``fn`` in a thread with a large native stack and recursion limit."""
    box: dict = {}

    def target():
        try:
            box["value"] = fn(*args, **kw)
        except BaseException as e:  # re-raised in the caller
            box["error"] = e

    old_limit = sys.getrecursionlimit()
    old_size = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, RECURSION_LIMIT))
    threading.stack_size(STACK_BYTES)
    try:
        th = threading.Thread(target=target, name="rwc-eval")
        th.start()
    finally:
        threading.stack_size(old_size)
    th.join()
    sys.setrecursionlimit(old_limit)
    if "error" in box:
        raise box["error"]
    return box.get("value")


def run_with_config(program: Program, t: str | Callable, config: RunConfig | None = None
                    ) -> tuple[Term, ExecutionStats, Runtime]:
    """Build a runtime for ``config``, parse ``t`` into it and normalize."""
    rt = Runtime(program, config)

    def go():
        term = rt.parse(t) if isinstance(t, str) else t(rt)
        return rt.run(term)
    r, st = deep_call(go)
    return r, st, rt


def normalize(program: Program, t: str, config: RunConfig | None = None) -> Term:
    return run_with_config(program, t, config)[0]


__all__ = ["Runtime", "RunConfig", "ExecutionStats", "run_with_config", "normalize",
           "deep_call", "DepthLimitExceeded", "ResourceError", "UnknownSymbol", "MatchError",
           "RuntimeError_", "StoreError"]
