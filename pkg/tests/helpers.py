"""Shared test utilities: corpus loading, random ground terms, runtime/oracle glue."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache

from rwc.driver import BuildOptions, build, corpus_text, load_modules
from rwc.lang.ast import Var, flatten_list, is_list_expr
from rwc.lang.parser import parse_module
from rwc.oracle import LIST, Oracle, format_tuple, to_tuple
from rwc.runtime import RunConfig, Runtime

# top module -> functions whose arguments may themselves be calls in random inputs
CORPUS = {
    "Types": ("lookup", "add-to"),
    "Set": ("set",),
    "Nat": ("plus", "minus", "lt", "eq", "if", "max"),
    "Mod17": ("inc17", "add17"),
    "Evalsym": (),
    "Evalexp": (),
    "Evaltree": (),
    "Automaton": (),
    "Specific": (),
}


@lru_cache(maxsize=None)
def modules_for(top: str) -> tuple:
    mods = load_modules(texts=[corpus_text(top)])
    return mods[top], mods


def program_for(top: str, options: BuildOptions | None = None):
    m, mods = modules_for(top)
    return build(m, mods, options or BuildOptions()).program


def oracle_for(top: str, **kw) -> Oracle:
    m, mods = modules_for(top)
    return Oracle.from_modules(m, mods, **kw)


def module(text: str):
    """Parse module text whose imports come from the corpus."""
    top = parse_module(text)
    mods = load_modules(texts=[text])
    return top, mods


@dataclass
class Signature:
    constructors: list   # (name, arity)
    functions: list      # (name, arity)


def signature_of(top: str) -> Signature:
    prog = program_for(top)
    ctors = sorted(d.ident for d in prog.constructors) + [("t", 0), ("f", 0)]
    funcs = sorted(prog.plans)
    return Signature(ctors, funcs)


class TermGen:
    """Random ground terms as oracle tuples.

    ``nested`` names functions that may appear below the root; list nodes
    are produced with probability ``p_list`` and have at most ``max_len``
    elements.
    """

    def __init__(self, sig: Signature, nested=(), seed: int = 0, p_list: float = 0.2,
                 max_len: int = 6, p_call: float = 0.15):
        self.rng = random.Random(seed)
        self.sig = sig
        self.nested = [f for f in sig.functions if f[0] in nested]
        self.p_list = p_list
        self.max_len = max_len
        self.p_call = p_call
        self.leaves = [c for c in sig.constructors if c[1] == 0]
        self.inner = [c for c in sig.constructors if c[1] > 0]

    def term(self, depth: int) -> tuple:
        r = self.rng
        if depth <= 1:
            return (r.choice(self.leaves)[0],)
        x = r.random()
        if x < self.p_list:
            n = r.randint(0, self.max_len)
            return (LIST,) + tuple(self.term(depth - 1) for _ in range(n))
        if self.nested and x < self.p_list + self.p_call:
            name, ar = r.choice(self.nested)
            return (name,) + tuple(self.term(depth - 1) for _ in range(ar))
        if self.inner and r.random() < 0.7:
            name, ar = r.choice(self.inner)
            return (name,) + tuple(self.term(depth - 1) for _ in range(ar))
        return (r.choice(self.leaves)[0],)

    def call(self, fn: tuple, depth: int = 5) -> tuple:
        name, ar = fn
        return (name,) + tuple(self.term(self.rng.randint(1, depth - 1)) for _ in range(ar))

    def instance(self, e, env: dict, depth: int = 3):
        """A random ground instance of pattern ``e``; list variables give item lists."""
        if isinstance(e, Var):
            if e.key not in env:
                if e.is_list:
                    n = self.rng.randint(1 if e.kind == "+" else 0, 3)
                    env[e.key] = [self.term(self.rng.randint(1, depth)) for _ in range(n)]
                else:
                    env[e.key] = self.term(self.rng.randint(1, depth))
            return env[e.key]
        if is_list_expr(e):
            items: list = []
            for x in flatten_list(e):
                if isinstance(x, Var) and x.is_list:
                    items.extend(self.instance(x, env, depth))
                else:
                    items.append(self.instance(x, env, depth))
            return (LIST,) + tuple(items)
        return (e.name,) + tuple(self.instance(a, env, depth) for a in e.args)


def inputs_for(top: str, fn: tuple, count: int, seed: int = 0, depth: int = 5) -> list[tuple]:
    """Half unconstrained random calls, half random instances of the
    function's own left-hand sides (so that rules actually fire)."""
    g = TermGen(signature_of(top), CORPUS.get(top, ()), seed=seed)
    rules = oracle_for(top).rules.get(fn, [])
    out = []
    for i in range(count):
        if rules and i % 2:
            t = g.instance(g.rng.choice(rules).lhs, {})
            if _depth(t) <= depth and all(_length_ok(x) for x in _subterms(t)):
                out.append(t)
                continue
        out.append(g.call(fn, depth))
    return out


def _depth(t: tuple) -> int:
    return 1 + max((_depth(a) for a in t[1:]), default=0)


def _subterms(t: tuple):
    yield t
    for a in t[1:]:
        yield from _subterms(a)


def _length_ok(t: tuple, max_len: int = 6) -> bool:
    return t[0] != LIST or len(t) - 1 <= max_len


def runtime_normalize(rt: Runtime, t: tuple) -> tuple:
    r = rt.normalize(rt.parse(format_tuple(t)))
    return to_tuple(r)


def all_function_names(top: str) -> frozenset:
    return frozenset(f"{k[0]}/{k[1]}" for k in program_for(top).plans)


def flag_configs():
    """All 16 combinations of sharing, TRE, constant caching and memoization."""
    for sharing in (True, False):
        for tre in (True, False):
            for cc in (True, False):
                for memo in (True, False):
                    yield sharing, tre, cc, memo


def runtime_for(top: str, sharing: bool, tre: bool, cc: bool, memo: bool) -> Runtime:
    prog = program_for(top, BuildOptions(tre=tre, constcache=cc))
    cfg = RunConfig(sharing=sharing, memo=all_function_names(top) if memo else None,
                    memo_enabled=memo)
    return Runtime(prog, cfg)


def numeral(n: int) -> str:
    return "s(" * n + "0" + ")" * n
