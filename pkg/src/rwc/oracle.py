"""A naive reference interpreter used as ground truth in tests.

Terms are nested tuples ``(name, arg1, ..., argn)``; lists are
``("[]", item1, ..., itemn)``.  Rules are interpreted straight from the
syntax tree: matching enumerates every list split (shortest first), conditions
backtrack through those matches, and rewriting is innermost with arguments
left to right.  Nothing here shares code with the compiler beyond the
syntax tree and the parser.
"""

from __future__ import annotations

from typing import Iterator, Mapping

from .lang.ast import App, Nested, Rule, Var

LIST = "[]"
TRUE_T = ("t",)
FALSE_T = ("f",)
_LIST_BUILDERS = ("conc", "list", "null")


class OracleError(Exception):
    pass


class StepLimitExceeded(OracleError):
    pass


# -- term helpers --------------------------------------------------------------

def is_list(t) -> bool:
    return t[0] == LIST


def mk_list(items) -> tuple:
    return (LIST,) + tuple(items)


def to_tuple(term) -> tuple:
    """Convert a store term (any object with ``sym``/``args``) to tuple form."""
    from .store import CONS, NIL
    out_stack: list = []
    todo = [(term, False)]
    while todo:
        t, done = todo.pop()
        if t.sym is CONS or t.sym is NIL:
            items = []
            cur = t
            while cur.sym is CONS:
                items.append(cur.args[0])
                cur = cur.args[1]
            if not done:
                todo.append((t, True))
                todo.extend((x, False) for x in reversed(items))
            else:
                k = len(items)
                vals = out_stack[len(out_stack) - k:] if k else []
                del out_stack[len(out_stack) - k:]
                out_stack.append((LIST,) + tuple(vals))
            continue
        if not t.args:
            out_stack.append((t.sym.name,))
            continue
        if not done:
            todo.append((t, True))
            todo.extend((x, False) for x in reversed(t.args))
        else:
            k = len(t.args)
            vals = out_stack[len(out_stack) - k:]
            del out_stack[len(out_stack) - k:]
            out_stack.append((t.sym.name,) + tuple(vals))
    return out_stack[0]


def format_tuple(t) -> str:
    if t[0] == LIST:
        return "[" + ",".join(format_tuple(x) for x in t[1:]) + "]"
    if len(t) == 1:
        return t[0]
    return t[0] + "(" + ",".join(format_tuple(x) for x in t[1:]) + ")"


def parse_tuple(text: str) -> tuple:
    """Parse the textual term syntax into tuple form (no symbol checking)."""
    toks: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()[],":
            toks.append(ch)
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()[],":
                j += 1
            toks.append(text[i:j])
            i = j
    pos = 0

    def seq(close: str) -> list:
        nonlocal pos
        items = [term()]
        while toks[pos] == ",":
            pos += 1
            items.append(term())
        if toks[pos] != close:
            raise OracleError(f"expected {close!r}, found {toks[pos]!r}")
        pos += 1
        return items

    def term():
        nonlocal pos
        tok = toks[pos]
        pos += 1
        if tok == "[":
            if toks[pos] == "]":
                pos += 1
                return mk_list(())
            return mk_list(seq("]"))
        if tok in "()],":
            raise OracleError(f"unexpected {tok!r}")
        if pos < len(toks) and toks[pos] == "(":
            pos += 1
            args = seq(")")
            if tok == "list" and len(args) == 1:
                return mk_list(args)
            if tok == "conc" and len(args) == 2:
                a0 = args[0][1:] if is_list(args[0]) else (args[0],)
                a1 = args[1][1:] if is_list(args[1]) else (args[1],)
                return mk_list(a0 + a1)
            return (tok,) + tuple(args)
        if tok == "null":
            return mk_list(())
        return (tok,)

    out = term()
    if pos != len(toks):
        raise OracleError("trailing input")
    return out


# -- the interpreter ---------------------------------------------------------------

class Oracle:
    """Interprets rules directly.  ``rules`` maps (name, arity) to rule lists."""

    def __init__(self, rules: Mapping[tuple, list[Rule]], constructors: set,
                 delays: Mapping[tuple, tuple] | None = None, step_limit: int = 10 ** 7,
                 log_bindings: bool = False, presorted: bool = False):
        self.constructors = set(constructors)
        self.delays = {k: frozenset(v) for k, v in (delays or {}).items() if v}
        # presorted: rules are already in application order (e.g. after preprocessing,
        # where left-hand sides no longer show the original patterns)
        self.rules = {k: list(v) if presorted else order_rules(v) for k, v in rules.items()}
        self.functions = set(rules)
        self.step_limit = step_limit
        self.steps = 0
        self.binding_log: list | None = [] if log_bindings else None

    @classmethod
    def from_modules(cls, top, modules: Mapping | None = None, **kw) -> "Oracle":
        modules = dict(modules or {})
        modules.setdefault(top.name, top)
        seen: list = []

        def visit(m):
            if m.name in [x.name for x in seen]:
                return
            seen.append(m)
            for i in m.imports:
                if i not in modules:
                    raise OracleError(f"unknown import {i}")
                visit(modules[i])
        visit(top)
        rules: dict[tuple, list] = {}
        ctors: set = set()
        delays: dict[tuple, set] = {}
        for m in seen:
            for d in m.signature:
                k = (d.name, d.arity)
                if d.constructor:
                    ctors.add(k)
                else:
                    rules.setdefault(k, [])
                    if d.delay:
                        delays.setdefault(k, set()).update(d.delay)
        for m in seen:
            for r in m.rules:
                rules.setdefault((r.lhs.name, len(r.lhs.args)), []).append(r)
        return cls(rules, ctors, delays, **kw)

    # -- normalization -------------------------------------------------------

    def normalize(self, t: tuple) -> tuple:
        head = t[0]
        if head == LIST:
            return (LIST,) + tuple(self.normalize(x) for x in t[1:])
        key = (head, len(t) - 1)
        if key in self.functions:
            dl = self.delays.get(key, ())
            args = tuple(a if i in dl else self.normalize(a) for i, a in enumerate(t[1:]))
            return self.rewrite(key, args)
        if len(t) == 1 or key in self.constructors or head in ("t", "f"):
            return (head,) + tuple(self.normalize(x) for x in t[1:])
        raise OracleError(f"unknown symbol {head}/{len(t) - 1}")

    def rewrite(self, key: tuple, args: tuple) -> tuple:
        while True:
            res = self.try_rules(key, args)
            if res is not None:
                return res
            dl = self.delays.get(key)
            if dl:
                forced = tuple(self.normalize(a) if i in dl else a for i, a in enumerate(args))
                if forced != args:
                    args = forced
                    continue
            return (key[0],) + args

    def try_rules(self, key: tuple, args: tuple):
        dl = self.delays.get(key, frozenset())
        for r in self.rules.get(key, ()):
            for env in self.match_args(r.lhs.args, args, {}, dl):
                for env2 in self.conditions(r.conditions, env):
                    res = self.body(r.rhs, env2)
                    if res is not None:
                        self.steps += 1
                        if self.steps > self.step_limit:
                            raise StepLimitExceeded(f"more than {self.step_limit} rewrite steps")
                        if self.binding_log is not None:
                            self.binding_log.append((r.label, dict(env2)))
                        return res
        return None

    def applicable(self, key: tuple, args: tuple) -> list[str]:
        """Labels of every rule whose lhs and conditions succeed (no rewriting of the result)."""
        out = []
        dl = self.delays.get(key, frozenset())
        for r in self.rules.get(key, ()):
            ok = False
            for env in self.match_args(r.lhs.args, args, {}, dl):
                for env2 in self.conditions(r.conditions, env):
                    if self.body(r.rhs, env2) is not None:
                        ok = True
                        break
                if ok:
                    break
            if ok:
                out.append(r.label)
        return out

    # -- matching ------------------------------------------------------------------
    # env maps variable keys to (value, raw); list variables hold item tuples

    def match_args(self, pats, args, env: dict, delayed=frozenset()) -> Iterator[dict]:
        def go(i, env):
            if i == len(pats):
                yield env
                return
            for e in self.match(pats[i], args[i], env, i in delayed):
                yield from go(i + 1, e)
        yield from go(0, env)

    def match(self, p, t, env: dict, raw: bool = False) -> Iterator[dict]:
        if isinstance(p, Var):
            if p.is_list:
                if not is_list(t):
                    return
                items = t[1:]
                if p.kind == "+" and not items:
                    return
                if p.key in env:
                    if env[p.key][0] == items:
                        yield env
                    return
                yield {**env, p.key: (items, raw)}
                return
            if p.key in env:
                if env[p.key][0] == t:
                    yield env
                return
            yield {**env, p.key: (t, raw)}
            return
        if p.name in _LIST_BUILDERS:
            if not is_list(t):
                return
            yield from self.match_items(list_items_of(p), 0, t[1:], 0, env, raw)
            return
        if t[0] != p.name or len(t) - 1 != len(p.args):
            return
        yield from self.match_args(p.args, t[1:], env, frozenset(range(len(p.args))) if raw else frozenset())

    def match_items(self, items, i, ts, j, env, raw) -> Iterator[dict]:
        if i == len(items):
            if j == len(ts):
                yield env
            return
        x = items[i]
        if isinstance(x, Var) and x.is_list:
            if x.key in env:
                seq = env[x.key][0]
                if ts[j:j + len(seq)] == seq:
                    yield from self.match_items(items, i + 1, ts, j + len(seq), env, raw)
                return
            start = j + 1 if x.kind == "+" else j
            for k in range(start, len(ts) + 1):
                yield from self.match_items(items, i + 1, ts, k, {**env, x.key: (ts[j:k], raw)}, raw)
            return
        if j >= len(ts):
            return
        for e in self.match(x, ts[j], env, raw):
            yield from self.match_items(items, i + 1, ts, j + 1, e, raw)

    # -- conditions ------------------------------------------------------------------

    def conditions(self, conds, env: dict) -> Iterator[dict]:
        if not conds:
            yield env
            return
        c, rest = conds[0], conds[1:]
        if c.op == ":=":
            value = self.eval(c.rhs, env)
            for e in self.match(c.lhs, value, env):
                yield from self.conditions(rest, e)
            return
        new_l = _vars(c.lhs) - set(env)
        new_r = _vars(c.rhs) - set(env)
        if c.op == "==" and new_l and not new_r:
            for e in self.match(c.lhs, self.eval(c.rhs, env), env):
                yield from self.conditions(rest, e)
            return
        if c.op == "==" and new_r and not new_l:
            for e in self.match(c.rhs, self.eval(c.lhs, env), env):
                yield from self.conditions(rest, e)
            return
        if new_l or new_r:
            raise OracleError(f"condition {c} has new variables on both sides or is negative")
        a = self.eval(c.lhs, env)
        b = self.eval(c.rhs, env)
        if (a == b) == (c.op == "=="):
            yield from self.conditions(rest, env)

    def body(self, b, env: dict):
        if isinstance(b, Nested):
            for a in b.alts:
                res = self.alt(a, env)
                if res is not None:
                    return res
            return None
        return self.eval(b, env)

    def alt(self, a, env: dict):
        if a.orelse is not None:
            c = a.conditions[0]
            x = self.eval(c.lhs, env)
            y = self.eval(c.rhs, env)
            if (x == y) == (c.op == "=="):
                return self.body(a.body, env)
            return self.alt(a.orelse, env)
        for e in self.conditions(a.conditions, env):
            res = self.body(a.body, e)
            if res is not None:
                return res
        return None

    # -- evaluation ---------------------------------------------------------------------

    def eval(self, e, env: dict):
        """Normal form of expression ``e`` under ``env``."""
        if isinstance(e, Var):
            v, raw = env[e.key]
            if e.is_list:
                v = mk_list(v)
            return self.normalize(v) if raw else v
        name = e.name
        if name in _LIST_BUILDERS:
            out: list = []
            for x in list_items_of(e):
                if _denotes_list(x):
                    v = self.eval(x, env)
                    if not is_list(v):
                        raise OracleError("splicing a non-list")
                    out.extend(v[1:])
                else:
                    out.append(self.eval(x, env))
            return mk_list(out)
        if name in ("list_head", "list_tail", "list_last", "list_prefix",
                    "not_empty_list", "is_single_element"):
            return _builtin(name, self.eval(e.args[0], env))
        if name in ("t", "f") and not e.args:
            return (name,)
        key = (name, len(e.args))
        if key in self.functions:
            dl = self.delays.get(key, ())
            args = tuple(self.instantiate(a, env) if i in dl else self.eval(a, env)
                         for i, a in enumerate(e.args))
            return self.rewrite(key, args)
        if key in self.constructors or not e.args:
            return (name,) + tuple(self.eval(a, env) for a in e.args)
        raise OracleError(f"unknown symbol {name}/{len(e.args)}")

    def instantiate(self, e, env: dict):
        """``e`` under ``env`` without rewriting (for delayed arguments)."""
        if isinstance(e, Var):
            v = env[e.key][0]
            return mk_list(v) if e.is_list else v
        name = e.name
        if name in _LIST_BUILDERS:
            out: list = []
            for x in list_items_of(e):
                v = self.instantiate(x, env)
                if _denotes_list(x):
                    out.extend(v[1:])
                else:
                    out.append(v)
            return mk_list(out)
        if name in ("list_head", "list_tail", "list_last", "list_prefix",
                    "not_empty_list", "is_single_element"):
            return _builtin(name, self.instantiate(e.args[0], env))
        return (name,) + tuple(self.instantiate(a, env) for a in e.args)

    # -- redex scan -------------------------------------------------------------------------

    def find_redex(self, t: tuple):
        """A subterm some rule applies to, or ``None``."""
        stack = [t]
        while stack:
            x = stack.pop()
            stack.extend(x[1:])
            if x[0] == LIST:
                continue
            key = (x[0], len(x) - 1)
            if key in self.functions and self.applicable(key, x[1:]):
                return x
        return None


def _builtin(name: str, v):
    if name == "not_empty_list":
        return TRUE_T if is_list(v) and len(v) > 1 else FALSE_T
    if name == "is_single_element":
        return TRUE_T if is_list(v) and len(v) == 2 else FALSE_T
    if not is_list(v) or len(v) == 1:
        raise OracleError(f"{name} of an empty list or non-list")
    if name == "list_head":
        return v[1]
    if name == "list_tail":
        return (LIST,) + v[2:]
    if name == "list_last":
        return v[-1]
    return v[:-1]


def _denotes_list(x) -> bool:
    if isinstance(x, Var):
        return x.is_list
    return x.name in _LIST_BUILDERS or x.name in ("list_tail", "list_prefix")


def list_items_of(p) -> list:
    """Items of a list expression, list-valued items kept as single entries."""
    out: list = []

    def go(x):
        if isinstance(x, App) and x.name == "conc" and len(x.args) == 2:
            for a in x.args:
                if _denotes_list(a):
                    go(a)
                else:
                    out.append(a)
        elif isinstance(x, App) and x.name == "list" and len(x.args) == 1:
            out.append(x.args[0])
        elif isinstance(x, App) and x.name == "null" and not x.args:
            pass
        else:
            out.append(x)
    go(p)
    return out


def _vars(e) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            out.add(x.key)
        else:
            stack.extend(x.args)
    return out


# -- specificity, by skolemization ----------------------------------------------------------

def _skolem(p):
    """Freeze a pattern into a term whose variables are distinct constants."""
    if isinstance(p, Var):
        return ("$v", p.key)
    if p.name in _LIST_BUILDERS:
        out = []
        for x in list_items_of(p):
            if isinstance(x, Var) and x.is_list:
                out.append(("$lv", x.key, x.kind))
            else:
                out.append(_skolem(x))
        return mk_list(out)
    return (p.name,) + tuple(_skolem(a) for a in p.args)


def _covers(q, s, env: dict) -> bool:
    """Whether pattern ``q`` matches frozen pattern ``s``."""
    if isinstance(q, Var):
        if s[0] == "$lv":
            return False
        if q.key in env:
            return env[q.key] == s
        env[q.key] = s
        return True
    if q.name in _LIST_BUILDERS:
        if s[0] != LIST:
            return False
        return _covers_items(list_items_of(q), 0, s[1:], 0, env)
    if s[0] != q.name or len(s) - 1 != len(q.args):
        return False
    return all(_covers(a, b, env) for a, b in zip(q.args, s[1:]))


def _covers_items(qs, i, ss, j, env) -> bool:
    if i == len(qs):
        return j == len(ss)
    q = qs[i]
    if isinstance(q, Var) and q.is_list:
        if q.key in env:
            seq = env[q.key]
            if ss[j:j + len(seq)] == seq:
                return _covers_items(qs, i + 1, ss, j + len(seq), env)
            return False
        for k in range(j, len(ss) + 1):
            chunk = ss[j:k]
            if q.kind == "+" and all(x[0] == "$lv" and x[2] == "*" for x in chunk):
                continue
            trial = dict(env)
            trial[q.key] = chunk
            if _covers_items(qs, i + 1, ss, k, trial):
                env.update(trial)
                return True
        return False
    if j >= len(ss):
        return False
    trial = dict(env)
    if _covers(q, ss[j], trial) and _covers_items(qs, i + 1, ss, j + 1, trial):
        env.update(trial)
        return True
    return False


def generalizes(q, p) -> bool:
    """Every term matched by ``p`` is matched by ``q``."""
    return _covers(q, _skolem(p), {})


def order_rules(rules: list[Rule]) -> list[Rule]:
    """Specificity first, textual order among incomparable rules, defaults last."""
    def topo(rs):
        rest = list(rs)
        out = []
        while rest:
            for r in rest:
                beaten = any(o is not r and generalizes(r.lhs, o.lhs) and not generalizes(o.lhs, r.lhs)
                             for o in rest)
                if not beaten:
                    out.append(r)
                    rest.remove(r)
                    break
        return out
    return topo([r for r in rules if not r.default]) + topo([r for r in rules if r.default])


__all__ = ["Oracle", "OracleError", "StepLimitExceeded", "to_tuple", "format_tuple",
           "parse_tuple", "mk_list", "order_rules", "generalizes", "LIST"]
