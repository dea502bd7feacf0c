"""Rule collection and the source-to-source steps that turn input rules into
the extended form consumed by the planner.

Step order (each consumes the previous step's output):

1. collect rules per function (:func:`collect_functions`)
2. :func:`linearize`
3. :func:`introduce_assignments`
4. :func:`eliminate_constructor_args`
5. :func:`simplify_assignment_patterns`
6. :func:`simplify_list_patterns` (element hoisting, then accessor chains)
7. :func:`combine_rules`
8. :func:`introduce_else`

Every step is idempotent.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .lang.ast import (BOOLEANS, LIST_BUILDERS, Alt, App, Condition, ModuleDef, Nested,
                       Rule, SymbolDecl, Var, build_list, flatten_list, is_list_pattern,
                       substitute, var_keys, variables, walk)
from .lang.printer import format_decl, format_rule
from .specificity import duplicate_pairs, instance_of, specificity_order


class PreprocessError(Exception):
    def __init__(self, msg: str, rule: Rule | None = None, path: str | None = None):
        self.rule = rule
        where = ""
        if path:
            where += f"{path}:"
        if rule is not None and rule.loc is not None:
            where += f"{rule.loc}:"
        super().__init__(f"{where} {msg}".strip())


class ImportError_(PreprocessError):
    """Unresolved or cyclic import."""


# -- units ---------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionUnit:
    decl: SymbolDecl
    rules: tuple[Rule, ...]
    modules: tuple[str, ...] = ()
    # (name, arity) -> is constructor, for every symbol the rules mention
    constructors: frozenset = frozenset()

    @property
    def symbol(self) -> tuple[str, int]:
        return self.decl.ident

    @property
    def name(self) -> str:
        return f"{self.decl.name}/{self.decl.arity}"

    def with_rules(self, rules) -> "FunctionUnit":
        return replace(self, rules=tuple(rules))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(format_decl(self.decl).encode())
        for r in self.rules:
            h.update(b"\0" + format_rule(r).encode())
        for c in sorted(self.constructors):
            h.update(f"\1{c[0]}/{c[1]}".encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ConstructorUnit:
    decls: tuple[SymbolDecl, ...]
    modules: tuple[str, ...] = ()

    name = "<constructors>"

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for d in self.decls:
            h.update(format_decl(d).encode() + b"\0")
        return h.hexdigest()[:16]


@dataclass
class Collected:
    units: list[FunctionUnit]
    constructors: ConstructorUnit
    decls: dict[tuple[str, int], SymbolDecl]
    order: list[str]  # module names in traversal order
    diagnostics: list = field(default_factory=list)

    def unit(self, name: str, arity: int | None = None) -> FunctionUnit:
        for u in self.units:
            if u.decl.name == name and (arity is None or u.decl.arity == arity):
                return u
        raise KeyError(name)


def import_closure(top: ModuleDef, modules: Mapping[str, ModuleDef]) -> list[ModuleDef]:
    """Top module first, then imports depth-first; each module once."""
    order: list[ModuleDef] = []
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    stack: list[str] = []

    def visit(m: ModuleDef):
        state[m.name] = 1
        stack.append(m.name)
        order.append(m)
        for imp in m.imports:
            st = state.get(imp)
            if st == 1:
                cycle = stack[stack.index(imp):] + [imp]
                raise ImportError_(f"cyclic import: {' -> '.join(cycle)}", path=m.path)
            if st == 2:
                continue
            if imp not in modules:
                raise ImportError_(f"module {m.name} imports unknown module {imp}", path=m.path)
            visit(modules[imp])
        stack.pop()
        state[m.name] = 2

    visit(top)
    return order


def merge_decls(mods: Iterable[ModuleDef]) -> dict[tuple[str, int], SymbolDecl]:
    out: dict[tuple[str, int], SymbolDecl] = {}
    for m in mods:
        for d in m.signature:
            old = out.get(d.ident)
            if old is None:
                out[d.ident] = d
            else:
                out[d.ident] = SymbolDecl(d.name, d.arity, old.attributes | d.attributes,
                                          tuple(sorted(set(old.delay) | set(d.delay))), old.loc)
    return out


def collect_functions(top: ModuleDef, modules: Mapping[str, ModuleDef] | None = None) -> Collected:
    """Group the rules of the import closure by outermost symbol."""
    modules = dict(modules or {})
    modules.setdefault(top.name, top)
    mods = import_closure(top, modules)
    decls = merge_decls(mods)
    rules: dict[tuple[str, int], list[Rule]] = {k: [] for k in decls}
    origin: dict[tuple[str, int], list[str]] = {k: [] for k in decls}
    for m in mods:
        for r in m.rules:
            key = r.symbol
            if key not in rules:
                raise PreprocessError(f"rule [{r.label}] defines undeclared function "
                                      f"{key[0]}/{key[1]}", r, m.path)
            if decls[key].constructor:
                raise PreprocessError(f"constructor {key[0]} occurs outermost in [{r.label}]",
                                      r, m.path)
            rules[key].append(r if r.origin is not None else r.with_(origin=r.lhs))
            if m.name not in origin[key]:
                origin[key].append(m.name)
    ctor_set = constructor_predicate(decls)
    units = []
    diags = []
    for key, d in decls.items():
        if d.constructor:
            continue
        rs = specificity_order(rules[key])
        for a, b in duplicate_pairs(rs):
            diags.append(f"warning: rules [{a.label}] and [{b.label}] have the same "
                         f"left-hand side and no conditions; [{b.label}] is unreachable")
        used = set()
        for r in rs:
            for x in walk_rule(r):
                if isinstance(x, App):
                    used.add((x.name, x.arity))
        ctors = frozenset(k for k in used if ctor_set(*k))
        units.append(FunctionUnit(d, tuple(rs), tuple(origin[key]), ctors))
    cdecls = tuple(d for d in decls.values() if d.constructor)
    cmods = tuple(m.name for m in mods if any(d.constructor for d in m.signature))
    return Collected(units, ConstructorUnit(cdecls, cmods), decls, [m.name for m in mods], diags)


def walk_rule(r: Rule):
    yield from walk(r.lhs)
    for c in r.conditions:
        yield from walk(c.lhs)
        yield from walk(c.rhs)
    yield from _walk_body(r.rhs)


def _walk_body(b):
    if isinstance(b, Nested):
        for a in b.alts:
            yield from _walk_alt(a)
    else:
        yield from walk(b)


def _walk_alt(a: Alt):
    for c in a.conditions:
        yield from walk(c.lhs)
        yield from walk(c.rhs)
    yield from _walk_body(a.body)
    if a.orelse is not None:
        yield from _walk_alt(a.orelse)


def constructor_predicate(decls: Mapping[tuple[str, int], SymbolDecl]) -> Callable[[str, int], bool]:
    def is_ctor(name: str, arity: int) -> bool:
        if name in LIST_BUILDERS or (name in BOOLEANS and arity == 0):
            return True
        d = decls.get((name, arity))
        return d is not None and d.constructor
    return is_ctor


# -- fresh names ---------------------------------------------------------------

def all_names(r) -> set[str]:
    names = {v.name for v in variables(r)}
    if isinstance(r, Rule) and r.origin is not None:
        names |= {v.name for v in variables(r.origin)}
    return names


class Fresh:
    """Collision-free variable names for one rule."""

    def __init__(self, used: Iterable[str]):
        self.used = set(used)

    def __call__(self, base: str, kind: str = "", bare_first: bool = False) -> Var:
        if bare_first and base not in self.used:
            self.used.add(base)
            return Var(base, kind)
        i = 1
        while f"{base}{i}" in self.used:
            i += 1
        name = f"{base}{i}"
        self.used.add(name)
        return Var(name, kind)


def _base_letter(name: str) -> str:
    c = name[0]
    return c.upper() if c.isalpha() else "V"


_DIGITS = re.compile(r"[0-9']+$")


def _cursor_base(lv: Var | None) -> str:
    if lv is None:
        return "L"
    base = _DIGITS.sub("", lv.name)
    return base or "L"


# -- step 2: linearization -----------------------------------------------------

def linearize(r: Rule, delayed: Iterable[int] = ()) -> Rule:
    delayed = frozenset(delayed)
    fresh = Fresh(all_names(r))
    seen: dict[str, bool] = {}  # key -> first occurrence lies in a delayed position
    conds: list[Condition] = []

    def go(e, in_delay: bool):
        if isinstance(e, Var):
            if e.key in seen:
                if in_delay or seen[e.key]:
                    raise PreprocessError(
                        f"non-linear variable {e.key} involves a delayed argument in [{r.label}]", r)
                nv = fresh(e.name, e.kind)
                conds.append(Condition("==", Var(e.name, e.kind), nv))
                return nv
            seen[e.key] = in_delay
            return e
        if not e.args:
            return e
        return App(e.name, tuple(go(a, in_delay) for a in e.args), e.loc)

    args = tuple(go(a, i in delayed) for i, a in enumerate(r.lhs.args))
    if not conds:
        return r
    return r.with_(lhs=App(r.lhs.name, args, r.lhs.loc), conditions=tuple(conds) + r.conditions)


# -- step 3: assignments ---------------------------------------------------------

def introduce_assignments(r: Rule) -> Rule:
    bound = var_keys(r.lhs)
    out = []
    changed = False
    for c in r.conditions:
        nl = var_keys(c.lhs) - bound
        nr = var_keys(c.rhs) - bound
        if c.op == "==" and (nl or nr):
            if nl and nr:
                raise PreprocessError(
                    f"both sides of condition '{c}' in [{r.label}] contain new variables", r)
            c = Condition(":=", c.lhs, c.rhs, c.loc) if nl else Condition(":=", c.rhs, c.lhs, c.loc)
            changed = True
        if c.op == ":=":
            bound |= var_keys(c.lhs)
        else:
            bound |= nl | nr
        out.append(c)
    return r.with_(conditions=tuple(out)) if changed else r


# -- step 4: constructor arguments ------------------------------------------------

def eliminate_constructor_args(r: Rule, is_ctor: Callable[[str, int], bool]) -> Rule:
    fresh = Fresh(all_names(r))
    conds: list[Condition] = []

    def ground_ctor(e) -> bool:
        for x in walk(e):
            if isinstance(x, Var) or not is_ctor(x.name, x.arity):
                return False
        return True

    def go(e):
        if isinstance(e, Var) or not e.args:
            return e
        if e.name not in LIST_BUILDERS and ground_ctor(e):
            v = fresh("X")
            conds.append(Condition(":=", v, e))
            return v
        return App(e.name, tuple(go(a) for a in e.args), e.loc)

    args = tuple(go(a) for a in r.lhs.args)
    if not conds:
        return r
    return r.with_(lhs=App(r.lhs.name, args, r.lhs.loc), conditions=tuple(conds) + r.conditions)


# -- step 5: flat assignment patterns ----------------------------------------------

def _is_flat(p) -> bool:
    if isinstance(p, Var) or not p.args or is_list_pattern(p):
        return True
    return all(isinstance(a, Var) for a in p.args)


def _flatten_assignment(c: Condition, fresh: Fresh) -> list[Condition]:
    p = c.lhs
    if c.op != ":=" or _is_flat(p):
        return [c]
    new_args = []
    extra = []
    for a in p.args:
        if isinstance(a, Var):
            new_args.append(a)
            continue
        if is_list_pattern(a):
            v = fresh("L", "*", bare_first=True)
        else:
            v = fresh(_base_letter(a.name), bare_first=True)
        new_args.append(v)
        extra.append(Condition(":=", a, v))
    out = [Condition(":=", App(p.name, tuple(new_args), p.loc), c.rhs, c.loc)]
    for x in extra:
        out.extend(_flatten_assignment(x, fresh))
    return out


def simplify_assignment_patterns(r: Rule) -> Rule:
    if all(_is_flat(c.lhs) for c in r.conditions if c.op == ":="):
        return r
    fresh = Fresh(all_names(r))
    out: list[Condition] = []
    for c in r.conditions:
        out.extend(_flatten_assignment(c, fresh))
    return r.with_(conditions=tuple(out))


# -- step 6: list patterns ----------------------------------------------------------

def _complex_item(x) -> bool:
    return isinstance(x, App) and (bool(x.args) or x.name in LIST_BUILDERS)


def _list_vars(items) -> list[Var]:
    return [x for x in items if isinstance(x, Var) and x.is_list]


def _hoist_in_list(p: App, fresh: Fresh) -> tuple[App, list[Condition]]:
    items = flatten_list(p)
    if not any(_complex_item(x) for x in items):
        return p, []
    new_items = []
    conds = []
    for x in items:
        if _complex_item(x):
            base = "L" if x.name in LIST_BUILDERS else _base_letter(x.name)
            v = fresh(base, bare_first=True)
            conds.append(Condition(":=", x, v))
            new_items.append(v)
        else:
            new_items.append(x)
    return build_list(new_items), conds


def _expand_hoisted(conds: list[Condition], fresh: Fresh) -> list[Condition]:
    """Flatten hoisted assignments and hoist inside their own list patterns."""
    out = []
    for c in conds:
        for d in _flatten_assignment(c, fresh):
            out.extend(_hoist_assignment(d, fresh))
    return out


def _hoist_assignment(c: Condition, fresh: Fresh) -> list[Condition]:
    if c.op != ":=" or not is_list_pattern(c.lhs):
        return [c]
    p, hoisted = _hoist_in_list(c.lhs, fresh)
    if not hoisted:
        return [c]
    return [Condition(":=", p, c.rhs, c.loc)] + _expand_hoisted(hoisted, fresh)


def hoist_list_items(r: Rule) -> Rule:
    """Replace complex list-pattern elements by variables bound in new assignments."""
    fresh = Fresh(all_names(r))
    hoisted: list[Condition] = []

    def go(e):
        if isinstance(e, Var) or not e.args:
            return e
        if is_list_pattern(e):
            p, hs = _hoist_in_list(e, fresh)
            hoisted.extend(hs)
            return p
        return App(e.name, tuple(go(a) for a in e.args), e.loc)

    lhs = App(r.lhs.name, tuple(go(a) for a in r.lhs.args), r.lhs.loc)
    pre = _expand_hoisted(hoisted, fresh)
    rest: list[Condition] = []
    for c in r.conditions:
        rest.extend(_hoist_assignment(c, fresh))
    conds = tuple(pre + rest)
    if lhs == r.lhs and conds == r.conditions:
        return r
    return r.with_(lhs=lhs, conditions=conds)


def _t():
    return App("t")


def _chain(p: App, fresh: Fresh) -> tuple[Var, list[Condition]] | None:
    """Accessor chain for a list pattern with at most one list variable."""
    items = flatten_list(p)
    lvs = _list_vars(items)
    if len(lvs) > 1:
        return None
    lv = lvs[0] if lvs else None
    if lv is not None and len(items) == 1:
        return lv, []
    k = items.index(lv) if lv is not None else len(items)
    pre = items[:k]
    post = items[k + 1:] if lv is not None else []
    base = _cursor_base(lv)
    root = cur = fresh(base, "*", bare_first=True)
    conds: list[Condition] = []
    for idx, e in enumerate(pre):
        conds.append(Condition(":=", _t(), App("not_empty_list", (cur,))))
        conds.append(Condition(":=", e, App("list_head", (cur,))))
        last = idx == len(pre) - 1 and not post
        nxt = lv if (last and lv is not None) else fresh(base, "*")
        conds.append(Condition(":=", nxt, App("list_tail", (cur,))))
        cur = nxt
    for idx, e in enumerate(reversed(post)):
        conds.append(Condition(":=", _t(), App("not_empty_list", (cur,))))
        conds.append(Condition(":=", e, App("list_last", (cur,))))
        last = idx == len(post) - 1
        nxt = lv if last else fresh(base, "*")
        conds.append(Condition(":=", nxt, App("list_prefix", (cur,))))
        cur = nxt
    if lv is None:
        conds.append(Condition(":=", App("f"), App("not_empty_list", (cur,))))
    return root, conds


def chain_list_patterns(r: Rule) -> Rule:
    """Rewrite list patterns with at most one list variable into accessor chains."""
    fresh = Fresh(all_names(r))
    chains: list[Condition] = []

    def go(e):
        if isinstance(e, Var) or not e.args:
            if isinstance(e, App) and e.name == "null":
                res = _chain(e, fresh)
                chains.extend(res[1])
                return res[0]
            return e
        if is_list_pattern(e):
            res = _chain(e, fresh)
            if res is None:
                return e
            chains.extend(res[1])
            return res[0]
        return App(e.name, tuple(go(a) for a in e.args), e.loc)

    lhs = App(r.lhs.name, tuple(go(a) for a in r.lhs.args), r.lhs.loc)
    out = list(chains)
    for c in r.conditions:
        if c.op == ":=" and is_list_pattern(c.lhs):
            res = _chain(c.lhs, fresh)
            if res is not None:
                out.append(Condition(":=", res[0], c.rhs, c.loc))
                out.extend(res[1])
                continue
        out.append(c)
    conds = tuple(out)
    if lhs == r.lhs and conds == r.conditions:
        return r
    return r.with_(lhs=lhs, conditions=conds)


def simplify_list_patterns(r: Rule) -> Rule:
    return chain_list_patterns(hoist_list_items(r))


# -- step 7: combining rules -----------------------------------------------------------

def is_backtracking(p) -> bool:
    """Whether a pattern contains a list pattern with two or more list variables."""
    for x in walk(p):
        if isinstance(x, App) and is_list_pattern(x) and len(_list_vars(flatten_list(x))) > 1:
            return True
    return False


def _cond_nondeterministic(c: Condition) -> bool:
    return c.op == ":=" and is_backtracking(c.lhs)


def _lhs_renaming(a: App, b: App) -> dict[str, Var] | None:
    """Injective variable map taking ``b`` onto ``a``, or None if not a renaming."""
    m: dict[str, Var] = {}
    back: dict[str, str] = {}

    def go(x, y) -> bool:
        if isinstance(x, Var) or isinstance(y, Var):
            if not (isinstance(x, Var) and isinstance(y, Var)) or x.kind != y.kind:
                return False
            if y.key in m:
                return m[y.key].key == x.key
            if back.get(x.key, y.key) != y.key:
                return False
            m[y.key] = Var(x.name, x.kind)
            back[x.key] = y.key
            return True
        if x.name != y.name or len(x.args) != len(y.args):
            return False
        return all(go(p, q) for p, q in zip(x.args, y.args))

    if not go(a, b):
        return None
    return m


def _match_condition(ca: Condition, cb: Condition, m: dict[str, Var],
                     back: dict[str, str], bound_b: set[str]) -> bool:
    """Extend ``m`` so that ``cb`` renamed equals ``ca``; only new variables of ``cb`` may be
    renamed freshly.  Updates ``m``/``back`` in place on success."""
    if ca.op != cb.op:
        return False
    trial = dict(m)
    tback = dict(back)

    def go(x, y) -> bool:
        if isinstance(x, Var) or isinstance(y, Var):
            if not (isinstance(x, Var) and isinstance(y, Var)) or x.kind != y.kind:
                return False
            if y.key in trial:
                return trial[y.key].key == x.key
            if y.key in bound_b:
                return False
            if tback.get(x.key, y.key) != y.key:
                return False
            trial[y.key] = Var(x.name, x.kind)
            tback[x.key] = y.key
            return True
        if x.name != y.name or len(x.args) != len(y.args):
            return False
        return all(go(p, q) for p, q in zip(x.args, y.args))

    if go(ca.lhs, cb.lhs) and go(ca.rhs, cb.rhs):
        m.clear()
        m.update(trial)
        back.clear()
        back.update(tback)
        return True
    return False


@dataclass
class _Item:
    conds: list[Condition]
    body: object
    label: str


def _rename_item(conds, body, m: dict[str, Var], clash: set[str], fresh: Fresh):
    """Apply ``m``; variables not covered by ``m`` that clash get fresh names."""
    full = dict(m)
    for v in variables(list(conds)) + variables(body):
        if v.key in full:
            continue
        if v.name in clash:
            full[v.key] = fresh(v.name, v.kind)
        else:
            full[v.key] = v
    conds = [substitute(c, full) for c in conds]
    body = substitute(body, full)
    return conds, body


def _common_prefix(leader: _Item, others: list[_Item], bound: set[str], fresh: Fresh) -> int:
    """Rename ``others`` in place so their first ``k`` conditions equal the leader's."""
    k = len(leader.conds)
    maps = []
    for it in others:
        m: dict[str, Var] = {b: Var(*_split_key(b)) for b in bound}
        back = {b: b for b in bound}
        bound_b = set(bound)
        n = 0
        while n < min(k, len(it.conds)):
            ca, cb = leader.conds[n], it.conds[n]
            if _cond_nondeterministic(ca) or not _match_condition(ca, cb, m, back, bound_b):
                break
            bound_b |= var_keys(cb)
            n += 1
        k = min(k, n)
        maps.append(m)
    for it, m in zip(others, maps):
        # keep only the renaming of variables bound by the shared prefix
        shared_b = set(bound)
        for c in it.conds[:k]:
            shared_b |= var_keys(c)
        mm = {key: v for key, v in m.items() if key in shared_b}
        # names outside the prefix are already distinct across items
        it.conds, it.body = _rename_item(it.conds, it.body, mm, set(), fresh)
    return k


def _split_key(key: str) -> tuple[str, str]:
    if key[0] in "*+":
        return key[1:], key[0]
    return key, ""


def _make_alts(items: list[_Item], bound: set[str], fresh: Fresh) -> list[Alt]:
    alts: list[Alt] = []
    i = 0
    while i < len(items):
        lead = items[i]
        j = i + 1
        if lead.conds and not _cond_nondeterministic(lead.conds[0]):
            while j < len(items) and items[j].conds:
                m = {b: Var(*_split_key(b)) for b in bound}
                back = {b: b for b in bound}
                if not _match_condition(lead.conds[0], items[j].conds[0], m, back, set(bound)):
                    break
                j += 1
        group = items[i:j]
        if len(group) == 1:
            alts.append(Alt(tuple(lead.conds), lead.body))
        else:
            k = _common_prefix(lead, group[1:], bound, fresh)
            prefix = lead.conds[:k]
            inner_bound = set(bound) | var_keys(list(prefix))
            rest = [_Item(it.conds[k:], it.body, it.label) for it in group]
            alts.append(Alt(tuple(prefix), Nested(tuple(_make_alts(rest, inner_bound, fresh)))))
        i = j
    return alts


def _merge_labels(labels: list[str]) -> str:
    first = labels[0]
    cut = first.rfind("-")
    stem = first[:cut + 1] if cut >= 0 else ""
    if stem and all(lab.startswith(stem) for lab in labels):
        return stem + "-".join(lab[len(stem):] for lab in labels)
    return "-".join(labels)


def _combine_group(rules: list[Rule]) -> Rule:
    lead = rules[0]
    fresh = Fresh(set().union(*(all_names(r) for r in rules)))
    used = all_names(lead)
    bound = var_keys(lead.lhs)
    items = [_Item(list(lead.conditions), lead.rhs, lead.label)]
    for r in rules[1:]:
        m = _lhs_renaming(lead.lhs, r.lhs)
        conds, body = _rename_item(list(r.conditions), r.rhs, m, set(used), fresh)
        items.append(_Item(conds, body, r.label))
        used |= {v.name for v in variables(conds) + variables(body)}
    k = _common_prefix(items[0], items[1:], bound, fresh)
    prefix = items[0].conds[:k]
    inner = set(bound) | var_keys(list(prefix))
    rest = [_Item(it.conds[k:], it.body, it.label) for it in items]
    body = Nested(tuple(_make_alts(rest, inner, fresh)))
    return lead.with_(label=_merge_labels([r.label for r in rules]),
                      conditions=tuple(prefix), rhs=body)


def combine_rules(u: FunctionUnit) -> FunctionUnit:
    """Merge runs of adjacent rules whose left-hand sides agree up to renaming."""
    out: list[Rule] = []
    rules = list(u.rules)
    i = 0
    changed = False
    while i < len(rules):
        r = rules[i]
        j = i + 1
        if not is_backtracking(r.lhs):
            while (j < len(rules) and rules[j].default == r.default
                   and _lhs_renaming(r.lhs, rules[j].lhs) is not None):
                j += 1
        if j - i > 1:
            out.append(_combine_group(rules[i:j]))
            changed = True
        else:
            out.append(r)
        i = j
    return u.with_rules(out) if changed else u


# -- step 8: else ------------------------------------------------------------------------

def _complementary(a: Condition, b: Condition) -> bool:
    if {a.op, b.op} != {"==", "!="}:
        return False
    return (a.lhs == b.lhs and a.rhs == b.rhs) or (a.lhs == b.rhs and a.rhs == b.lhs)


def _else_body(b):
    if not isinstance(b, Nested):
        return b
    return Nested(tuple(_else_alts(list(b.alts))))


def _else_alt(a: Alt) -> Alt:
    return Alt(a.conditions, _else_body(a.body),
               None if a.orelse is None else _else_alt(a.orelse))


def _else_alts(alts: list[Alt]) -> list[Alt]:
    alts = [_else_alt(a) for a in alts]
    out: list[Alt] = []
    i = 0
    while i < len(alts):
        a = alts[i]
        if (i + 1 < len(alts) and a.orelse is None and alts[i + 1].orelse is None
                and a.conditions and alts[i + 1].conditions
                and _complementary(a.conditions[0], alts[i + 1].conditions[0])):
            b = alts[i + 1]
            then = a.body if len(a.conditions) == 1 else Nested((Alt(a.conditions[1:], a.body),))
            out.append(Alt((a.conditions[0],), then, Alt(b.conditions[1:], b.body)))
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def introduce_else(u: FunctionUnit) -> FunctionUnit:
    rules = []
    for r in u.rules:
        rules.append(r.with_(rhs=_else_body(r.rhs)) if isinstance(r.rhs, Nested) else r)
    if all(a == b for a, b in zip(rules, u.rules)):
        return u
    return u.with_rules(rules)


# -- pipeline ------------------------------------------------------------------------------

RULE_STEPS = ("linearize", "assignments", "constructor-args", "assignment-patterns",
              "list-patterns")
UNIT_STEPS = ("combine", "else")
ALL_STEPS = RULE_STEPS + UNIT_STEPS


@dataclass
class PipelineResult:
    unit: FunctionUnit
    trace: dict[str, FunctionUnit]


def run_pipeline(u: FunctionUnit, steps: Sequence[str] = ALL_STEPS,
                 is_ctor: Callable[[str, int], bool] | None = None) -> PipelineResult:
    if is_ctor is None:
        ctors = u.constructors

        def is_ctor(name, arity):
            return name in LIST_BUILDERS or (name in BOOLEANS and arity == 0) or (name, arity) in ctors
    delayed = u.decl.delay
    trace: dict[str, FunctionUnit] = {}
    rules = [r if r.origin is not None else r.with_(origin=r.lhs) for r in u.rules]
    cur = u.with_rules(rules)
    rule_fns = {
        "linearize": lambda r: linearize(r, delayed),
        "assignments": introduce_assignments,
        "constructor-args": lambda r: eliminate_constructor_args(r, is_ctor),
        "assignment-patterns": simplify_assignment_patterns,
        "list-patterns": simplify_list_patterns,
    }
    for step in steps:
        if step in rule_fns:
            cur = cur.with_rules([rule_fns[step](r) for r in cur.rules])
        elif step == "combine":
            cur = combine_rules(cur)
        elif step == "else":
            cur = introduce_else(cur)
        else:
            raise ValueError(f"unknown step {step!r}")
        trace[step] = cur
    return PipelineResult(cur, trace)


def preprocess_rule(r: Rule, is_ctor: Callable[[str, int], bool], delayed=(),
                    upto: str = "list-patterns") -> Rule:
    """Run the per-rule steps on a single rule (used for inspection and tests)."""
    r = r if r.origin is not None else r.with_(origin=r.lhs)
    fns = [("linearize", lambda x: linearize(x, delayed)),
           ("assignments", introduce_assignments),
           ("constructor-args", lambda x: eliminate_constructor_args(x, is_ctor)),
           ("assignment-patterns", simplify_assignment_patterns),
           ("list-patterns", simplify_list_patterns)]
    for name, fn in fns:
        r = fn(r)
        if name == upto:
            break
    return r


# -- alpha normalization for comparisons ---------------------------------------------------

def alpha_normalize(r: Rule) -> Rule:
    """Rename variables to V0, V1, ... by first occurrence (lhs, conditions, body)."""
    names: dict[str, str] = {}
    for v in variables(r):
        if v.key not in names:
            names[v.key] = f"V{len(names)}"
    mapping = {k: Var(n, _split_key(k)[1]) for k, n in names.items()}
    out = substitute(r, mapping)
    return out.with_(origin=None, loc=None)


def lhs_is_renaming(a: App, b: App) -> bool:
    return _lhs_renaming(a, b) is not None


__all__ = [
    "PreprocessError", "FunctionUnit", "ConstructorUnit", "Collected", "collect_functions",
    "import_closure", "merge_decls", "constructor_predicate", "linearize",
    "introduce_assignments", "eliminate_constructor_args", "simplify_assignment_patterns",
    "hoist_list_items", "chain_list_patterns", "simplify_list_patterns", "combine_rules",
    "introduce_else", "run_pipeline", "preprocess_rule", "alpha_normalize", "is_backtracking",
    "instance_of", "ALL_STEPS",
]
