"""Specificity order on left-hand sides.

A left-hand side ``p`` is more specific than ``q`` when every term matched by
``p`` is also matched by ``q`` but not conversely, i.e. ``p`` is a proper
instance of ``q``.  Incomparable pairs keep their textual order and default
rules go last.
"""

from __future__ import annotations

from typing import Callable, Sequence

from .lang.ast import App, Var, flatten_list, is_list_pattern


def instance_of(p, q) -> bool:
    """Whether pattern ``q`` matches pattern ``p`` with ``p``'s variables held opaque."""
    return _match(q, p, {})


def _match(q, p, env: dict) -> bool:
    if isinstance(q, Var) and not q.is_list:
        if isinstance(p, Var) and p.is_list:
            return False
        if q.key in env:
            return env[q.key] == p
        env[q.key] = p
        return True
    if isinstance(q, App) and is_list_pattern(q):
        if not (isinstance(p, Var) and p.is_list) and not (isinstance(p, App) and is_list_pattern(p)):
            return False
        return _match_items(flatten_list(q), 0, _items(p), 0, env)
    if isinstance(q, Var):
        # a list variable outside a list pattern cannot occur after parsing
        return False
    if not isinstance(p, App) or p.name != q.name or len(p.args) != len(q.args):
        return False
    for qa, pa in zip(q.args, p.args):
        if not _match(qa, pa, env):
            return False
    return True


def _items(p) -> list:
    if isinstance(p, Var):
        return [p]
    return flatten_list(p)


def _can_be_empty(slice_items) -> bool:
    return all(isinstance(x, Var) and x.kind == "*" for x in slice_items)


def _match_items(qs: list, i: int, ps: list, j: int, env: dict) -> bool:
    if i == len(qs):
        return j == len(ps)
    q = qs[i]
    if isinstance(q, Var) and q.is_list:
        if q.key in env:
            bound = env[q.key]
            k = j + len(bound)
            if tuple(ps[j:k]) == bound:
                return _match_items(qs, i + 1, ps, k, env)
            return False
        for k in range(j, len(ps) + 1):
            chunk = tuple(ps[j:k])
            if q.kind == "+" and _can_be_empty(chunk):
                continue
            trial = dict(env)
            trial[q.key] = chunk
            if _match_items(qs, i + 1, ps, k, trial):
                env.update(trial)
                return True
        return False
    if j >= len(ps):
        return False
    p = ps[j]
    if isinstance(p, Var) and p.is_list:
        return False
    trial = dict(env)
    if _match(q, p, trial) and _match_items(qs, i + 1, ps, j + 1, trial):
        env.update(trial)
        return True
    return False


def more_specific(p, q) -> bool:
    return instance_of(p, q) and not instance_of(q, p)


def specificity_order(items: Sequence, lhs: Callable = None, default: Callable = None) -> list:
    """Stable linear extension of the specificity order; defaults last.

    Repeatedly emits the textually first remaining item that no other
    remaining item strictly dominates.
    """
    lhs = lhs or (lambda r: r.origin if getattr(r, "origin", None) is not None else r.lhs)
    default = default or (lambda r: r.default)
    ordinary = [x for x in items if not default(x)]
    defaults = [x for x in items if default(x)]
    return _stable_topo(ordinary, lhs) + _stable_topo(defaults, lhs)


def _stable_topo(items: list, lhs: Callable) -> list:
    pats = [lhs(x) for x in items]
    n = len(items)
    beats = [[more_specific(pats[a], pats[b]) for b in range(n)] for a in range(n)]
    remaining = list(range(n))
    out = []
    while remaining:
        for idx in remaining:
            if not any(beats[o][idx] for o in remaining if o != idx):
                out.append(items[idx])
                remaining.remove(idx)
                break
        else:  # pragma: no cover - a strict order has no cycles
            out.extend(items[i] for i in remaining)
            break
    return out


def duplicate_pairs(rules: Sequence) -> list[tuple]:
    """Pairs of unconditional rules whose left-hand sides are equal up to renaming."""
    out = []
    for a in range(len(rules)):
        for b in range(a + 1, len(rules)):
            ra, rb = rules[a], rules[b]
            if ra.conditions or rb.conditions or ra.default != rb.default:
                continue
            pa = ra.origin if ra.origin is not None else ra.lhs
            pb = rb.origin if rb.origin is not None else rb.lhs
            if instance_of(pa, pb) and instance_of(pb, pa):
                out.append((ra, rb))
    return out
