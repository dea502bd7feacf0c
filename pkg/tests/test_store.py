from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwc.store import (ConstructionError, EmptyListError, NodeBudgetExceeded, SliceRangeError,
                       StoreError, SymbolTable, TermStore, TermSyntaxError, UnsharedStore,
                       dag_size, format_term, iter_list, list_length, parse_term,
                       structural_equal, term_size)

SYMS = SymbolTable()
A = SYMS.declare("a", 0, True)
B = SYMS.declare("b", 0, True)
F = SYMS.declare("f", 1, True)
G = SYMS.declare("g", 2, True)


def resolve(name, arity):
    s = SYMS.get(name, arity)
    if s is None:
        raise KeyError(name)
    return s


# a term "shape" independent of any store: nested tuples / lists of shapes
shapes = st.recursive(
    st.sampled_from([("a",), ("b",)]),
    lambda kids: st.one_of(
        st.tuples(st.just("f"), kids),
        st.tuples(st.just("g"), kids, kids),
        st.lists(kids, max_size=4).map(lambda xs: ("[]",) + tuple(xs))),
    max_leaves=20)


def build(store, shape):
    if shape[0] == "[]":
        return store.from_elements([build(store, s) for s in shape[1:]])
    sym = resolve(shape[0], len(shape) - 1)
    return store.make_app(sym, [build(store, s) for s in shape[1:]])


def serial(shape) -> str:
    if shape[0] == "[]":
        return "[" + ",".join(serial(s) for s in shape[1:]) + "]"
    if len(shape) == 1:
        return shape[0]
    return shape[0] + "(" + ",".join(serial(s) for s in shape[1:]) + ")"


def cells(shape):
    """Serialized subterms of a shape, counting list cells like the store does."""
    out = set()
    if shape[0] == "[]":
        items = shape[1:]
        out.add("[]")
        for i in range(len(items)):
            out.add("cell:" + serial(("[]",) + items[i:]))
        for s in items:
            out |= cells(s)
        return out
    out.add(serial(shape))
    for s in shape[1:]:
        out |= cells(s)
    return out


# -- construction and interning ------------------------------------------------------------

def test_make_app_interns():
    s = TermStore()
    a = s.make_app(A)
    assert s.make_app(F, [a]) is s.make_app(F, [a])


def test_make_app_arity_mismatch_names_symbol():
    s = TermStore()
    with pytest.raises(ConstructionError, match="g"):
        s.make_app(G, [s.make_app(A)])


def test_binary_tree_shares_one_node_per_level():
    s = TermStore()
    before = s.unique_nodes
    t = s.make_app(A)
    d = 12
    for _ in range(d):
        t = s.make_app(G, [t, t])
    assert s.unique_nodes - before == d + 1
    assert term_size(t) == 2 ** (d + 1) - 1
    assert dag_size(t) == d + 1


@settings(max_examples=200, deadline=None)
@given(st.lists(shapes, min_size=1, max_size=8))
def test_unique_nodes_equals_distinct_subterms(terms):
    s = TermStore()
    base = s.unique_nodes  # the empty list
    for sh in terms:
        build(s, sh)
    distinct = set().union(*(cells(sh) for sh in terms)) - {"[]"}
    assert s.unique_nodes - base == len(distinct)
    st_ = s.snapshot_stats()
    assert st_.interning_hits <= st_.construction_requests
    assert st_.unique_nodes == st_.construction_requests - st_.interning_hits


@settings(max_examples=300, deadline=None)
@given(shapes, shapes)
def test_term_equal_iff_structural(x, y):
    s = TermStore()
    tx, ty = build(s, x), build(s, y)
    assert s.term_equal(tx, ty) == (serial(x) == serial(y))
    assert s.term_equal(tx, ty) == structural_equal(tx, ty)


def test_term_equal_agrees_with_structural_oracle_on_10000_pairs():
    rng = random.Random(3)

    def rand(d):
        if d == 0 or rng.random() < 0.3:
            return (rng.choice("ab"),)
        if rng.random() < 0.5:
            return ("f", rand(d - 1))
        return ("g", rand(d - 1), rand(d - 1))

    s = TermStore()
    u = UnsharedStore()
    for _ in range(10_000):
        x, y = rand(6), rand(6)
        same = serial(x) == serial(y)
        assert s.term_equal(build(s, x), build(s, y)) == same
        assert u.term_equal(build(u, x), build(u, y)) == same


def test_unshared_store_builds_fresh_nodes():
    u = UnsharedStore()
    x, y = u.make_app(F, [u.make_app(A)]), u.make_app(F, [u.make_app(A)])
    assert x is not y and u.term_equal(x, y)
    assert u.stats.construction_requests == 4
    assert u.collect() == 0


def test_node_budget():
    s = TermStore(node_budget=5)
    t = s.make_app(A)
    with pytest.raises(NodeBudgetExceeded):
        for _ in range(10):
            t = s.make_app(F, [t])


# -- lists -------------------------------------------------------------------------------

def elems(s, *names):
    return [s.make_app(resolve(n, 0)) for n in names]


def test_conc_identity_and_associativity():
    s = TermStore()
    a, b = elems(s, "a", "b")
    l = s.from_elements([a, b])
    assert s.conc(s.null(), l) is l
    assert s.conc(l, s.null()) is l
    la, lb, lc = s.make_list(a), s.make_list(b), s.from_elements([a, a])
    assert s.conc(s.conc(la, lb), lc) is s.conc(la, s.conc(lb, lc))


def test_slice_and_accessors():
    s = TermStore()
    x, y, z = elems(s, "a", "b", "a")
    l = s.from_elements([x, y, z])
    after_y = s.list_tail(s.list_tail(l))
    assert list(iter_list(s.slice(l, after_y))) == [x, y]
    assert s.list_head(l) is x
    assert s.list_last(l) is z
    assert list(iter_list(s.list_prefix(l))) == [x, y]
    assert s.not_empty_list(l) and not s.not_empty_list(s.null())
    assert s.is_single_element(s.make_list(x)) and not s.is_single_element(l)


def test_list_errors():
    s = TermStore()
    e = s.null()
    for op in (s.list_head, s.list_tail, s.list_last, s.list_prefix):
        with pytest.raises(EmptyListError):
            op(e)
    a, b = elems(s, "a", "b")
    l1, l2 = s.from_elements([a]), s.from_elements([b])
    with pytest.raises(SliceRangeError):
        s.slice(l1, l2)
    with pytest.raises(StoreError):
        s.conc(a, l1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("ab"), max_size=8), st.lists(st.sampled_from("ab"), max_size=8),
       st.integers(min_value=0, max_value=8))
def test_list_laws(xs, ys, k):
    s = TermStore()
    l1, l2 = s.from_elements(elems(s, *xs)), s.from_elements(elems(s, *ys))
    before = {id(t): (t.sym, t.args) for t in s}
    c = s.conc(l1, l2)
    assert list_length(c) == len(xs) + len(ys)
    # slice then conc with the suffix gives back the list itself
    k = min(k, len(xs))
    p = l1
    for _ in range(k):
        p = s.list_tail(p)
    assert s.conc(s.slice(l1, p), p) is l1
    # nothing that existed before was touched
    assert all((t.sym, t.args) == before[id(t)] for t in s if id(t) in before)


# -- roots and reclamation ------------------------------------------------------------------

def test_rooted_terms_survive_collect():
    s = TermStore()
    t = s.make_app(G, [s.make_app(A), s.make_app(F, [s.make_app(B)])])
    h = s.register_root(t)
    assert s.collect() == 0
    assert s.is_live(t) and s.term_equal(t, t)
    s.unregister_root(h)
    assert s.collect() == 4
    assert not s.is_live(t)
    # rebuilding a reclaimed term yields a valid, interned node
    t2 = s.make_app(G, [s.make_app(A), s.make_app(F, [s.make_app(B)])])
    assert s.is_live(t2) and t2 is not t


def test_thousand_transients_reclaimed():
    s = TermStore()
    t = s.make_app(A)
    for _ in range(999):
        t = s.make_app(F, [t])
    assert s.collect() == 1000


def test_double_unregister_is_counted_noop():
    s = TermStore()
    h = s.register_root(s.make_app(A))
    s.unregister_root(h)
    s.unregister_root(h)
    assert s.stats.unregister_warnings == 1


def test_root_provider_keeps_terms():
    s = TermStore()
    t = s.make_app(F, [s.make_app(A)])
    s.add_root_provider(lambda: [t])
    assert s.collect() == 0 and s.is_live(t)


# -- text -------------------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(shapes)
def test_parse_format_round_trip(sh):
    s = TermStore()
    t = build(s, sh)
    text = format_term(t)
    assert text == serial(sh)
    assert parse_term(text, resolve, s) is t


def test_parse_list_builders_and_errors():
    s = TermStore()
    t = parse_term("conc(a, [b, a])", resolve, s)
    assert format_term(t) == "[a,b,a]"
    assert parse_term("list(a)", resolve, s) is parse_term("[a]", resolve, s)
    assert parse_term("null", resolve, s) is s.null()
    for bad in ("f(a", "f(a))", "zz", "f(a,b)", ""):
        with pytest.raises(TermSyntaxError):
            parse_term(bad, resolve, s)


def test_deep_terms_parse_and_print():
    s = TermStore()
    text = "f(" * 50_000 + "a" + ")" * 50_000
    t = parse_term(text, resolve, s)
    assert format_term(t) == text
