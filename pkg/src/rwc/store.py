"""Maximally shared, immutable term storage.

Every term lives in a store.  The shared store hash-conses: a request for
an application whose symbol and argument identities already exist returns
the existing node, so structural equality collapses to an identity test.
The unshared store builds a fresh node on every request and compares
structurally; it exists only to measure what sharing buys.

Lists are cons chains ending in a unique empty-list node, so tails and
slices share suffixes with the list they came from.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence


class StoreError(Exception):
    pass


class ConstructionError(StoreError):
    pass


class EmptyListError(StoreError):
    pass


class SliceRangeError(StoreError):
    pass


class NodeBudgetExceeded(StoreError):
    """Raised when a store grows past its configured node budget."""


class Symbol:
    """A function or constructor name with fixed arity.

    Symbols compare by identity; a :class:`SymbolTable` hands out one object
    per ``(name, arity)``.
    """

    __slots__ = ("name", "arity", "constructor", "memo", "delay", "builtin")

    def __init__(self, name: str, arity: int, constructor: bool = False,
                 memo: bool = False, delay: Iterable[int] = (), builtin: bool = False):
        self.name = name
        self.arity = arity
        self.constructor = constructor
        self.memo = memo
        self.delay = frozenset(delay)
        self.builtin = builtin

    @property
    def ident(self) -> str:
        return f"{self.name}/{self.arity}"

    def __repr__(self):
        return f"Symbol({self.ident})"

    # identity semantics; pickling keeps attributes
    def __reduce__(self):
        return (Symbol, (self.name, self.arity, self.constructor, self.memo,
                         tuple(sorted(self.delay)), self.builtin))


# List cells and the empty list are ordinary nodes over two reserved symbols.
CONS = Symbol("[|]", 2, constructor=True, builtin=True)
NIL = Symbol("[]", 0, constructor=True, builtin=True)
TRUE = Symbol("t", 0, constructor=True, builtin=True)
FALSE = Symbol("f", 0, constructor=True, builtin=True)

BUILTIN_SYMBOLS = {s.ident: s for s in (CONS, NIL, TRUE, FALSE)}


class SymbolTable:
    """One :class:`Symbol` per ``(name, arity)`` within a program."""

    def __init__(self):
        self._by_ident: dict[tuple[str, int], Symbol] = {
            ("t", 0): TRUE, ("f", 0): FALSE}

    def declare(self, name: str, arity: int, constructor: bool = False,
                memo: bool = False, delay: Iterable[int] = ()) -> Symbol:
        key = (name, arity)
        sym = self._by_ident.get(key)
        if sym is None:
            sym = Symbol(name, arity, constructor, memo, delay)
            self._by_ident[key] = sym
        else:
            sym.constructor = sym.constructor or constructor
            sym.memo = sym.memo or memo
            sym.delay = sym.delay | frozenset(delay)
        return sym

    def get(self, name: str, arity: int) -> Symbol | None:
        return self._by_ident.get((name, arity))

    def __getitem__(self, key: tuple[str, int]) -> Symbol:
        return self._by_ident[key]

    def __contains__(self, key) -> bool:
        return key in self._by_ident

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self._by_ident.values())

    def __len__(self):
        return len(self._by_ident)


class Term:
    """An immutable node: an application, a list cell, or the empty list.

    ``nf`` caches the fact that the node is known to be a normal form; it is
    a property of the term's structure, so setting it never changes meaning.
    """

    __slots__ = ("sym", "args", "nf", "alive")

    def __init__(self, sym: Symbol, args: tuple):
        self.sym = sym
        self.args = args
        self.nf = False
        self.alive = True

    @property
    def kind(self) -> str:
        if self.sym is CONS:
            return "ListNode"
        if self.sym is NIL:
            return "EmptyList"
        return "Application"

    @property
    def is_list(self) -> bool:
        return self.sym is CONS or self.sym is NIL

    @property
    def head(self) -> "Term":
        return self.args[0]

    @property
    def tail(self) -> "Term":
        return self.args[1]

    def __repr__(self):
        text = format_term(self)
        return text if len(text) < 200 else text[:197] + "..."


@dataclass
class StoreStats:
    unique_nodes: int = 0
    construction_requests: int = 0
    interning_hits: int = 0
    table_capacity: int = 0
    peak_unique_nodes: int = 0
    rehashes: int = 0
    reclaimed: int = 0
    unregister_warnings: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


INITIAL_CAPACITY = 1024
MAX_LOAD = 0.75


class TermStore:
    """The interning store.  ``shared`` stores guarantee one node per term."""

    shared = True

    def __init__(self, node_budget: int | None = None):
        self._table: dict[tuple, Term] = {}
        self.stats = StoreStats(table_capacity=INITIAL_CAPACITY)
        self.node_budget = node_budget
        self._grow_at = int(INITIAL_CAPACITY * MAX_LOAD)
        self._roots: dict[int, Term] = {}
        self._root_ids = itertools.count(1)
        self._root_providers: list[Callable[[], Iterable[Term]]] = []
        self._nil = self._intern(NIL, ())

    # -- construction -------------------------------------------------------

    def _intern(self, sym: Symbol, args: tuple) -> Term:
        key = (sym,) + args
        st = self.stats
        st.construction_requests += 1
        t = self._table.get(key)
        if t is not None:
            st.interning_hits += 1
            return t
        t = Term(sym, args)
        table = self._table
        table[key] = t
        n = len(table)
        if n > st.peak_unique_nodes:
            st.peak_unique_nodes = n
            if n > self._grow_at:
                # logical table growth; the dict rehashes on its own schedule
                st.table_capacity *= 2
                st.rehashes += 1
                self._grow_at = int(st.table_capacity * MAX_LOAD)
            if self.node_budget is not None and n > self.node_budget:
                raise NodeBudgetExceeded(f"{n} nodes exceed budget {self.node_budget}")
        return t

    def make_app(self, sym: Symbol, args: Sequence[Term] = ()) -> Term:
        args = tuple(args)
        if len(args) != sym.arity:
            raise ConstructionError(
                f"{sym.name} expects {sym.arity} argument(s), got {len(args)}")
        return self._intern(sym, args)

    def cons(self, head: Term, tail: Term) -> Term:
        return self._intern(CONS, (head, tail))

    # -- equality -----------------------------------------------------------

    @staticmethod
    def term_equal(t1: Term, t2: Term) -> bool:
        return t1 is t2

    # -- lists --------------------------------------------------------------

    def null(self) -> Term:
        return self._nil

    def is_null(self, t: Term) -> bool:
        return t.sym is NIL

    def make_list(self, t: Term) -> Term:
        return self.cons(t, self.null())

    def from_elements(self, elems: Sequence[Term], tail: Term | None = None) -> Term:
        lst = self.null() if tail is None else tail
        cons = self.cons
        for e in reversed(elems):
            lst = cons(e, lst)
        return lst

    def conc(self, l1: Term, l2: Term) -> Term:
        """Prepend the elements of ``l1`` onto ``l2``; neither is modified."""
        _require_list(l1)
        _require_list(l2)
        if l1.sym is NIL:
            return l2
        if l2.sym is NIL:
            return l1
        return self.from_elements(list(iter_list(l1)), l2)

    @staticmethod
    def list_head(l: Term) -> Term:
        if l.sym is not CONS:
            raise EmptyListError("list_head of empty list")
        return l.args[0]

    @staticmethod
    def list_tail(l: Term) -> Term:
        if l.sym is not CONS:
            raise EmptyListError("list_tail of empty list")
        return l.args[1]

    @staticmethod
    def list_last(l: Term) -> Term:
        if l.sym is not CONS:
            raise EmptyListError("list_last of empty list")
        while l.args[1].sym is CONS:
            l = l.args[1]
        return l.args[0]

    def list_prefix(self, l: Term) -> Term:
        if l.sym is not CONS:
            raise EmptyListError("list_prefix of empty list")
        elems = list(iter_list(l))
        return self.from_elements(elems[:-1])

    @staticmethod
    def not_empty_list(l: Term) -> bool:
        return l.sym is CONS

    @staticmethod
    def is_single_element(l: Term) -> bool:
        return l.sym is CONS and l.args[1].sym is NIL

    def slice(self, p1: Term, p2: Term) -> Term:
        """Elements from cursor ``p1`` up to (excluding) cursor ``p2``."""
        elems = []
        cur = p1
        while cur is not p2:
            if cur.sym is not CONS:
                raise SliceRangeError("end cursor not reachable from begin cursor")
            elems.append(cur.args[0])
            cur = cur.args[1]
        return self.from_elements(elems)

    # -- roots and reclamation ---------------------------------------------

    def register_root(self, t: Term) -> int:
        handle = next(self._root_ids)
        self._roots[handle] = t
        return handle

    def unregister_root(self, handle: int) -> None:
        if self._roots.pop(handle, None) is None:
            self.stats.unregister_warnings += 1

    def add_root_provider(self, provider: Callable[[], Iterable[Term]]) -> None:
        """Register a callable yielding extra roots (memo tables, constant caches)."""
        self._root_providers.append(provider)

    def collect(self) -> int:
        """Drop every node unreachable from the roots; return how many."""
        marked: set[int] = set()
        stack = [self._nil]
        stack.extend(self._roots.values())
        for provider in self._root_providers:
            stack.extend(provider())
        while stack:
            t = stack.pop()
            if id(t) in marked:
                continue
            marked.add(id(t))
            stack.extend(t.args)
        dead = [k for k, t in self._table.items() if id(t) not in marked]
        for k in dead:
            self._table.pop(k).alive = False
        self.stats.reclaimed += len(dead)
        return len(dead)

    def is_live(self, t: Term) -> bool:
        return t.alive and self._table.get((t.sym,) + t.args) is t

    def __len__(self):
        return len(self._table)

    def __iter__(self) -> Iterator[Term]:
        return iter(list(self._table.values()))

    @property
    def unique_nodes(self) -> int:
        return len(self._table)

    def snapshot_stats(self) -> StoreStats:
        st = self.stats
        st.unique_nodes = len(self._table)
        return StoreStats(**st.__dict__)


class UnsharedStore(TermStore):
    """Builds a fresh node per request; ``term_equal`` walks both terms."""

    shared = False

    def __init__(self, node_budget: int | None = None):
        self.stats = StoreStats(table_capacity=0)
        self.node_budget = node_budget
        self._roots = {}
        self._root_ids = itertools.count(1)
        self._root_providers = []
        self._table = {}

    def _intern(self, sym: Symbol, args: tuple) -> Term:
        st = self.stats
        n = st.construction_requests = st.construction_requests + 1
        if self.node_budget is not None and n > self.node_budget:
            raise NodeBudgetExceeded(f"{n} nodes exceed budget {self.node_budget}")
        return Term(sym, args)

    def null(self) -> Term:
        return self._intern(NIL, ())

    @staticmethod
    def term_equal(t1: Term, t2: Term) -> bool:
        return structural_equal(t1, t2)

    def collect(self) -> int:
        # nodes are owned by the host allocator; nothing is tabled
        return 0

    def is_live(self, t: Term) -> bool:
        return t.alive

    @property
    def unique_nodes(self) -> int:
        return self.stats.construction_requests

    def snapshot_stats(self) -> StoreStats:
        st = self.stats
        st.unique_nodes = st.construction_requests
        st.peak_unique_nodes = st.construction_requests
        return StoreStats(**st.__dict__)


def _require_list(t: Term) -> None:
    if t.sym is not CONS and t.sym is not NIL:
        raise StoreError(f"not a list: {format_term(t)}")


def iter_list(l: Term) -> Iterator[Term]:
    while l.sym is CONS:
        yield l.args[0]
        l = l.args[1]


def list_length(l: Term) -> int:
    n = 0
    while l.sym is CONS:
        n += 1
        l = l.args[1]
    return n


def structural_equal(t1: Term, t2: Term) -> bool:
    """Node-by-node comparison; iterative so deep terms are fine."""
    stack = [(t1, t2)]
    pop = stack.pop
    push = stack.append
    while stack:
        a, b = pop()
        if a is b:
            continue
        if a.sym is not b.sym:
            return False
        for x, y in zip(a.args, b.args):
            push((x, y))
    return True


def term_size(t: Term) -> int:
    """Number of nodes in the tree unfolding of ``t``."""
    n = 0
    stack = [t]
    while stack:
        x = stack.pop()
        n += 1
        stack.extend(x.args)
    return n


def dag_size(t: Term) -> int:
    seen: set[int] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        stack.extend(x.args)
    return len(seen)


# -- textual syntax ----------------------------------------------------------

def format_term(t: Term) -> str:
    """``f(t1,...,tn)``, bare constants, lists as ``[t1,...,tn]``."""
    out: list[str] = []
    # stack of pending work: Term to print or literal string
    stack: list = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, str):
            out.append(x)
            continue
        sym = x.sym
        if sym is CONS or sym is NIL:
            elems = list(iter_list(x))
            stack.append("]")
            for i in range(len(elems) - 1, -1, -1):
                stack.append(elems[i])
                if i:
                    stack.append(",")
            stack.append("[")
        elif not x.args:
            out.append(sym.name)
        else:
            stack.append(")")
            for i in range(len(x.args) - 1, -1, -1):
                stack.append(x.args[i])
                if i:
                    stack.append(",")
            stack.append(sym.name + "(")
    return "".join(out)


class TermSyntaxError(ValueError):
    pass


_PUNCT = "()[],"


def _tokenize_term(text: str) -> list[tuple[str, int]]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in _PUNCT:
            toks.append((c, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in _PUNCT:
                j += 1
            toks.append((text[i:j], i))
            i = j
    return toks


def parse_term(text: str, resolve: Callable[[str, int], Symbol], store: TermStore) -> Term:
    """Parse the textual term syntax into ``store``.

    ``resolve(name, arity)`` maps names to symbols and raises ``KeyError`` for
    unknown ones.  ``conc``/``list``/``null`` are accepted as list builders.
    """
    toks = _tokenize_term(text)
    pos = 0

    def peek():
        return toks[pos][0] if pos < len(toks) else None

    def expect(tok):
        nonlocal pos
        if peek() != tok:
            where = toks[pos][1] if pos < len(toks) else len(text)
            raise TermSyntaxError(f"expected {tok!r} at offset {where}")
        pos += 1

    # explicit stack so very deep inputs parse
    def parse() -> Term:
        nonlocal pos
        # frames: [kind, name, items]
        frames: list[list] = []
        value = None
        while True:
            if value is None:
                tok = peek()
                if tok is None:
                    raise TermSyntaxError("unexpected end of term")
                if tok == "[":
                    pos += 1
                    if peek() == "]":
                        pos += 1
                        value = store.null()
                    else:
                        frames.append(["list", None, []])
                        continue
                elif tok in _PUNCT:
                    raise TermSyntaxError(f"unexpected {tok!r} at offset {toks[pos][1]}")
                else:
                    pos += 1
                    if peek() == "(":
                        pos += 1
                        frames.append(["app", tok, []])
                        continue
                    value = _leaf(tok)
            if not frames:
                return value
            frame = frames[-1]
            frame[2].append(value)
            value = None
            tok = peek()
            if tok == ",":
                pos += 1
                continue
            closer = "]" if frame[0] == "list" else ")"
            expect(closer)
            frames.pop()
            value = _close(frame)

    def _leaf(name: str) -> Term:
        if name == "null":
            return store.null()
        try:
            return store.make_app(resolve(name, 0), ())
        except KeyError:
            raise TermSyntaxError(f"unknown constant {name!r}") from None

    def _close(frame) -> Term:
        kind, name, items = frame
        if kind == "list":
            return store.from_elements(items)
        if name == "list" and len(items) == 1:
            return store.make_list(items[0])
        if name == "conc" and len(items) == 2:
            a, b = items
            a = a if a.is_list else store.make_list(a)
            b = b if b.is_list else store.make_list(b)
            return store.conc(a, b)
        try:
            sym = resolve(name, len(items))
        except KeyError:
            raise TermSyntaxError(f"unknown symbol {name}/{len(items)}") from None
        return store.make_app(sym, items)

    result = parse()
    if pos != len(toks):
        raise TermSyntaxError(f"trailing input at offset {toks[pos][1]}")
    return result
