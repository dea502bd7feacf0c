from __future__ import annotations

import pytest
from helpers import CORPUS, inputs_for, program_for, runtime_normalize

from rwc.driver import BuildOptions, build_program
from rwc.plan import Call, ConstSlot, Loop, Return, node_exprs, walk_expr, walk_nodes
from rwc.postprocess import ConstTable, cache_constants, eliminate_tail_recursion, optimize
from rwc.runtime import RunConfig, Runtime, deep_call
from rwc.store import format_term

RAW = BuildOptions(tre=False, constcache=False)


def self_tail_calls(p) -> int:
    return sum(1 for n in walk_nodes(p.body)
               if isinstance(n, Return) and isinstance(n.expr, Call) and n.expr.sym == p.symbol)


def const_slots(p) -> int:
    return sum(1 for n in walk_nodes(p.body) for e in node_exprs(n)
               for x in walk_expr(e) if isinstance(x, ConstSlot))


@pytest.mark.parametrize("top", list(CORPUS))
def test_tre_removes_every_self_tail_call_or_leaves_plan_alone(top):
    for p in program_for(top, RAW).plans.values():
        q = eliminate_tail_recursion(p)
        if p.memoized or self_tail_calls(p) == 0:
            assert q == p
        else:
            assert self_tail_calls(q) == 0
            assert sum(isinstance(n, Loop) for n in walk_nodes(q.body)) == self_tail_calls(p)


PARITY = """module P
imports Nat
signature
  even(_); odd(_); yes {constructor}; no {constructor}
rules
[e-0] even(0) = yes;
[e-s] even(s(N)) = odd(N);
[o-0] odd(0) = no;
[o-s] odd(s(N)) = even(N)
"""


def test_mutual_recursion_is_not_transformed():
    prog = build_program(PARITY)
    for name in ("even", "odd"):
        assert not any(isinstance(n, Loop) for n in walk_nodes(prog.plan(name).body))
    assert format_term(Runtime(prog).run("even(s(s(s(0))))")[0]) == "no"


CONSTS = """module K
imports Nat
signature
  k(_,_) {constructor};
  g(_); h(_); c(_)
rules
[g] g(X) = k(X,plus(s(0),s(0)));
[h] h(X) = plus(s(0),s(0));
[c] c(X) = k(X,s(0))
"""


def test_constructor_only_terms_are_not_cached():
    prog = build_program(CONSTS)
    assert const_slots(prog.plan("c")) == 0


def test_same_ground_expression_shares_one_entry():
    prog = build_program(CONSTS)
    assert len(prog.constants) == 1
    assert const_slots(prog.plan("g")) == const_slots(prog.plan("h")) == 1
    rt = Runtime(prog)
    assert format_term(rt.run("g(0)")[0]) == "k(0,s(s(0)))"
    assert format_term(rt.run("h(0)")[0]) == "s(s(0))"
    assert rt.stats.const_cache_evaluations == 1 and rt.stats.const_cache_hits == 1
    assert rt.cache_log == [0]


def test_cache_log_follows_first_evaluation_order():
    text = CONSTS.replace("c(_)", "c(_); d(_)").replace(
        "[c] c(X) = k(X,s(0))", "[c] c(X) = k(X,s(0));\n[d] d(X) = times(s(s(0)),s(s(0)))")
    prog = build_program(text)
    assert len(prog.constants) == 2
    rt = Runtime(prog)
    d_slot = [x.id for n in walk_nodes(prog.plan("d").body) for e in node_exprs(n)
              for x in walk_expr(e) if isinstance(x, ConstSlot)][0]
    rt.run("d(0)")
    rt.run("g(0)")
    rt.run("d(0)")
    assert rt.cache_log == [d_slot, 1 - d_slot]


def test_delayed_arguments_stay_unevaluated():
    prog = build_program("""module L
imports Nat
signature
  pick(_)
rules
[p] pick(X) = if(X, plus(s(0),0), minus(0,s(0)))
""")
    # the branches are passed to if/3 unevaluated, so neither is cached
    assert prog.constants == []
    assert format_term(Runtime(prog).run("pick(t)")[0]) == "s(0)"


def test_optimize_report_counts_sites():
    prog = program_for("Nat", RAW)
    plans, table, report = optimize(prog.plans.values())
    assert report["tre_sites"] == sum(isinstance(n, Loop) for p in plans for n in walk_nodes(p.body))
    assert report["cached_constants"] == len(table.exprs)
    assert cache_constants(plans[0], ConstTable()) is not None


@pytest.mark.parametrize("top", list(CORPUS))
def test_optimizations_preserve_results(top):
    def go():
        plain = Runtime(program_for(top, RAW), RunConfig(memo_enabled=False))
        opt = Runtime(program_for(top), RunConfig(memo_enabled=False))
        count = 0
        for fn in sorted(plain.program.plans):
            for t in inputs_for(top, fn, 60, seed=7):
                assert runtime_normalize(plain, t) == runtime_normalize(opt, t), t
                count += 1
        return count
    assert deep_call(go) >= 60
