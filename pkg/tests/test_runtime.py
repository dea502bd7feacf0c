from __future__ import annotations

import pytest
from helpers import inputs_for, numeral, oracle_for, program_for, runtime_normalize

from rwc.driver import BuildOptions
from rwc.runtime import (DepthLimitExceeded, RunConfig, Runtime, UnknownSymbol, deep_call,
                         run_with_config)
from rwc.store import SymbolTable, TermSyntaxError, format_term


def run(top: str, text: str, **cfg) -> str:
    rt = Runtime(program_for(top), RunConfig(**cfg))
    return format_term(deep_call(rt.run, text)[0])


@pytest.mark.parametrize("query,want", [
    ("lookup(x, type-env([pair(y,int),pair(x,bool)]))", "bool"),
    ("lookup(x, type-env([pair(x,int),pair(x,bool)]))", "int"),
    ("lookup(z, type-env([pair(y,int)]))", "nil-type"),
    ("lookup(z, type-env([]))", "nil-type"),
    ("add-to(x, int, type-env([]))", "type-env([pair(x,int)])"),
    ("add-to(x, real, type-env([pair(y,int),pair(x,bool)]))",
     "type-env([pair(y,int),pair(x,real)])"),
    ("add-to(z, real, type-env([pair(y,int)]))", "type-env([pair(y,int),pair(z,real)])"),
])
def test_type_environment_examples(query, want):
    assert run("Types", query) == want


def test_set_removes_duplicates_keeping_first():
    assert run("Set", "set([a,b,a,c,b])") == "set([a,b,c])"


def test_constructor_term_is_its_own_normal_form():
    rt = Runtime(program_for("Types"))
    t = rt.parse("pair(x,type-env([pair(y,int)]))")
    assert rt.run(t)[0] is t


def test_function_without_applicable_rule_is_normal():
    assert run("Nat", "minus(0,s(0))") == "minus(0,s(0))"
    assert run("Set", "set(a)") == "set(a)"


def test_unknown_symbols():
    rt = Runtime(program_for("Nat"))
    with pytest.raises(TermSyntaxError):
        rt.parse("nosuch(0)")
    other = SymbolTable().declare("plus", 2, False)
    zero = rt.parse("0")
    with pytest.raises(UnknownSymbol):
        rt.run(rt.store.make_app(other, [zero, zero]))


def test_depth_limit_without_tre_and_tail_loop_with_it():
    q = f"countdown({numeral(500)})"
    with pytest.raises(DepthLimitExceeded):
        run_with_config(program_for("Nat", BuildOptions(tre=False)), q, RunConfig(depth_limit=100))
    r, st, _ = run_with_config(program_for("Nat"), q, RunConfig(depth_limit=100))
    assert format_term(r) == "done" and st.max_frame_depth <= 2


def test_condition_failure_falls_back_to_later_rules():
    assert run("Nat", "eq(s(0),s(0))") == "t"
    assert run("Nat", "eq(s(0),0)") == "f"
    assert run("Nat", "max(s(0),s(s(0)))") == numeral(2)


def test_plans_only_see_normal_forms():
    prog = program_for("Nat")
    bad = []

    def trace(ident, args):
        delayed = prog.plans[ident].delay
        bad.extend((ident, i) for i, a in enumerate(args) if i not in delayed and not a.nf)
    rt = Runtime(prog, RunConfig(trace=trace))
    rt.run(f"max(plus({numeral(2)},{numeral(3)}),times({numeral(2)},{numeral(2)}))")
    assert bad == []


@pytest.mark.parametrize("top", ["Nat", "Types", "Set", "Evalsym"])
def test_sharing_off_gives_the_same_results(top):
    def go():
        on = Runtime(program_for(top), RunConfig(sharing=True))
        off = Runtime(program_for(top), RunConfig(sharing=False))
        oracle = oracle_for(top)
        for fn in sorted(on.program.plans):
            for t in inputs_for(top, fn, 40, seed=3):
                a, b = runtime_normalize(on, t), runtime_normalize(off, t)
                assert a == b == oracle.normalize(t), t
    deep_call(go)


def test_runs_are_deterministic():
    q = f"evalsym({numeral(9)})"
    outs = set()
    for _ in range(3):
        r, st, _ = run_with_config(program_for("Evalsym"), q)
        outs.add((format_term(r), st.rule_applications, st.plan_calls))
    assert len(outs) == 1
    assert run("Evalsym", q) == numeral(pow(2, 9, 17))


@pytest.mark.parametrize("bench", ["Evalsym", "Evalexp", "Evaltree"])
def test_stats_invariants(bench):
    q = f"{bench.lower()}({numeral(8)})"
    _, on, _ = run_with_config(program_for(bench), q, RunConfig(sharing=True))
    _, off, _ = run_with_config(program_for(bench), q, RunConfig(sharing=False))
    for st in (on, off):
        assert st.memo_hits <= st.plan_calls
        assert st.peak_unique_nodes <= st.peak_total_nodes
    assert on.peak_unique_nodes <= off.peak_unique_nodes
    assert off.memo_hits == 0
    assert off.memo_disabled == any(p.memoized for p in program_for(bench).plans.values())


def test_collect_between_runs_keeps_caches_valid():
    rt = Runtime(program_for("Evaltree"))
    q = f"evaltree({numeral(6)})"
    first = format_term(rt.run(q)[0])
    rt.store.collect()
    assert format_term(rt.run(q)[0]) == first
    assert rt.stats.memo_hits >= 1
