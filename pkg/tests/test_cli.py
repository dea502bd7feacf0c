from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from rwc.cli import (ARTIFACT_VERSION, EXIT_COMPILE, EXIT_LINK, EXIT_PARSE, EXIT_RESOURCE, MAGIC,
                     main, read_artifact)
from rwc.driver import corpus_dir, corpus_text


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def te(tmp_path):
    p = tmp_path / "Type-environment.masf"
    p.write_text(corpus_text("Type-environment"))
    q = tmp_path / "Types.masf"
    q.write_text(corpus_text("Types"))
    return tmp_path


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


def test_compile_then_run(runner, te):
    out = te / "prog.rwc"
    r = invoke(runner, "compile", te / "Types.masf", te / "Type-environment.masf", "-o", out)
    assert r.exit_code == 0, r.output
    assert "recompiled lookup/2" in r.output and "recompiled add-to/3" in r.output
    assert "constructors " in r.output
    assert read_artifact(out).main == "Types"
    r = invoke(runner, "run", out, "lookup(x, type-env([pair(y,real),pair(x,int)]))")
    assert r.exit_code == 0 and r.output.strip() == "int"


def test_recompile_reuses_unchanged_units(runner, te):
    out = te / "prog.rwc"
    files = [te / "Types.masf", te / "Type-environment.masf"]
    invoke(runner, "compile", *files, "-o", out)
    r = invoke(runner, "compile", *files, "-o", out)
    assert "recompiled" not in r.output
    assert r.output.count("cached ") == 2
    src = te / "Type-environment.masf"
    src.write_text(src.read_text().replace("= type-env(list(pair(Id,Type)))",
                                           "= type-env(conc(list(pair(Id,Type)),null))"))
    r = invoke(runner, "compile", *files, "-o", out)
    lines = [x for x in r.output.splitlines() if x.startswith(("cached", "recompiled"))]
    assert sorted(lines) == ["cached lookup/2", "recompiled add-to/3"]


def test_run_source_file_directly(runner):
    r = invoke(runner, "run", corpus_dir() / "Set.masf", "set([a,b,a])")
    assert r.exit_code == 0 and r.output.strip() == "set([a,b])"


def test_run_stats(runner):
    r = invoke(runner, "run", corpus_dir() / "Evaltree.masf", "evaltree(s(s(s(0))))", "--stats")
    assert r.exit_code == 0
    lines = r.output.splitlines()
    assert lines[0] == "s(s(s(s(s(s(s(s(0))))))))"
    kv = dict(x.split("=", 1) for x in lines[1:-1])
    data = json.loads(lines[-1])
    for key in ("rule_applications", "memo_hits", "peak_unique_nodes", "wall_time",
                "opt_tre_sites", "opt_cached_constants"):
        assert key in kv and key in data
    assert int(kv["memo_hits"]) == data["memo_hits"]


def test_no_sharing_disables_memo(runner):
    r = invoke(runner, "run", corpus_dir() / "Evaltree.masf", "evaltree(s(0))", "--no-sharing",
               "--stats")
    assert r.exit_code == 0 and json.loads(r.output.splitlines()[-1])["memo_disabled"] is True


def test_exit_codes(runner, tmp_path):
    bad = tmp_path / "Bad.masf"
    bad.write_text("module Bad\nsignature\n  f(_)\nrules\n[r] f(X = X\n")
    assert runner.invoke(main, ["compile", str(bad)]).exit_code == EXIT_PARSE
    unbound = tmp_path / "Unb.masf"
    unbound.write_text("module Unb\nsignature\n  a {constructor}; f(_)\nrules\n[r] f(X) = Y\n")
    assert runner.invoke(main, ["compile", str(unbound)]).exit_code == EXIT_COMPILE
    nat = str(corpus_dir() / "Nat.masf")
    r = runner.invoke(main, ["run", nat, "countdown(s(s(s(0))))", "--no-tre",
                             "--depth-limit", "2"])
    assert r.exit_code == EXIT_RESOURCE
    assert runner.invoke(main, ["run", nat, "plus(0"]).exit_code == EXIT_PARSE
    assert runner.invoke(main, ["run", nat, "nosuch(0)"]).exit_code == EXIT_PARSE


def test_stale_artifact_is_a_link_failure(runner, te):
    out = te / "prog.rwc"
    invoke(runner, "compile", te / "Types.masf", te / "Type-environment.masf", "-o", out)
    data = out.read_bytes()
    out.write_bytes(MAGIC + (ARTIFACT_VERSION + 1).to_bytes(4, "little") + data[len(MAGIC) + 4:])
    r = runner.invoke(main, ["run", str(out), "lookup(x, type-env([]))"])
    assert r.exit_code == EXIT_LINK and "version" in r.output


def test_unresolved_import_fails(runner, tmp_path):
    p = tmp_path / "Lonely.masf"
    p.write_text("module Lonely\nimports Missing\nsignature\nrules\n")
    r = runner.invoke(main, ["compile", str(p)])
    assert r.exit_code != 0 and "Missing" in r.output


def test_emit_plan_and_preprocessed_rules(runner, te, tmp_path):
    plans, pre = tmp_path / "plans", tmp_path / "pre"
    r = invoke(runner, "compile", te / "Types.masf", te / "Type-environment.masf",
               "--emit-plan", plans, "--emit-muasf-plus", pre, "--stats")
    assert r.exit_code == 0
    assert sorted(p.name for p in plans.iterdir()) == ["add-to_3.plan", "lookup_2.plan"]
    assert (plans / "add-to_3.plan").read_text().startswith("(plan add-to/3")
    assert "add-to(_,_,_)" in (pre / "add-to_3.muasf").read_text()
    assert "tre_sites=" in r.output


def test_oracle_normalize(runner):
    r = invoke(runner, "oracle-normalize", corpus_dir() / "Set.masf", "--term", "set([b,a,b])")
    assert r.exit_code == 0 and r.output.strip() == "set([b,a])"


def test_bench_command_writes_csv(runner, tmp_path):
    out = tmp_path / "b.csv"
    r = invoke(runner, "bench", "evalsym", "--n", "3..4", "--sharing", "on", "--out", out)
    assert r.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("benchmark,n,sharing")
    assert len(lines) == 3 and all(x.endswith(",ok") for x in lines[1:])
