"""``rwc``: compile modules, run terms, benchmark."""

from __future__ import annotations

import json
import pickle
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import __version__
from .bench import BENCHMARKS, N_RANGE, NODE_BUDGET, parse_range, run_bench, to_csv
from .driver import BuildError, BuildOptions, build, load_modules
from .lang.ast import ModuleDef
from .lang.parser import ParseError
from .lang.printer import format_decl, format_rule
from .oracle import Oracle, StepLimitExceeded, format_tuple, parse_tuple
from .plan import format_plan
from .planner import CompileError, LinkError, Program
from .preprocess import PreprocessError
from .runtime import ResourceError, RunConfig, UnknownSymbol, run_with_config
from .store import NodeBudgetExceeded, TermSyntaxError, format_term

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_PARSE = 2
EXIT_RESOURCE = 3
EXIT_LINK = 4
EXIT_COMPILE = 5

MAGIC = b"RWCPROG\0"
ARTIFACT_VERSION = 1


class ArtifactError(Exception):
    pass


@dataclass
class Artifact:
    program: Program
    main: str
    options: BuildOptions
    unit_cache: dict = field(default_factory=dict)
    version: str = __version__


def write_artifact(path: str | Path, art: Artifact) -> None:
    data = MAGIC + ARTIFACT_VERSION.to_bytes(4, "little") + pickle.dumps(art, protocol=4)
    Path(path).write_bytes(data)


def read_artifact(path: str | Path) -> Artifact:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ArtifactError(f"{path}: not a compiled program")
    version = int.from_bytes(data[len(MAGIC):len(MAGIC) + 4], "little")
    if version != ARTIFACT_VERSION:
        raise ArtifactError(f"{path}: artifact version {version}, expected {ARTIFACT_VERSION}")
    art = pickle.loads(data[len(MAGIC) + 4:])
    if not isinstance(art, Artifact):
        raise ArtifactError(f"{path}: malformed artifact")
    return art


def is_artifact(path: str | Path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC


def exit_code(e: BaseException) -> int:
    if isinstance(e, (ParseError, TermSyntaxError)):
        return EXIT_PARSE
    if isinstance(e, (ResourceError, NodeBudgetExceeded, StepLimitExceeded, RecursionError)):
        return EXIT_RESOURCE
    if isinstance(e, (LinkError, UnknownSymbol, ArtifactError)):
        return EXIT_LINK
    if isinstance(e, (BuildError, PreprocessError, CompileError)):
        return EXIT_COMPILE
    return EXIT_OTHER


def _fail(e: BaseException):
    click.echo(f"rwc: {type(e).__name__}: {e}", err=True)
    sys.exit(exit_code(e))


# -- shared options -----------------------------------------------------------------

def _names(text: str | None) -> frozenset:
    return frozenset(x.strip() for x in (text or "").split(",") if x.strip())


def build_options(no_tre: bool, no_constcache: bool, reorder_args: bool,
                  memo: str | None = None) -> BuildOptions:
    return BuildOptions(tre=not no_tre, constcache=not no_constcache,
                        reorder_args=reorder_args, memo=_names(memo))


def _pick_main(mods: dict, paths, main: str | None) -> ModuleDef:
    if main:
        if main not in mods:
            raise BuildError([f"no module named {main!r}"])
        return mods[main]
    first = load_modules(paths=[paths[0]])
    return mods[next(iter(first))]


def optimization_flags(f):
    for opt in reversed([
        click.option("--no-tre", is_flag=True, help="Disable tail-recursion elimination."),
        click.option("--no-constcache", is_flag=True, help="Disable constant caching."),
        click.option("--reorder-args", is_flag=True,
                     help="Test arguments with more non-variable patterns first."),
    ]):
        f = opt(f)
    return f


# -- commands -----------------------------------------------------------------------

@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="rwc")
def main():
    """Compiler and runtime for conditional rewrite modules."""


@main.command("compile")
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--main", "main_module", help="Top module (default: the first file's).")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Artifact to write.")
@optimization_flags
@click.option("--memo", help="Extra functions to memoize, comma separated.")
@click.option("--emit-plan", type=click.Path(file_okay=False),
              help="Write one plan file per function into this directory.")
@click.option("--emit-muasf-plus", type=click.Path(file_okay=False),
              help="Write each function's preprocessed rules into this directory.")
@click.option("--stats", is_flag=True, help="Print the optimization report.")
def compile_cmd(paths, main_module, out, no_tre, no_constcache, reorder_args, memo,
                emit_plan, emit_muasf_plus, stats):
    """Compile PATHS into a linked program artifact."""
    try:
        options = build_options(no_tre, no_constcache, reorder_args, memo)
        mods = load_modules(paths=paths)
        top = _pick_main(mods, paths, main_module)
        cache: dict = {}
        if out and Path(out).exists():
            try:
                cache = dict(read_artifact(out).unit_cache)
            except (ArtifactError, pickle.UnpicklingError, EOFError, AttributeError):
                cache = {}
        res = build(top, mods, options, cache)
        live = {r.unit.fingerprint() for r in res.units}
        cache = {k: v for k, v in cache.items() if k[0] in live}
        for w in res.warnings:
            click.echo(f"warning: {w}", err=True)
        for r in res.units:
            click.echo(f"{'cached' if r.cached else 'recompiled'} {r.unit.name}")
        click.echo(f"constructors {len(res.program.constructors)}")
        if emit_plan:
            d = Path(emit_plan)
            d.mkdir(parents=True, exist_ok=True)
            for k, p in sorted(res.program.plans.items()):
                (d / f"{k[0]}_{k[1]}.plan").write_text(format_plan(p))
        if emit_muasf_plus:
            d = Path(emit_muasf_plus)
            d.mkdir(parents=True, exist_ok=True)
            for r in res.units:
                text = format_decl(r.preprocessed.decl) + "\n\n" + "\n\n".join(
                    format_rule(x) for x in r.preprocessed.rules)
                (d / f"{r.unit.decl.name}_{r.unit.decl.arity}.muasf").write_text(text + "\n")
        if stats:
            for k, v in res.program.report.items():
                click.echo(f"{k}={v}")
        if out:
            write_artifact(out, Artifact(res.program, top.name, options, cache))
    except Exception as e:  # noqa: BLE001 - mapped to exit codes
        _fail(e)


def load_program(target: str, main_module: str | None, options: BuildOptions) -> Program:
    if is_artifact(target):
        return read_artifact(target).program
    mods = load_modules(paths=[target])
    top = _pick_main(mods, [target], main_module)
    return build(top, mods, options).program


@main.command("run")
@click.argument("target", type=click.Path(exists=True, dir_okay=False))
@click.argument("term")
@click.option("--main", "main_module", help="Top module when TARGET is a source file.")
@optimization_flags
@click.option("--no-sharing", is_flag=True, help="Build terms without hash-consing.")
@click.option("--memo", help="Memoize exactly these functions (comma separated).")
@click.option("--no-memo", is_flag=True, help="Disable all memoization.")
@click.option("--depth-limit", type=int, default=10 ** 6, show_default=True)
@click.option("--node-budget", type=int, default=None, help="Maximum nodes constructed.")
@click.option("--stats", is_flag=True, help="Print execution statistics.")
def run_cmd(target, term, main_module, no_tre, no_constcache, reorder_args, no_sharing,
            memo, no_memo, depth_limit, node_budget, stats):
    """Normalize TERM with the program in TARGET (artifact or .masf file)."""
    try:
        prog = load_program(target, main_module, build_options(no_tre, no_constcache, reorder_args))
        cfg = RunConfig(sharing=not no_sharing, memo=_names(memo) if memo else None,
                        memo_enabled=not no_memo, depth_limit=depth_limit,
                        node_budget=node_budget)
        r, st, _ = run_with_config(prog, term, cfg)
        click.echo(format_term(r))
        if stats:
            d = st.as_dict()
            d.update({f"opt_{k}": v for k, v in prog.report.items()})
            for k, v in d.items():
                click.echo(f"{k}={v}")
            click.echo(json.dumps(d, sort_keys=True))
    except Exception as e:  # noqa: BLE001
        _fail(e)


@main.command("bench")
@click.argument("benchmarks", nargs=-1)
@click.option("--n", "n_range", default=f"{N_RANGE[0]}..{N_RANGE[-1]}", show_default=True,
              help="Exponents, e.g. 17..23 or 17,20.")
@click.option("--sharing", type=click.Choice(["on", "off", "both"]), default="both",
              show_default=True)
@click.option("--reps", type=int, default=1, show_default=True,
              help="Repetitions per cell; the fastest is reported.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Run independent series in this many processes.")
@click.option("--node-budget", type=int, default=NODE_BUDGET, show_default=True)
@optimization_flags
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="CSV file (default stdout).")
def bench_cmd(benchmarks, n_range, sharing, reps, jobs, node_budget, no_tre, no_constcache,
              reorder_args, out):
    """Run BENCHMARKS (default: all of evalsym, evalexp, evaltree) and emit CSV."""
    try:
        modes = {"on": (True,), "off": (False,), "both": (True, False)}[sharing]
        rows = run_bench(benchmarks or tuple(BENCHMARKS), parse_range(n_range), modes, reps,
                         node_budget, build_options(no_tre, no_constcache, reorder_args), jobs)
        text = to_csv(rows)
        if out:
            Path(out).write_text(text)
        else:
            click.echo(text, nl=False)
        bad = [r for r in rows if r.status == "wrong"]
        for r in bad:
            click.echo(f"residue mismatch: {r.benchmark} n={r.n} sharing={r.sharing}", err=True)
        if bad:
            sys.exit(EXIT_OTHER)
    except Exception as e:  # noqa: BLE001
        _fail(e)


@main.command("oracle-normalize", hidden=True)
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--main", "main_module")
@click.option("--term", required=True)
def oracle_cmd(paths, main_module, term):
    """Normalize with the reference interpreter (for debugging)."""
    try:
        mods = load_modules(paths=paths)
        top = _pick_main(mods, paths, main_module)
        click.echo(format_tuple(Oracle.from_modules(top, mods).normalize(parse_tuple(term))))
    except Exception as e:  # noqa: BLE001
        _fail(e)


__all__ = ["main", "Artifact", "read_artifact", "write_artifact", "exit_code"]
