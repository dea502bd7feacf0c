"""Source-to-program pipeline: parse, collect, preprocess, plan, optimize, link."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .lang.ast import ModuleDef
from .lang.parser import parse_module
from .lang.validate import errors, validate
from .planner import Program, compile_unit, link_program, wrap_memo
from .postprocess import optimize
from .preprocess import ALL_STEPS, Collected, FunctionUnit, PreprocessError, collect_functions, run_pipeline


@dataclass(frozen=True)
class BuildOptions:
    tre: bool = True
    constcache: bool = True
    reorder_args: bool = False
    memo: frozenset = frozenset()   # extra functions to memoize, by name
    memo_enabled: bool = True
    steps: tuple = ALL_STEPS

    def key(self) -> str:
        return (f"tre={int(self.tre)},cc={int(self.constcache)},ro={int(self.reorder_args)},"
                f"memo={','.join(sorted(self.memo))},me={int(self.memo_enabled)},"
                f"steps={','.join(self.steps)}")


class BuildError(Exception):
    def __init__(self, diagnostics: list):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


# -- sources -------------------------------------------------------------------

def corpus_dir() -> Path:
    return Path(str(resources.files("rwc") / "corpus"))


def corpus_text(name: str) -> str:
    fn = name if name.endswith(".masf") else name + ".masf"
    return (corpus_dir() / fn).read_text()


def search_path(extra: Iterable[str] = ()) -> list[Path]:
    out = [Path(p) for p in extra]
    env = os.environ.get("RWC_PATH")
    if env:
        out += [Path(p) for p in env.split(os.pathsep) if p]
    out.append(corpus_dir())
    return out


def parse_file(path: str | Path, allow_extended: bool = False) -> ModuleDef:
    path = Path(path)
    return parse_module(path.read_text(), allow_extended=allow_extended, path=str(path))


def load_modules(paths: Iterable[str | Path] = (), texts: Iterable[str] = (),
                 search: Iterable[str | Path] = (), allow_extended: bool = False
                 ) -> dict[str, ModuleDef]:
    """Parse the given files and texts, then pull unresolved imports from the search path."""
    mods: dict[str, ModuleDef] = {}
    for p in paths:
        m = parse_file(p, allow_extended)
        mods[m.name] = m
    for t in texts:
        m = parse_module(t, allow_extended=allow_extended)
        mods[m.name] = m
    dirs = search_path([str(s) for s in search])
    pending = [i for m in mods.values() for i in m.imports]
    while pending:
        name = pending.pop()
        if name in mods:
            continue
        for d in dirs:
            f = d / f"{name}.masf"
            if f.exists():
                m = parse_file(f, allow_extended)
                mods[m.name] = m
                pending.extend(m.imports)
                break
    return mods


def check_modules(top: ModuleDef, modules: Mapping[str, ModuleDef]) -> list:
    """Validation diagnostics of every module in the import closure."""
    from .preprocess import import_closure
    mods = import_closure(top, modules)
    out = []
    for m in mods:
        visible = import_closure(m, modules)
        out.extend(validate(m, visible))
    return out


# -- building ------------------------------------------------------------------

@dataclass
class UnitResult:
    unit: FunctionUnit
    preprocessed: FunctionUnit
    plan: object
    cached: bool = False


@dataclass
class BuildResult:
    program: Program
    collected: Collected
    units: list[UnitResult] = field(default_factory=list)
    warnings: list = field(default_factory=list)


def compile_units(col: Collected, options: BuildOptions, cache: dict | None = None
                  ) -> list[UnitResult]:
    """Preprocess and plan every unit; ``cache`` maps (fingerprint, options) to
    earlier results so unchanged units are skipped."""
    out = []
    for u in col.units:
        key = (u.fingerprint(), options.key(), _signature_key(col, u))
        if cache is not None and key in cache:
            pre, plan = cache[key]
            out.append(UnitResult(u, pre, plan, cached=True))
            continue
        pre = run_pipeline(u, options.steps).unit
        plan = compile_unit(pre, col.decls, options.reorder_args)
        memo = options.memo_enabled and (u.decl.memo or u.decl.name in options.memo
                                         or u.name in options.memo)
        plan = wrap_memo(plan, memo)
        if cache is not None:
            cache[key] = (pre, plan)
        out.append(UnitResult(u, pre, plan))
    return out


def _signature_key(col: Collected, u: FunctionUnit) -> str:
    # a unit's plan depends on callees' delay attributes and constructor status
    parts = []
    for k in sorted(u.constructors):
        parts.append(f"{k[0]}/{k[1]}")
    for d in sorted(col.decls.values(), key=lambda d: d.ident):
        if d.delay:
            parts.append(f"{d.name}/{d.arity}:{d.delay}")
    return ";".join(parts)


def build(top: ModuleDef | str, modules: Mapping[str, ModuleDef] | None = None,
          options: BuildOptions | None = None, cache: dict | None = None) -> BuildResult:
    options = options or BuildOptions()
    modules = dict(modules or {})
    if isinstance(top, str):
        top = modules[top]
    modules.setdefault(top.name, top)
    diags = check_modules(top, modules)
    errs = errors(diags)
    if errs:
        raise BuildError(errs)
    col = collect_functions(top, modules)
    units = compile_units(col, options, cache)
    plans, table, report = optimize([r.plan for r in units], options.tre, options.constcache)
    prog = link_program(plans, col.constructors.decls, col.decls, table.exprs)
    prog.report = report
    prog.units = {r.unit.name: r.unit.fingerprint() for r in units}
    warnings = [str(d) for d in diags if d.severity != "error"] + list(col.diagnostics)
    return BuildResult(prog, col, units, warnings)


def build_program(source: str | ModuleDef, options: BuildOptions | None = None,
                  modules: Mapping[str, ModuleDef] | None = None, **kw) -> Program:
    """Convenience: a program from module text (imports resolved from the corpus)."""
    if kw:
        options = BuildOptions(**{**(options or BuildOptions()).__dict__, **kw})
    if isinstance(source, str):
        top = parse_module(source)
        mods = load_modules(texts=[])
        mods.update(modules or {})
        mods[top.name] = top
        mods.update(_resolve_imports(top, mods))
    else:
        top = source
        mods = dict(modules or {})
        mods[top.name] = top
        mods.update(_resolve_imports(top, mods))
    return build(top, mods, options).program


def corpus_program(name: str, options: BuildOptions | None = None, **kw) -> Program:
    return build_program(corpus_text(name), options, **kw)


def _resolve_imports(top: ModuleDef, mods: dict) -> dict:
    found = {}
    pending = list(top.imports)
    dirs = search_path()
    while pending:
        name = pending.pop()
        if name in mods or name in found:
            continue
        for d in dirs:
            f = d / f"{name}.masf"
            if f.exists():
                m = parse_file(f)
                found[m.name] = m
                pending.extend(m.imports)
                break
    return found


__all__ = ["BuildOptions", "BuildError", "BuildResult", "build", "build_program",
           "corpus_program", "corpus_text", "corpus_dir", "load_modules", "parse_file",
           "compile_units", "PreprocessError"]
