"""Benchmark harness: 2^n mod 17 three ways, with and without sharing.

Every cell builds a fresh runtime (and so a fresh store), normalizes
``<bench>(s^n(0))`` and checks the residue against Fermat's closed form.
A cell that runs out of node budget is reported as DNF; larger ``n`` in the
same series are then skipped and reported DNF too, since they construct
strictly more nodes.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

from .driver import BuildOptions, corpus_program
from .runtime import ResourceError, RunConfig, run_with_config
from .store import NodeBudgetExceeded, Term

BENCHMARKS = {"evalsym": "Evalsym", "evalexp": "Evalexp", "evaltree": "Evaltree"}
N_RANGE = tuple(range(17, 24))

# 2 GiB at a nominal 128 bytes per node
BUDGET_BYTES = 2 << 30
NODE_BYTES = 128
NODE_BUDGET = BUDGET_BYTES // NODE_BYTES

CSV_COLUMNS = ("benchmark", "n", "sharing", "wall_ms", "peak_unique_nodes",
               "peak_total_nodes", "residue", "status")


@dataclass
class BenchResult:
    benchmark: str
    n: int
    sharing: str          # "on" | "off"
    wall_ms: float | None
    peak_unique_nodes: int | None
    peak_total_nodes: int | None
    residue: int | None
    status: str           # ok | DNF | wrong

    @property
    def completed(self) -> bool:
        return self.status != "DNF"


def expected_residue(n: int) -> int:
    return pow(2, n % 16, 17)


def numeral(n: int) -> str:
    return "s(" * n + "0" + ")" * n


def residue_of(t: Term) -> int | None:
    """Value of a successor numeral, or None if ``t`` is not one."""
    k = 0
    while t.sym.name == "s" and len(t.args) == 1:
        t = t.args[0]
        k += 1
    return k if t.sym.name == "0" and not t.args else None


def run_cell(benchmark: str, n: int, sharing: bool, reps: int = 1,
             budget: int = NODE_BUDGET, options: BuildOptions | None = None,
             program=None) -> BenchResult:
    program = program or corpus_program(BENCHMARKS[benchmark], options)
    tag = "on" if sharing else "off"
    best = None
    for _ in range(max(1, reps)):
        cfg = RunConfig(sharing=sharing, node_budget=budget)
        try:
            term, stats, _ = run_with_config(program, f"{benchmark}({numeral(n)})", cfg)
        except (NodeBudgetExceeded, ResourceError):
            return BenchResult(benchmark, n, tag, None, None, None, None, "DNF")
        ms = stats.wall_time * 1000.0
        if best is None or ms < best[0]:
            best = (ms, term, stats)
    ms, term, stats = best
    res = residue_of(term)
    status = "ok" if res == expected_residue(n) else "wrong"
    return BenchResult(benchmark, n, tag, round(ms, 3), stats.peak_unique_nodes,
                       stats.peak_total_nodes, res, status)


def run_series(benchmark: str, ns: Sequence[int], sharing: bool, reps: int = 1,
               budget: int = NODE_BUDGET, options: BuildOptions | None = None
               ) -> list[BenchResult]:
    """Cells for increasing n; once one DNFs the rest are marked DNF unrun."""
    program = corpus_program(BENCHMARKS[benchmark], options)
    out: list[BenchResult] = []
    failed = False
    for n in sorted(ns):
        if failed:
            out.append(BenchResult(benchmark, n, "on" if sharing else "off",
                                   None, None, None, None, "DNF"))
            continue
        r = run_cell(benchmark, n, sharing, reps, budget, options, program)
        failed = r.status == "DNF"
        out.append(r)
    return out


def _series_job(args):
    return run_series(*args)


def run_bench(benchmarks: Iterable[str] = BENCHMARKS, ns: Sequence[int] = N_RANGE,
              sharing: Iterable[bool] = (True, False), reps: int = 1,
              budget: int = NODE_BUDGET, options: BuildOptions | None = None,
              jobs: int = 1) -> list[BenchResult]:
    jobs_list = [(b, tuple(ns), s, reps, budget, options)
                 for b in benchmarks for s in sharing]
    for b, *_ in jobs_list:
        if b not in BENCHMARKS:
            raise KeyError(f"unknown benchmark {b!r}; choose from {', '.join(BENCHMARKS)}")
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            series = list(ex.map(_series_job, jobs_list))
    else:
        series = [_series_job(j) for j in jobs_list]
    return [r for s in series for r in s]


def to_csv(rows: Iterable[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(["" if v is None else v for v in astuple(r)])
    return buf.getvalue()


def from_csv(text: str) -> list[BenchResult]:
    types = {f.name: f.type for f in fields(BenchResult)}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        vals = {}
        for k, v in row.items():
            if v == "":
                vals[k] = None
            elif k in ("n", "peak_unique_nodes", "peak_total_nodes", "residue"):
                vals[k] = int(v)
            elif k == "wall_ms":
                vals[k] = float(v)
            else:
                vals[k] = v
        if set(vals) != set(types):
            raise ValueError(f"CSV columns {sorted(vals)} do not match {list(CSV_COLUMNS)}")
        out.append(BenchResult(**vals))
    return out


def parse_range(text: str) -> tuple[int, ...]:
    """``17..23``, ``17,19,21`` or ``20``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


__all__ = ["BenchResult", "BENCHMARKS", "N_RANGE", "NODE_BUDGET", "CSV_COLUMNS",
           "expected_residue", "run_cell", "run_series", "run_bench", "to_csv", "from_csv",
           "parse_range", "numeral", "residue_of"]
