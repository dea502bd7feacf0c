"""Print a sharing-on vs sharing-off table from a `rwc bench` CSV."""

from __future__ import annotations

import argparse
from collections import defaultdict
from pathlib import Path

from rwc.bench import from_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", type=Path)
    args = ap.parse_args()
    rows = from_csv(args.csv.read_text())
    cells = defaultdict(dict)
    for r in rows:
        cells[(r.benchmark, r.n)][r.sharing] = r

    def show(r) -> str:
        if r is None:
            return "-"
        if not r.completed:
            return "DNF"
        return f"{r.wall_ms:.0f}ms/{r.peak_unique_nodes}n"

    print(f"{'benchmark':<10} {'n':>3}  {'on':>18}  {'off':>18}  status")
    for (bench, n), d in sorted(cells.items()):
        on, off = d.get("on"), d.get("off")
        status = ",".join(sorted({x.status for x in d.values()}))
        print(f"{bench:<10} {n:>3}  {show(on):>18}  {show(off):>18}  {status}")


if __name__ == "__main__":
    main()
